#pragma once

#include <cstddef>
#include <vector>

#include "ean/scheme.hpp"

namespace ean {

/// Per-block connection frequency over a set of schemes.
std::vector<double> connection_score(const std::vector<ConnectionScheme>& set);

/// Least-squares slope of scores[j] against j.
double regression_slope(const std::vector<double>& scores);

struct PearsonResult {
    double r = 0.0;
    double p_one_sided = 1.0;  // H1: r > 0, Student t with n - 2 dof
};

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

struct ViolinRow {
    double ratio = 0.0;
    double value = 0.0;
};

struct ViolinStats {
    double ratio = 0.0;
    std::size_t count = 0;
    double max = 0.0;
    double mean = 0.0;
    double min = 0.0;
};

/// Rows grouped by exact ratio value, ascending. `ratios` lists the groups
/// to report; empty groups are skipped with a warning. With `ratios` empty
/// every ratio present in the rows is reported.
std::vector<ViolinStats> aggregate_violin(const std::vector<ViolinRow>& rows, const std::vector<double>& ratios = {});

}  // namespace ean
