#include "ean/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace ean {

std::vector<double> connection_score(const std::vector<ConnectionScheme>& set) {
    if (set.empty()) throw std::invalid_argument("connection score of an empty scheme set");
    const std::size_t m = set.front().size();
    std::vector<double> score(m, 0.0);
    for (const auto& a : set) {
        if (a.size() != m) throw std::invalid_argument("scheme set mixes lengths");
        for (std::size_t j = 0; j < m; ++j) score[j] += a[j] ? 1.0 : 0.0;
    }
    for (auto& s : score) s /= static_cast<double>(set.size());
    return score;
}

double regression_slope(const std::vector<double>& scores) {
    const std::size_t n = scores.size();
    if (n < 2) throw std::invalid_argument("regression needs at least two points");
    const double xbar = static_cast<double>(n - 1) / 2.0;
    double ybar = 0.0;
    for (double v : scores) ybar += v;
    ybar /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double dx = static_cast<double>(j) - xbar;
        sxy += dx * (scores[j] - ybar);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw std::invalid_argument("pearson: vectors differ in length");
    if (n < 3) throw std::invalid_argument("pearson needs at least three points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
    PearsonResult res;
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double dof = static_cast<double>(n - 2);
    if (std::abs(res.r) >= 1.0) {
        res.p_one_sided = res.r > 0.0 ? 0.0 : 1.0;
    } else {
        const double t = res.r * std::sqrt(dof / (1.0 - res.r * res.r));
        res.p_one_sided = boost::math::cdf(boost::math::complement(boost::math::students_t(dof), t));
    }
    return res;
}

std::vector<ViolinStats> aggregate_violin(const std::vector<ViolinRow>& rows, const std::vector<double>& ratios) {
    std::map<double, std::vector<double>> groups;
    for (double r : ratios) groups[r];
    for (const auto& row : rows) {
        if (!ratios.empty() && !groups.count(row.ratio)) continue;
        groups[row.ratio].push_back(row.value);
    }
    std::vector<ViolinStats> out;
    for (const auto& [ratio, values] : groups) {
        if (values.empty()) {
            std::clog << "warning: no rows for connection ratio " << ratio << ", skipped\n";
            continue;
        }
        ViolinStats s;
        s.ratio = ratio;
        s.count = values.size();
        s.max = *std::max_element(values.begin(), values.end());
        s.min = *std::min_element(values.begin(), values.end());
        double sum = 0.0;
        for (double v : values) sum += v;
        s.mean = sum / static_cast<double>(values.size());
        out.push_back(s);
    }
    return out;
}

}  // namespace ean
