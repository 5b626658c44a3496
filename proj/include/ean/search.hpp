#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ean/controller.hpp"
#include "ean/evaluator.hpp"
#include "ean/rewards.hpp"
#include "ean/scheme.hpp"

namespace ean {

class Supernet;
struct BackboneConfig;

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown on the calling thread (the first one wins).
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// lambda1 * g_spa + lambda2 * g_val, the part of G that does not depend on
/// the exploration state.
double exploit_score(const RewardConfig& rewards, const ConnectionScheme& a, double g_val);

struct SearchBudget {
    std::size_t iterations = 300;  // T
    std::size_t max_evaluations = 0;  // distinct schemes scored; 0 = no cap
    double wall_seconds = 0.0;  // 0 = no cap

    void validate() const;
};

struct TraceRow {
    std::size_t iteration = 0;
    std::string scheme;
    double g_spa = 0.0;
    double g_val = 0.0;
    double g_rnd = 0.0;
    double reward = 0.0;  // G
    double p_bar = 0.0;
};

struct RankedScheme {
    ConnectionScheme scheme;
    double score = 0.0;
    double g_val = 0.0;
};

struct SearchResult {
    std::vector<TraceRow> trace;
    std::vector<RankedScheme> top;  // best first, at most 3
    std::size_t evaluations = 0;
};

/// Policy-gradient search: sample, score, REINFORCE, buffer, PPO every h
/// iterations, train the RND predictor. Candidates are ranked by
/// exploit_score; g_val is cached per scheme.
SearchResult ean_search(const SchemeEvaluator& evaluator, Controller& controller, RNDPair& rnd,
                        const RewardConfig& rewards, const SearchBudget& budget, std::mt19937_64& sample_rng);

/// Every scheme with its score, best first; ties by scheme string ascending.
std::vector<RankedScheme> exhaustive_search(std::size_t m, const std::function<double(const ConnectionScheme&)>& score,
                                            std::size_t workers = 1);

/// 1 + number of schemes scoring strictly higher than `score`.
std::size_t exhaustive_rank(const std::vector<RankedScheme>& ranking, double score);

struct StudyRow {
    ConnectionScheme scheme;
    std::size_t ones = 0;
    double ratio = 0.0;
    double accuracy = 0.0;
    std::size_t extra_params = 0;
    double flop_increment_pct = 0.0;
};

/// Per ratio, distinct schemes with exactly round(ratio * m) ones: all of
/// them when samples >= C(m, k), else a uniform draw without repeats.
/// Parameter and FLOP columns are filled when `backbone` is given.
std::vector<StudyRow> random_ratio_study(const SchemeEvaluator& evaluator, const std::vector<double>& ratios,
                                         std::size_t samples_per_ratio, std::mt19937_64& rng,
                                         const BackboneConfig* backbone = nullptr, std::size_t workers = 1);

/// a_i = 1 iff i mod period == offset.
ConnectionScheme hsp_scheme(std::size_t period, std::size_t offset, std::size_t m);

struct GaOptions {
    std::size_t population = 20;
    std::size_t generations = 15;
    std::size_t tournament = 3;
    double crossover = 0.5;
    double mutation = 0.0;  // 0 means 1/m
    std::size_t elitism = 1;

    void validate() const;
};

struct GaResult {
    ConnectionScheme best;
    double best_fitness = 0.0;
    std::size_t evaluations = 0;
    std::vector<double> best_per_generation;
};

GaResult ga_search(std::size_t m, const std::function<double(const ConnectionScheme&)>& fitness, const GaOptions& options,
                   std::mt19937_64& rng, std::size_t workers = 1);

/// Keeps the round(keep_ratio * m) blocks whose SAM parameters have the
/// largest l1 norm. Needs per-block SAMs.
ConnectionScheme l1_prune_baseline(const Supernet& net, double keep_ratio);

struct TicketVerdict {
    double accuracy = 0.0;
    double full_accuracy = 0.0;
    double original_accuracy = 0.0;
    bool is_ticket = false;
    bool is_harmful = false;
};

TicketVerdict classify_ticket(double accuracy, double full_accuracy, double original_accuracy, std::size_t ones,
                              std::size_t m);

}  // namespace ean
