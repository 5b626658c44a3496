#include "ean/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "ean/supernet.hpp"

namespace ean {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double exploit_score(const RewardConfig& rewards, const ConnectionScheme& a, double g_val) {
    return rewards.lambda1 * sparsity_reward(a) + rewards.lambda2 * g_val;
}

void SearchBudget::validate() const {
    if (iterations == 0 && max_evaluations == 0 && !(wall_seconds > 0.0)) {
        throw std::invalid_argument("search budget needs at least one finite cap");
    }
    if (wall_seconds < 0.0) throw std::invalid_argument("wall-clock cap must be >= 0");
}

namespace {

bool better(const RankedScheme& x, const RankedScheme& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.scheme < y.scheme;
}

}  // namespace

SearchResult ean_search(const SchemeEvaluator& evaluator, Controller& controller, RNDPair& rnd,
                        const RewardConfig& rewards, const SearchBudget& budget, std::mt19937_64& sample_rng) {
    budget.validate();
    rewards.validate();
    const std::size_t m = evaluator.blocks();
    if (controller.blocks() != m || rnd.blocks() != m) {
        throw std::invalid_argument("controller, RND pair and evaluator disagree on the number of blocks");
    }
    const auto start = std::chrono::steady_clock::now();
    const std::size_t h = controller.config().ppo_period;

    SearchResult result;
    std::unordered_map<std::string, RankedScheme> seen;
    const std::size_t max_iter = budget.iterations ? budget.iterations : static_cast<std::size_t>(-1);

    for (std::size_t it = 1; it <= max_iter; ++it) {
        if (budget.wall_seconds > 0.0) {
            const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
            if (el.count() >= budget.wall_seconds) break;
        }
        const auto p = controller.forward();
        SampledScheme s = sample_and_score(p, sample_rng);
        const std::string key = s.scheme.to_string();

        auto found = seen.find(key);
        if (found == seen.end()) {
            if (budget.max_evaluations && result.evaluations >= budget.max_evaluations) break;
            const double g_val = evaluator.accuracy(s.scheme);
            ++result.evaluations;
            found = seen.emplace(key, RankedScheme{s.scheme, exploit_score(rewards, s.scheme, g_val), g_val}).first;
        }
        const double g_spa = sparsity_reward(s.scheme);
        const double g_val = found->second.g_val;
        const double raw = rnd.raw_bonus(s.scheme);
        const double g_rnd = rnd.bonus(s.scheme);
        rnd.observe(raw);
        const double G = combined_reward(rewards, g_spa, g_val, g_rnd);

        controller.reinforce_update(s.scheme, G);
        controller.push_rollout(Rollout{p, s.scheme, G});
        if (it % h == 0) {
            const auto batch = controller.draw_from_buffer(sample_rng);
            controller.ppo_update(batch);
        }
        rnd.train_step(s.scheme);

        result.trace.push_back(TraceRow{it, key, g_spa, g_val, g_rnd, G, mean_prob(s.p_hat)});
    }

    std::vector<RankedScheme> all;
    all.reserve(seen.size());
    for (auto& [k, v] : seen) all.push_back(v);
    std::sort(all.begin(), all.end(), better);
    if (all.size() > 3) all.resize(3);
    result.top = std::move(all);
    return result;
}

std::vector<RankedScheme> exhaustive_search(std::size_t m, const std::function<double(const ConnectionScheme&)>& score,
                                            std::size_t workers) {
    if (m == 0) throw std::invalid_argument("exhaustive search needs at least one block");
    if (m > 20) {
        throw std::invalid_argument("exhaustive search refused: 2^" + std::to_string(m) +
                                    " schemes exceeds the 2^20 limit");
    }
    const std::size_t n = std::size_t{1} << m;
    std::vector<RankedScheme> out(n);
    parallel_for(n, workers, [&](std::size_t i) {
        ConnectionScheme a = ConnectionScheme::from_index(i, m);
        const double s = score(a);
        out[i] = RankedScheme{std::move(a), s, 0.0};
    });
    std::stable_sort(out.begin(), out.end(), better);
    return out;
}

std::size_t exhaustive_rank(const std::vector<RankedScheme>& ranking, double score) {
    std::size_t higher = 0;
    for (const auto& r : ranking) higher += r.score > score;
    return higher + 1;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(c);
}

std::vector<ConnectionScheme> all_with_ones(std::size_t m, std::size_t k) {
    // prev_permutation walks descending order; reversed to ascending at the end
    std::vector<std::uint8_t> bits(m, 0);
    std::fill(bits.begin(), bits.begin() + static_cast<long>(k), 1);
    std::vector<ConnectionScheme> out;
    do {
        out.emplace_back(bits);
    } while (std::prev_permutation(bits.begin(), bits.end()));
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<StudyRow> random_ratio_study(const SchemeEvaluator& evaluator, const std::vector<double>& ratios,
                                         std::size_t samples_per_ratio, std::mt19937_64& rng,
                                         const BackboneConfig* backbone, std::size_t workers) {
    const std::size_t m = evaluator.blocks();
    if (backbone && backbone->block_count() != m) {
        throw std::invalid_argument("backbone block count does not match evaluator");
    }
    std::vector<StudyRow> rows;
    for (double ratio : ratios) {
        if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("connection ratio must lie in [0,1]");
        const auto k = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(m)));
        std::vector<ConnectionScheme> picked;
        if (static_cast<double>(samples_per_ratio) >= binomial(m, k)) {
            picked = all_with_ones(m, k);
        } else {
            std::set<ConnectionScheme> distinct;
            while (picked.size() < samples_per_ratio) {
                ConnectionScheme a = sample_fixed_ones(m, k, rng);
                if (distinct.insert(a).second) picked.push_back(std::move(a));
            }
        }
        for (auto& a : picked) rows.push_back(StudyRow{std::move(a), k, ratio, 0.0, 0, 0.0});
    }
    parallel_for(rows.size(), workers, [&](std::size_t i) {
        StudyRow& r = rows[i];
        r.accuracy = evaluator.accuracy(r.scheme);
        if (backbone) {
            r.extra_params = count_params(*backbone, r.scheme).extra_sam;
            r.flop_increment_pct = count_flops(*backbone, r.scheme).increment_pct();
        }
    });
    return rows;
}

ConnectionScheme hsp_scheme(std::size_t period, std::size_t offset, std::size_t m) {
    if (period < 1 || period > m) throw std::invalid_argument("HSP period must satisfy 1 <= N <= m");
    if (offset >= period) throw std::invalid_argument("HSP offset must satisfy 0 <= offset < N");
    std::vector<std::uint8_t> bits(m);
    for (std::size_t i = 0; i < m; ++i) bits[i] = i % period == offset ? 1 : 0;
    return ConnectionScheme(std::move(bits));
}

void GaOptions::validate() const {
    if (population < 4) throw std::invalid_argument("GA population must be >= 4");
    if (generations < 1) throw std::invalid_argument("GA needs at least one generation");
    if (tournament < 1) throw std::invalid_argument("GA tournament size must be >= 1");
    if (!(crossover >= 0.0 && crossover <= 1.0)) throw std::invalid_argument("GA crossover probability must lie in [0,1]");
    if (!(mutation >= 0.0 && mutation <= 1.0)) throw std::invalid_argument("GA mutation probability must lie in [0,1]");
    if (elitism >= population) throw std::invalid_argument("GA elitism must be smaller than the population");
}

GaResult ga_search(std::size_t m, const std::function<double(const ConnectionScheme&)>& fitness, const GaOptions& options,
                   std::mt19937_64& rng, std::size_t workers) {
    options.validate();
    if (m == 0) throw std::invalid_argument("GA needs at least one block");
    const double mutation = options.mutation > 0.0 ? options.mutation : 1.0 / static_cast<double>(m);
    const std::size_t n = options.population;

    std::vector<RankedScheme> pop(n);
    GaResult result;
    auto evaluate = [&](std::size_t from) {
        parallel_for(n - from, workers, [&](std::size_t i) { pop[from + i].score = fitness(pop[from + i].scheme); });
        result.evaluations += n - from;
    };

    for (auto& ind : pop) ind.scheme = sample_bernoulli_scheme(0.5, m, rng);
    evaluate(0);

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::bernoulli_distribution take_first(1.0 - options.crossover);
    std::bernoulli_distribution mutate(mutation);
    auto tournament = [&]() -> const RankedScheme& {
        std::size_t best = pick(rng);
        for (std::size_t t = 1; t < options.tournament; ++t) {
            const std::size_t c = pick(rng);
            if (better(pop[c], pop[best])) best = c;
        }
        return pop[best];
    };

    for (std::size_t gen = 0;; ++gen) {
        std::stable_sort(pop.begin(), pop.end(), better);
        result.best_per_generation.push_back(pop.front().score);
        if (gen + 1 >= options.generations) break;

        std::vector<RankedScheme> next(pop.begin(), pop.begin() + static_cast<long>(options.elitism));
        while (next.size() < n) {
            const RankedScheme& x = tournament();
            const RankedScheme& y = tournament();
            std::vector<std::uint8_t> bits(m);
            for (std::size_t i = 0; i < m; ++i) {
                // with probability `crossover` the bit comes from the second parent
                bits[i] = take_first(rng) ? x.scheme.bits()[i] : y.scheme.bits()[i];
                if (mutate(rng)) bits[i] ^= 1;
            }
            next.push_back(RankedScheme{ConnectionScheme(std::move(bits)), 0.0, 0.0});
        }
        pop = std::move(next);
        evaluate(options.elitism);
    }
    result.best = pop.front().scheme;
    result.best_fitness = pop.front().score;
    return result;
}

ConnectionScheme l1_prune_baseline(const Supernet& net, double keep_ratio) {
    if (!(keep_ratio >= 0.0 && keep_ratio <= 1.0)) throw std::invalid_argument("keep ratio must lie in [0,1]");
    if (net.config().sharing != Sharing::PerBlock) {
        throw std::invalid_argument("l1 pruning needs per-block SAMs; the ranking is undefined with shared SAMs");
    }
    const std::size_t m = net.block_count();
    std::vector<double> norm(m, 0.0);
    for (std::size_t b = 0; b < m; ++b) {
        for (const Parameter* p : sam_parameters(net.sam(net.sam_slot(b)))) norm[b] += p->value.abs_sum();
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norm[x] > norm[y]; });
    const auto keep = static_cast<std::size_t>(std::lround(keep_ratio * static_cast<double>(m)));
    ConnectionScheme a = ConnectionScheme::zeros(m);
    for (std::size_t i = 0; i < keep; ++i) a.set(order[i], true);
    return a;
}

TicketVerdict classify_ticket(double accuracy, double full_accuracy, double original_accuracy, std::size_t ones,
                              std::size_t m) {
    for (double v : {accuracy, full_accuracy, original_accuracy}) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("accuracies must lie in [0,1]");
    }
    if (ones > m) throw std::invalid_argument("ones count exceeds block count");
    TicketVerdict v{accuracy, full_accuracy, original_accuracy, false, false};
    v.is_ticket = accuracy >= full_accuracy && ones < m;
    v.is_harmful = accuracy < original_accuracy;
    return v;
}

}  // namespace ean
