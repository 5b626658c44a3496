#include "ean/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "ean/checkpoint.hpp"
#include "ean/evaluator.hpp"
#include "ean/rng.hpp"
#include "ean/stats.hpp"
#include "json.hpp"

namespace ean {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// Wall-clock numbers live apart from the primary outputs so those stay
// byte-identical across reruns.
class Timer {
public:
    Timer(const CommandContext& ctx, std::string name) : ctx_(ctx), name_(std::move(name)) {}
    ~Timer() {
        try {
            const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start_;
            write_json(ctx_.output_dir / (name_ + ".timing.json"), json{{"command", name_}, {"seconds", el.count()}});
        } catch (...) {
        }
    }

private:
    const CommandContext& ctx_;
    std::string name_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Split make_split(const ExperimentConfig& c) {
    Dataset all;
    if (c.dataset.kind == "csv") {
        all = load_csv_dataset(c.dataset.csv_path, {c.backbone.in_channels, c.backbone.height, c.backbone.width},
                               c.backbone.classes);
    } else {
        auto rng = make_stream(c.seed, streams::kDataset);
        all = make_blob_dataset(c.dataset.blobs, rng);
    }
    return split_holdout(all, c.dataset.validation_fraction);
}

// Evaluator plus whatever it borrows from.
struct Workspace {
    std::optional<Split> data;
    std::optional<Supernet> net;
    std::unique_ptr<SchemeEvaluator> evaluator;
};

fs::path default_checkpoint(const CommandContext& ctx, const fs::path& given) {
    return given.empty() ? ctx.output_dir / "supernet.ckpt" : given;
}

Workspace open_workspace(const CommandContext& ctx, const fs::path& checkpoint) {
    const auto& c = ctx.config;
    Workspace w;
    if (c.evaluator == EvaluatorKind::Synthetic) {
        w.evaluator = std::make_unique<SyntheticLandscape>(c.backbone.block_count(),
                                                           stream_seed(c.seed, streams::kLandscape));
        return w;
    }
    const fs::path path = default_checkpoint(ctx, checkpoint);
    if (!fs::exists(path)) throw ValidationError("checkpoint " + path.string() + " not found; run pretrain first");
    const std::string want = model_digest(c);
    const std::string have = read_checkpoint_digest(path);
    if (have != want) {
        throw ValidationError("checkpoint " + path.string() + " was written for model digest " + have +
                              " but this config has " + want);
    }
    w.data = make_split(c);
    w.net.emplace(load_checkpoint(c.backbone, want, path));
    w.evaluator = std::make_unique<SupernetEvaluator>(*w.net, w.data->validation);
    return w;
}

json scheme_json(const ExperimentConfig& c, const ConnectionScheme& a, double accuracy) {
    return json{{"scheme", a.to_string()},
                {"ones", a.ones_count()},
                {"accuracy", accuracy},
                {"score", exploit_score(c.rewards, a, accuracy)},
                {"extra_params", count_params(c.backbone, a).extra_sam},
                {"flop_increment_pct", count_flops(c.backbone, a).increment_pct()}};
}

}  // namespace

CommandContext make_context(const fs::path& config_path, const std::string& output_override, std::size_t workers) {
    CommandContext ctx;
    ctx.config = load_config(config_path);
    apply_seed_override(ctx.config);
    ctx.output_dir = output_override.empty() ? fs::path(ctx.config.output_dir) : fs::path(output_override);
    ctx.workers = std::max<std::size_t>(1, workers);
    return ctx;
}

int cmd_pretrain(const CommandContext& ctx) {
    Timer timer(ctx, "pretrain");
    const auto& c = ctx.config;
    const Split data = make_split(c);
    Supernet net(c.backbone, c.seed);
    double final_loss = 0.0;
    if (c.pretrain.steps > 0) {
        auto mask_rng = make_stream(c.seed, streams::kSupernetMask);
        BatchSampler batches(data.train.size(), make_stream(c.seed, streams::kSupernetData));
        final_loss = pretrain_supernet(net, data.train, c.pretrain, mask_rng, batches);
    }
    const std::string digest = model_digest(c);
    fs::create_directories(ctx.output_dir);
    save_checkpoint(net, digest, ctx.output_dir / "supernet.ckpt");
    const std::size_t m = net.block_count();
    write_json(ctx.output_dir / "pretrain.json",
               json{{"config_digest", config_digest(c)},
                    {"model_digest", digest},
                    {"steps", c.pretrain.steps},
                    {"final_loss", final_loss},
                    {"train_size", data.train.size()},
                    {"validation_size", data.validation.size()},
                    {"proxy_accuracy_original", evaluate_scheme(net, ConnectionScheme::zeros(m), data.validation)},
                    {"proxy_accuracy_full_sa", evaluate_scheme(net, ConnectionScheme::ones(m), data.validation)}});
    return kExitOk;
}

int cmd_search(const CommandContext& ctx, const fs::path& checkpoint) {
    Timer timer(ctx, "search");
    const auto& c = ctx.config;
    Workspace w = open_workspace(ctx, checkpoint);
    const std::size_t m = w.evaluator->blocks();
    Controller controller(m, c.controller, stream_seed(c.seed, streams::kControllerInit));
    RNDPair rnd(m, c.rewards, stream_seed(c.seed, streams::kRndInit));
    auto sample_rng = make_stream(c.seed, streams::kControllerSample);
    const SearchResult res = ean_search(*w.evaluator, controller, rnd, c.rewards, c.search, sample_rng);

    const std::string digest = config_digest(c);
    std::ostringstream csv;
    csv << "# config_digest=" << digest << "\n";
    csv << "iteration,scheme,g_spa,g_val,g_rnd,G,p_bar\n";
    for (const auto& r : res.trace) {
        csv << r.iteration << ',' << r.scheme << ',' << num(r.g_spa) << ',' << num(r.g_val) << ',' << num(r.g_rnd)
            << ',' << num(r.reward) << ',' << num(r.p_bar) << '\n';
    }
    write_file(ctx.output_dir / "search_trace.csv", csv.str());

    json top = json::array();
    for (const auto& t : res.top) top.push_back(scheme_json(c, t.scheme, t.g_val));
    write_json(ctx.output_dir / "search_top.json",
               json{{"config_digest", digest}, {"iterations", res.trace.size()}, {"evaluations", res.evaluations},
                    {"top", top}});
    return kExitOk;
}

int cmd_enumerate(const CommandContext& ctx, const fs::path& checkpoint) {
    Timer timer(ctx, "enumerate");
    const auto& c = ctx.config;
    Workspace w = open_workspace(ctx, checkpoint);
    const std::size_t m = w.evaluator->blocks();
    if (m > 20) throw ValidationError("enumerate refuses m = " + std::to_string(m) + " (limit 20)");
    std::vector<double> acc(std::size_t{1} << m);
    parallel_for(acc.size(), ctx.workers,
                 [&](std::size_t i) { acc[i] = w.evaluator->accuracy(ConnectionScheme::from_index(i, m)); });
    const auto ranking = exhaustive_search(
        m, [&](const ConnectionScheme& a) { return exploit_score(c.rewards, a, acc[a.to_index()]); });

    std::ostringstream csv;
    csv << "# config_digest=" << config_digest(c) << "\n";
    csv << "rank,scheme,ones,accuracy,score\n";
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto& r = ranking[i];
        csv << i + 1 << ',' << r.scheme.to_string() << ',' << r.scheme.ones_count() << ','
            << num(acc[r.scheme.to_index()]) << ',' << num(r.score) << '\n';
    }
    write_file(ctx.output_dir / "enumerate.csv", csv.str());
    return kExitOk;
}

namespace {

json violin_json(const std::vector<ViolinStats>& v) {
    json arr = json::array();
    for (const auto& s : v) {
        arr.push_back({{"ratio", s.ratio}, {"count", s.count}, {"max", s.max}, {"mean", s.mean}, {"min", s.min}});
    }
    return arr;
}

struct StudySummary {
    std::vector<ViolinStats> accuracy, params, flops;
};

StudySummary summarize(const std::vector<double>& ratios, const std::vector<StudyRow>& rows) {
    std::vector<ViolinRow> acc, par, flo;
    for (const auto& r : rows) {
        acc.push_back({r.ratio, r.accuracy});
        par.push_back({r.ratio, static_cast<double>(r.extra_params)});
        flo.push_back({r.ratio, r.flop_increment_pct});
    }
    return {aggregate_violin(acc, ratios), aggregate_violin(par, ratios), aggregate_violin(flo, ratios)};
}

json summary_json(const std::string& digest, const StudySummary& s) {
    return json{{"config_digest", digest},
                {"accuracy", violin_json(s.accuracy)},
                {"extra_params", violin_json(s.params)},
                {"flop_increment_pct", violin_json(s.flops)}};
}

}  // namespace

int cmd_study(const CommandContext& ctx, const fs::path& checkpoint) {
    Timer timer(ctx, "study");
    const auto& c = ctx.config;
    Workspace w = open_workspace(ctx, checkpoint);
    auto rng = make_stream(c.seed, streams::kStudy);
    const auto rows = random_ratio_study(*w.evaluator, c.study.ratios, c.study.samples_per_ratio, rng, &c.backbone,
                                         ctx.workers);
    const std::string digest = config_digest(c);
    std::ostringstream csv;
    csv << "# config_digest=" << digest << "\n";
    csv << "scheme,ones,ratio,accuracy,extra_params,flop_increment_pct\n";
    for (const auto& r : rows) {
        csv << r.scheme.to_string() << ',' << r.ones << ',' << num(r.ratio) << ',' << num(r.accuracy) << ','
            << r.extra_params << ',' << num(r.flop_increment_pct) << '\n';
    }
    write_file(ctx.output_dir / "study.csv", csv.str());
    write_json(ctx.output_dir / "study_summary.json", summary_json(digest, summarize(c.study.ratios, rows)));
    return kExitOk;
}

int cmd_baseline(const CommandContext& ctx, const BaselineArgs& args, const fs::path& checkpoint) {
    if (args.kind != "hsp" && args.kind != "ga" && args.kind != "l1") {
        throw ValidationError("baseline kind must be hsp, ga or l1, got \"" + args.kind + "\"");
    }
    Timer timer(ctx, "baseline_" + args.kind);
    const auto& c = ctx.config;
    Workspace w = open_workspace(ctx, checkpoint);
    const std::size_t m = w.evaluator->blocks();
    ConnectionScheme a;
    json extra = json::object();
    try {
        if (args.kind == "hsp") {
            a = hsp_scheme(args.period, args.offset, m);
            extra = {{"period", args.period}, {"offset", args.offset}};
        } else if (args.kind == "ga") {
            auto rng = make_stream(c.seed, streams::kGa);
            const auto res = ga_search(
                m, [&](const ConnectionScheme& s) { return exploit_score(c.rewards, s, w.evaluator->accuracy(s)); },
                c.ga, rng, ctx.workers);
            a = res.best;
            extra = {{"evaluations", res.evaluations}, {"best_per_generation", res.best_per_generation}};
        } else {
            if (!w.net) throw ValidationError("l1 baseline needs the supernet evaluator");
            a = l1_prune_baseline(*w.net, args.keep_ratio);
            extra = {{"keep_ratio", args.keep_ratio}};
        }
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("baseline ") + args.kind + ": " + e.what());
    }
    json out = scheme_json(c, a, w.evaluator->accuracy(a));
    out["config_digest"] = config_digest(c);
    out["kind"] = args.kind;
    out["details"] = extra;
    write_json(ctx.output_dir / ("baseline_" + args.kind + ".json"), out);
    return kExitOk;
}

int cmd_verify_thm1(const CommandContext& ctx) {
    Timer timer(ctx, "verify_thm1");
    const auto& c = ctx.config;
    const auto& t = c.theory;
    const std::uint64_t seed = stream_seed(c.seed, streams::kTheory);
    auto run = [&](DofConvention conv) {
        const Thm1Report r = thm1_monte_carlo(t.d, t.epsilon, t.delta, t.trials, seed, conv, 0, t.probes, ctx.workers);
        return json{{"dof", thm1_dof(t.d, conv)},
                    {"m_min", r.m},
                    {"failures", r.failures},
                    {"failure_rate", r.failure_rate},
                    {"band", r.band},
                    {"zeroing_violations", r.zeroing_violations},
                    {"pass", r.pass}};
    };
    const json corrected = run(DofConvention::Corrected);
    const json literal = run(DofConvention::Literal);
    const bool pass = corrected["pass"].get<bool>();
    write_json(ctx.output_dir / "thm1.json", json{{"config_digest", config_digest(c)},
                                                  {"d", t.d},
                                                  {"epsilon", t.epsilon},
                                                  {"delta", t.delta},
                                                  {"trials", t.trials},
                                                  {"corrected", corrected},
                                                  {"literal", literal},
                                                  {"pass", pass}});
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_extend_demo(const CommandContext& ctx) {
    Timer timer(ctx, "extend_demo");
    const auto& c = ctx.config;
    auto rng = make_stream(c.seed, streams::kTheory);
    const std::size_t dim = static_cast<std::size_t>(c.theory.d);
    const ResNetChain g = make_random_chain(dim, {4, 6, 5}, 0.5, rng);
    const int extra = 3;
    const ResNetChain f = extend_network(g, extra);
    const Embedding e = embed_as_subnetwork(g, g.max_width() + 4, rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    double extend_diff = 0.0, grad_diff = 0.0, masked_diff = 0.0, unmasked_diff = 0.0;
    const std::size_t g_params = [&] {
        ResNetChain copy = g;
        return copy.parameter_pointers().size();
    }();
    for (int p = 0; p < 100; ++p) {
        std::vector<double> x(dim), coef(dim);
        for (auto& v : x) v = gauss(rng);
        for (auto& v : coef) v = gauss(rng);
        const auto gy = g.forward(x), fy = f.forward(x);
        const auto my = e.wide.forward_masked(x, e.mask), wy = e.wide.forward(x);
        for (std::size_t k = 0; k < dim; ++k) {
            extend_diff = std::max(extend_diff, std::abs(fy[k] - gy[k]));
            masked_diff = std::max(masked_diff, std::abs(my[k] - gy[k]));
            unmasked_diff = std::max(unmasked_diff, std::abs(wy[k] - gy[k]));
        }
        const auto gg = g.gradient(x, coef), fg = f.gradient(x, coef);
        for (std::size_t i = 0; i < g_params; ++i) grad_diff = std::max(grad_diff, std::abs(gg[i] - fg[i]));
    }
    const bool pass = extend_diff == 0.0 && grad_diff == 0.0 && masked_diff <= 1e-12 && unmasked_diff > 0.0;
    write_json(ctx.output_dir / "extend_demo.json",
               json{{"config_digest", config_digest(c)},
                    {"depth_before", g.depth()},
                    {"depth_after", f.depth()},
                    {"extend_max_abs_diff", extend_diff},
                    {"extend_max_grad_diff", grad_diff},
                    {"embed_width", e.wide.max_width()},
                    {"embed_masked_max_abs_diff", masked_diff},
                    {"embed_unmasked_max_abs_diff", unmasked_diff},
                    {"probes", 100},
                    {"pass", pass}});
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_report(const CommandContext& ctx, const fs::path& study_csv) {
    Timer timer(ctx, "report");
    const fs::path csv_path = study_csv.empty() ? ctx.output_dir / "study.csv" : study_csv;
    std::ifstream in(csv_path);
    if (!in) throw ValidationError("cannot open study rows " + csv_path.string());
    std::string line, digest;
    std::vector<StudyRow> rows;
    std::vector<double> ratios;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.rfind("# config_digest=", 0) == 0) {
            digest = line.substr(16);
            continue;
        }
        if (line.empty() || line.rfind("scheme,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string scheme, ones, ratio, acc, params, flop;
        if (!std::getline(ss, scheme, ',') || !std::getline(ss, ones, ',') || !std::getline(ss, ratio, ',') ||
            !std::getline(ss, acc, ',') || !std::getline(ss, params, ',') || !std::getline(ss, flop, ',')) {
            throw ValidationError(csv_path.string() + ":" + std::to_string(lineno) + ": expected 6 columns");
        }
        try {
            StudyRow r{ConnectionScheme::from_string(scheme), std::stoul(ones), std::stod(ratio), std::stod(acc),
                       std::stoul(params), std::stod(flop)};
            if (std::find(ratios.begin(), ratios.end(), r.ratio) == ratios.end()) ratios.push_back(r.ratio);
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw ValidationError(csv_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (digest.empty()) throw ValidationError(csv_path.string() + " carries no config digest");
    if (digest != config_digest(ctx.config)) {
        throw ValidationError(csv_path.string() + " was written under config digest " + digest +
                              ", not the one given (" + config_digest(ctx.config) + ")");
    }
    std::sort(ratios.begin(), ratios.end());
    const json recomputed = summary_json(digest, summarize(ratios, rows));

    bool matches = true;
    const fs::path summary_path = csv_path.parent_path() / "study_summary.json";
    bool compared = false;
    if (fs::exists(summary_path)) {
        std::ifstream sin(summary_path);
        const json stored = json::parse(sin);
        if (stored.value("config_digest", "") != digest) {
            throw ValidationError("digest mismatch between " + csv_path.string() + " and " + summary_path.string());
        }
        matches = stored == recomputed;
        compared = true;
    }
    json out = recomputed;
    out["compared_with_summary"] = compared;
    out["matches_summary"] = matches;
    write_json(ctx.output_dir / "report.json", out);
    return matches ? kExitOk : kExitCheckFailed;
}

}  // namespace ean
