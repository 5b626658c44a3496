#include "ean/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace ean {

using json = nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so unknown
// (usually misspelled) keys can be reported.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError("config section '" + label() + "' must be an object");
    }

    void get(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(key, "expected a number");
            out = v->get<double>();
        }
    }
    void get(const char* key, std::size_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void get(const char* key, std::uint64_t& out, int) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void get(const char* key, int& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_integer()) fail(key, "expected an integer");
            out = v->get<int>();
        }
    }
    void get(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            out = v->get<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(key, "expected a string");
            out = v->get<std::string>();
        }
    }
    const json* take(const char* key) {
        auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        used_.insert(key);
        return &*it;
    }
    std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    [[noreturn]] void fail(const char* key, const std::string& why) const {
        throw ValidationError("config key '" + child(key) + "': " + why);
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) throw ValidationError("unknown config key '" + child(it.key().c_str()) + "'");
        }
    }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

std::string sam_name(SamKind k) { return k == SamKind::SE ? "se" : "sge"; }
std::string sharing_name(Sharing s) { return s == Sharing::PerBlock ? "per-block" : "per-stage"; }
std::string evaluator_name(EvaluatorKind k) { return k == EvaluatorKind::Supernet ? "supernet" : "synthetic"; }

void read_backbone(Reader& parent, BackboneConfig& b) {
    const json* j = parent.take("backbone");
    if (!j) return;
    Reader r(*j, parent.child("backbone"));
    if (const json* st = r.take("stages")) {
        if (!st->is_array() || st->empty()) r.fail("stages", "expected a nonempty array");
        b.stages.clear();
        for (std::size_t i = 0; i < st->size(); ++i) {
            Reader s((*st)[i], r.child("stages") + "[" + std::to_string(i) + "]");
            StageSpec spec;
            s.get("blocks", spec.blocks);
            s.get("channels", spec.channels);
            s.finish();
            b.stages.push_back(spec);
        }
    }
    r.get("in_channels", b.in_channels);
    r.get("height", b.height);
    r.get("width", b.width);
    r.get("classes", b.classes);
    std::string sam = sam_name(b.sam), sharing = sharing_name(b.sharing);
    r.get("sam", sam);
    r.get("sharing", sharing);
    if (sam == "se") b.sam = SamKind::SE;
    else if (sam == "sge") b.sam = SamKind::SGE;
    else r.fail("sam", "expected \"se\" or \"sge\", got \"" + sam + "\"");
    if (sharing == "per-block") b.sharing = Sharing::PerBlock;
    else if (sharing == "per-stage") b.sharing = Sharing::PerStage;
    else r.fail("sharing", "expected \"per-block\" or \"per-stage\", got \"" + sharing + "\"");
    r.get("se_reduction", b.se_reduction);
    r.get("sge_groups", b.sge_groups);
    r.get("sge_epsilon", b.sge_epsilon);
    r.get("residual_init_scale", b.residual_init_scale);
    r.finish();
}

void read_dataset(Reader& parent, DatasetConfig& d) {
    const json* j = parent.take("dataset");
    if (!j) return;
    Reader r(*j, parent.child("dataset"));
    r.get("kind", d.kind);
    r.get("csv_path", d.csv_path);
    r.get("validation_fraction", d.validation_fraction);
    r.get("classes", d.blobs.classes);
    r.get("channels", d.blobs.channels);
    r.get("height", d.blobs.height);
    r.get("width", d.blobs.width);
    r.get("count", d.blobs.count);
    r.get("ring_radius", d.blobs.ring_radius);
    r.get("blob_sigma", d.blobs.blob_sigma);
    r.get("jitter", d.blobs.jitter);
    r.get("noise", d.blobs.noise);
    r.get("distractor_prob", d.blobs.distractor_prob);
    r.finish();
}

void read_pretrain(Reader& parent, PretrainOptions& p) {
    const json* j = parent.take("pretrain");
    if (!j) return;
    Reader r(*j, parent.child("pretrain"));
    r.get("beta", p.beta);
    r.get("steps", p.steps);
    r.get("batch_size", p.batch_size);
    r.get("learning_rate", p.optimizer.learning_rate);
    r.get("momentum", p.optimizer.momentum);
    r.get("weight_decay", p.optimizer.weight_decay);
    r.finish();
}

void read_search(Reader& parent, SearchBudget& s) {
    const json* j = parent.take("search");
    if (!j) return;
    Reader r(*j, parent.child("search"));
    r.get("iterations", s.iterations);
    r.get("max_evaluations", s.max_evaluations);
    r.get("wall_seconds", s.wall_seconds);
    r.finish();
}

void read_controller(Reader& parent, ControllerConfig& c) {
    const json* j = parent.take("controller");
    if (!j) return;
    Reader r(*j, parent.child("controller"));
    r.get("hidden", c.hidden);
    r.get("hidden_bias_std", c.hidden_bias_std);
    r.get("learning_rate", c.learning_rate);
    r.get("momentum", c.momentum);
    r.get("ppo_period", c.ppo_period);
    r.get("buffer_capacity", c.buffer_capacity);
    r.get("ppo_batch", c.ppo_batch);
    r.get("clip_ratio", c.clip_ratio);
    r.get("ratio_min", c.ratio_min);
    r.get("ratio_max", c.ratio_max);
    r.get("prob_floor", c.prob_floor);
    r.finish();
}

void read_rewards(Reader& parent, RewardConfig& c) {
    const json* j = parent.take("rewards");
    if (!j) return;
    Reader r(*j, parent.child("rewards"));
    r.get("lambda1", c.lambda1);
    r.get("lambda2", c.lambda2);
    r.get("lambda3", c.lambda3);
    r.get("rnd_learning_rate", c.rnd_learning_rate);
    r.get("rnd_target_hidden", c.rnd_target_hidden);
    r.get("rnd_predictor_hidden", c.rnd_predictor_hidden);
    r.get("rnd_output", c.rnd_output);
    r.get("rnd_target_scale", c.rnd_target_scale);
    r.get("normalize_rnd", c.normalize_rnd);
    r.finish();
}

void read_study(Reader& parent, StudyConfig& s) {
    const json* j = parent.take("study");
    if (!j) return;
    Reader r(*j, parent.child("study"));
    if (const json* ratios = r.take("ratios")) {
        if (!ratios->is_array() || ratios->empty()) r.fail("ratios", "expected a nonempty array of numbers");
        s.ratios.clear();
        for (const auto& v : *ratios) {
            if (!v.is_number()) r.fail("ratios", "expected numbers");
            s.ratios.push_back(v.get<double>());
        }
    }
    r.get("samples_per_ratio", s.samples_per_ratio);
    r.finish();
}

void read_ga(Reader& parent, GaOptions& g) {
    const json* j = parent.take("ga");
    if (!j) return;
    Reader r(*j, parent.child("ga"));
    r.get("population", g.population);
    r.get("generations", g.generations);
    r.get("tournament", g.tournament);
    r.get("crossover", g.crossover);
    r.get("mutation", g.mutation);
    r.get("elitism", g.elitism);
    r.finish();
}

void read_theory(Reader& parent, TheoryConfig& t) {
    const json* j = parent.take("theory");
    if (!j) return;
    Reader r(*j, parent.child("theory"));
    r.get("d", t.d);
    r.get("epsilon", t.epsilon);
    r.get("delta", t.delta);
    r.get("trials", t.trials);
    r.get("probes", t.probes);
    r.finish();
}

json to_json(const ExperimentConfig& c) {
    json stages = json::array();
    for (const auto& s : c.backbone.stages) stages.push_back({{"blocks", s.blocks}, {"channels", s.channels}});
    const auto& b = c.backbone;
    const auto& d = c.dataset;
    return json{
        {"seed", c.seed},
        {"backbone",
         {{"stages", stages},
          {"in_channels", b.in_channels},
          {"height", b.height},
          {"width", b.width},
          {"classes", b.classes},
          {"sam", sam_name(b.sam)},
          {"sharing", sharing_name(b.sharing)},
          {"se_reduction", b.se_reduction},
          {"sge_groups", b.sge_groups},
          {"sge_epsilon", b.sge_epsilon},
          {"residual_init_scale", b.residual_init_scale}}},
        {"dataset",
         {{"kind", d.kind},
          {"csv_path", d.csv_path},
          {"validation_fraction", d.validation_fraction},
          {"classes", d.blobs.classes},
          {"channels", d.blobs.channels},
          {"height", d.blobs.height},
          {"width", d.blobs.width},
          {"count", d.blobs.count},
          {"ring_radius", d.blobs.ring_radius},
          {"blob_sigma", d.blobs.blob_sigma},
          {"jitter", d.blobs.jitter},
          {"noise", d.blobs.noise},
          {"distractor_prob", d.blobs.distractor_prob}}},
        {"pretrain",
         {{"beta", c.pretrain.beta},
          {"steps", c.pretrain.steps},
          {"batch_size", c.pretrain.batch_size},
          {"learning_rate", c.pretrain.optimizer.learning_rate},
          {"momentum", c.pretrain.optimizer.momentum},
          {"weight_decay", c.pretrain.optimizer.weight_decay}}},
        {"evaluator", evaluator_name(c.evaluator)},
        {"search",
         {{"iterations", c.search.iterations},
          {"max_evaluations", c.search.max_evaluations},
          {"wall_seconds", c.search.wall_seconds}}},
        {"controller",
         {{"hidden", c.controller.hidden},
          {"hidden_bias_std", c.controller.hidden_bias_std},
          {"learning_rate", c.controller.learning_rate},
          {"momentum", c.controller.momentum},
          {"ppo_period", c.controller.ppo_period},
          {"buffer_capacity", c.controller.buffer_capacity},
          {"ppo_batch", c.controller.ppo_batch},
          {"clip_ratio", c.controller.clip_ratio},
          {"ratio_min", c.controller.ratio_min},
          {"ratio_max", c.controller.ratio_max},
          {"prob_floor", c.controller.prob_floor}}},
        {"rewards",
         {{"lambda1", c.rewards.lambda1},
          {"lambda2", c.rewards.lambda2},
          {"lambda3", c.rewards.lambda3},
          {"rnd_learning_rate", c.rewards.rnd_learning_rate},
          {"rnd_target_hidden", c.rewards.rnd_target_hidden},
          {"rnd_predictor_hidden", c.rewards.rnd_predictor_hidden},
          {"rnd_output", c.rewards.rnd_output},
          {"rnd_target_scale", c.rewards.rnd_target_scale},
          {"normalize_rnd", c.rewards.normalize_rnd}}},
        {"study", {{"ratios", c.study.ratios}, {"samples_per_ratio", c.study.samples_per_ratio}}},
        {"ga",
         {{"population", c.ga.population},
          {"generations", c.ga.generations},
          {"tournament", c.ga.tournament},
          {"crossover", c.ga.crossover},
          {"mutation", c.ga.mutation},
          {"elitism", c.ga.elitism}}},
        {"theory",
         {{"d", c.theory.d},
          {"epsilon", c.theory.epsilon},
          {"delta", c.theory.delta},
          {"trials", c.theory.trials},
          {"probes", c.theory.probes}}},
    };
}

template <class F>
void wrap(const char* section, F&& check) {
    try {
        check();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string(section) + ": " + e.what());
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    wrap("backbone", [&] { backbone.validate(); });
    wrap("dataset", [&] {
        if (dataset.kind != "blobs" && dataset.kind != "csv") {
            throw std::invalid_argument("kind must be \"blobs\" or \"csv\", got \"" + dataset.kind + "\"");
        }
        if (dataset.kind == "csv" && dataset.csv_path.empty()) throw std::invalid_argument("csv_path is required for kind csv");
        if (!(dataset.validation_fraction > 0.0 && dataset.validation_fraction < 1.0)) {
            throw std::invalid_argument("validation_fraction must lie in (0,1)");
        }
        const auto& s = dataset.blobs;
        if (s.classes != backbone.classes) throw std::invalid_argument("classes must match backbone.classes");
        if (s.channels != backbone.in_channels || s.height != backbone.height || s.width != backbone.width) {
            throw std::invalid_argument("image shape must match the backbone input shape");
        }
        if (s.count < 4) throw std::invalid_argument("count must be >= 4");
    });
    wrap("pretrain", [&] {
        if (!(pretrain.beta >= 0.0 && pretrain.beta <= 1.0)) throw std::invalid_argument("beta must lie in [0,1]");
        if (pretrain.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
        pretrain.optimizer.validate();
    });
    wrap("search", [&] { search.validate(); });
    wrap("controller", [&] { controller.validate(); });
    wrap("rewards", [&] { rewards.validate(); });
    wrap("study", [&] {
        for (double r : study.ratios) {
            if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("ratios must lie in [0,1]");
        }
        if (study.samples_per_ratio == 0) throw std::invalid_argument("samples_per_ratio must be >= 1");
    });
    wrap("ga", [&] { ga.validate(); });
    wrap("theory", [&] {
        if (theory.d < 2) throw std::invalid_argument("d must be >= 2");
        if (!(theory.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
        if (!(theory.delta > 0.0 && theory.delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
        if (theory.trials < 100) throw std::invalid_argument("trials must be >= 100");
        if (theory.probes == 0) throw std::invalid_argument("probes must be >= 1");
    });
    if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    Reader r(j, "");
    r.get("seed", c.seed, 0);
    read_backbone(r, c.backbone);
    read_dataset(r, c.dataset);
    read_pretrain(r, c.pretrain);
    std::string evaluator = evaluator_name(c.evaluator);
    r.get("evaluator", evaluator);
    if (evaluator == "supernet") c.evaluator = EvaluatorKind::Supernet;
    else if (evaluator == "synthetic") c.evaluator = EvaluatorKind::Synthetic;
    else r.fail("evaluator", "expected \"supernet\" or \"synthetic\", got \"" + evaluator + "\"");
    read_search(r, c.search);
    read_controller(r, c.controller);
    read_rewards(r, c.rewards);
    read_study(r, c.study);
    read_ga(r, c.ga);
    read_theory(r, c.theory);
    r.get("output_dir", c.output_dir);
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_seed_override(ExperimentConfig& config) {
    const char* env = std::getenv("EAN_SEED");
    if (!env || !*env) return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-') throw ValidationError(std::string("EAN_SEED is not a valid seed: ") + env);
    config.seed = v;
}

std::string canonical_json(const ExperimentConfig& config) { return to_json(config).dump(); }

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string config_digest(const ExperimentConfig& config) { return sha256_hex(canonical_json(config)); }

std::string model_digest(const ExperimentConfig& config) {
    const json full = to_json(config);
    const json part{{"seed", full["seed"]},
                    {"backbone", full["backbone"]},
                    {"dataset", full["dataset"]},
                    {"pretrain", full["pretrain"]}};
    return sha256_hex(part.dump());
}

}  // namespace ean
