#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ean/controller.hpp"
#include "ean/dataset.hpp"
#include "ean/rewards.hpp"
#include "ean/search.hpp"
#include "ean/supernet.hpp"
#include "ean/theory.hpp"

namespace ean {

/// Raised for malformed or inconsistent configuration and for digest
/// mismatches between files; maps to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class EvaluatorKind { Supernet, Synthetic };

struct DatasetConfig {
    std::string kind = "blobs";  // "blobs" or "csv"
    BlobSpec blobs{4, 1, 8, 8, 1500};
    std::string csv_path;
    double validation_fraction = 1.0 / 3.0;
};

struct StudyConfig {
    std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0};
    std::size_t samples_per_ratio = 100;
};

struct TheoryConfig {
    int d = 8;
    double epsilon = 0.5;
    double delta = 0.1;
    std::size_t trials = 2000;
    std::size_t probes = 16;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    BackboneConfig backbone;
    DatasetConfig dataset;
    PretrainOptions pretrain{0.5, 1500, 16, {0.02, 0.9, 1e-4}};
    EvaluatorKind evaluator = EvaluatorKind::Supernet;
    SearchBudget search;
    ControllerConfig controller;
    RewardConfig rewards;
    StudyConfig study;
    GaOptions ga;
    TheoryConfig theory;
    std::string output_dir = "out";

    /// Checks every field; throws ValidationError naming the offending key.
    void validate() const;
};

/// Missing keys take defaults; unknown keys are rejected.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Applies EAN_SEED from the environment when set.
void apply_seed_override(ExperimentConfig& config);

/// Canonical JSON of the fully-resolved config (output_dir excluded).
std::string canonical_json(const ExperimentConfig& config);
/// SHA-256 (hex) of canonical_json.
std::string config_digest(const ExperimentConfig& config);
/// SHA-256 over seed, backbone, dataset and pre-training only: identifies
/// the weights a checkpoint holds.
std::string model_digest(const ExperimentConfig& config);

std::string sha256_hex(const std::string& bytes);

}  // namespace ean
