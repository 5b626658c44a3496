#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "ean/config.hpp"

namespace ean {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitCheckFailed = 2;

struct CommandContext {
    ExperimentConfig config;
    std::filesystem::path output_dir;
    std::size_t workers = 1;
};

/// Loads the config file, applies EAN_SEED, resolves the output directory
/// (an explicit override wins over config.output_dir).
CommandContext make_context(const std::filesystem::path& config_path, const std::string& output_override,
                            std::size_t workers);

/// Writes supernet.ckpt and pretrain.json.
int cmd_pretrain(const CommandContext& ctx);

/// Writes search_trace.csv and search_top.json. `checkpoint` defaults to
/// <output>/supernet.ckpt and is only read with the supernet evaluator.
int cmd_search(const CommandContext& ctx, const std::filesystem::path& checkpoint = {});

/// Every scheme ranked by lambda1 * g_spa + lambda2 * g_val (enumerate.csv).
int cmd_enumerate(const CommandContext& ctx, const std::filesystem::path& checkpoint = {});

/// Connection-ratio study: study.csv and study_summary.json.
int cmd_study(const CommandContext& ctx, const std::filesystem::path& checkpoint = {});

struct BaselineArgs {
    std::string kind;  // hsp, ga or l1
    std::size_t period = 2;
    std::size_t offset = 0;
    double keep_ratio = 0.5;
};

/// Writes baseline_<kind>.json.
int cmd_baseline(const CommandContext& ctx, const BaselineArgs& args, const std::filesystem::path& checkpoint = {});

/// Width-bound Monte-Carlo under both degree-of-freedom conventions
/// (thm1.json). Exit 2 when the corrected convention misses its band.
int cmd_verify_thm1(const CommandContext& ctx);

/// Extension and embedding constructions on random chains
/// (extend_demo.json). Exit 2 when an output is not preserved.
int cmd_extend_demo(const CommandContext& ctx);

/// Recomputes per-ratio triples from study.csv and checks them against
/// study_summary.json when present (report.json). Exit 2 on mismatch.
int cmd_report(const CommandContext& ctx, const std::filesystem::path& study_csv = {});

}  // namespace ean
