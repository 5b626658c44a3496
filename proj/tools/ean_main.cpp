#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ean/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Connection search for attention modules in residual networks"};
    app.require_subcommand(1);

    std::string config_path, output;
    std::size_t workers = 1;
    app.add_option("-c,--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("-o,--output", output, "Output directory (overrides output_dir)");
    app.add_option("--workers", workers, "Worker threads for parallel evaluation")->check(CLI::PositiveNumber);

    std::string checkpoint, study_csv;
    ean::BaselineArgs baseline;

    auto* pretrain = app.add_subcommand("pretrain", "Pre-train the supernet and write a checkpoint");
    auto* search = app.add_subcommand("search", "Policy-gradient connection search");
    auto* enumerate = app.add_subcommand("enumerate", "Score and rank every connection scheme");
    auto* study = app.add_subcommand("study", "Connection-ratio study");
    auto* base = app.add_subcommand("baseline", "Comparison searchers: hsp, ga or l1");
    auto* thm1 = app.add_subcommand("verify-thm1", "Monte-Carlo check of the width bound");
    auto* extend = app.add_subcommand("extend-demo", "Function-preserving extension and embedding");
    auto* report = app.add_subcommand("report", "Recompute per-ratio statistics from study rows");

    for (auto* sub : {search, enumerate, study, base}) {
        sub->add_option("--checkpoint", checkpoint, "Supernet checkpoint (default <output>/supernet.ckpt)");
    }
    base->add_option("kind", baseline.kind, "hsp, ga or l1")->required()->check(CLI::IsMember({"hsp", "ga", "l1"}));
    base->add_option("--period", baseline.period, "HSP: connect every N blocks");
    base->add_option("--offset", baseline.offset, "HSP: first connected block");
    base->add_option("--keep-ratio", baseline.keep_ratio, "l1: fraction of connections kept");
    report->add_option("--study", study_csv, "study.csv to summarise (default <output>/study.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ean::kExitOk : ean::kExitValidation;
    }

    try {
        const ean::CommandContext ctx = ean::make_context(config_path, output, workers);
        if (pretrain->parsed()) return ean::cmd_pretrain(ctx);
        if (search->parsed()) return ean::cmd_search(ctx, checkpoint);
        if (enumerate->parsed()) return ean::cmd_enumerate(ctx, checkpoint);
        if (study->parsed()) return ean::cmd_study(ctx, checkpoint);
        if (base->parsed()) return ean::cmd_baseline(ctx, baseline, checkpoint);
        if (thm1->parsed()) return ean::cmd_verify_thm1(ctx);
        if (extend->parsed()) return ean::cmd_extend_demo(ctx);
        if (report->parsed()) return ean::cmd_report(ctx, study_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ean::kExitValidation;
    }
    return ean::kExitValidation;
}
