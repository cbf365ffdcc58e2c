// hydromap: surface-water mapping and change detection on synthetic Landsat
// stacks. Subcommands run one pipeline stage each over the artifact tree
// rooted at the config's out_dir; `pipeline` chains them all.

#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hydro/pipeline.hpp"

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;      // overrides config out_dir
    std::string pairs_path;   // eval input override
    std::string report_path;  // eval output override
    long long seed = -1;
    int threads = -1;
    int region_holdout = std::numeric_limits<int>::min();
    int map_region = -1;
};

void print_error(const char* kind, const std::string& message) {
    nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}}}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

int run_stage(const std::string& name, const Options& opt) {
    hydro::PipelineConfig cfg = hydro::load_config(opt.config_path);
    if (opt.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.threads > 0) cfg.threads = opt.threads;
    if (opt.region_holdout != std::numeric_limits<int>::min())
        cfg.region_holdout = opt.region_holdout;
    if (opt.map_region >= 0) cfg.map_region = opt.map_region;
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    cfg.validate();
    const hydro::Layout lay{cfg.out_dir};

    if (name == "synth") hydro::stage_synth(cfg, lay);
    else if (name == "mndwi") hydro::stage_mndwi(cfg, lay);
    else if (name == "mask") hydro::stage_mask(cfg, lay);
    else if (name == "segment") hydro::stage_segment(cfg, lay);
    else if (name == "label") hydro::stage_label(cfg, lay);
    else if (name == "train") hydro::stage_train(cfg, lay);
    else if (name == "infer") hydro::stage_infer(cfg, lay);
    else if (name == "map") hydro::stage_map(cfg, lay);
    else if (name == "change") hydro::stage_change(cfg, lay);
    else if (name == "render") hydro::stage_render(cfg, lay);
    else if (name == "pipeline") hydro::run_pipeline(cfg, lay);
    else if (name == "eval") {
        const auto pairs = opt.pairs_path.empty()
                               ? lay.reports_dir() / "change_pairs.jsonl"
                               : hydro::fs::path(opt.pairs_path);
        const auto report = opt.report_path.empty()
                                ? lay.reports_dir() / "eval_change.json"
                                : hydro::fs::path(opt.report_path);
        const hydro::FoldMetrics fm = hydro::stage_eval(cfg, lay, pairs, report);
        std::printf("overall accuracy %.4f over %s\n", fm.overall, pairs.string().c_str());
    } else {
        throw hydro::config_error("unknown subcommand " + name);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"surface-water mapping and change detection pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("hydromap ") + hydro::kVersion);

    Options opt;
    const char* stages[] = {"synth",  "mndwi", "mask", "segment", "label",    "train",
                            "infer",  "map",   "change", "eval",  "render",   "pipeline"};
    const char* descs[] = {
        "generate synthetic scene stacks and ground truth",
        "compute the water index for every scene",
        "threshold the water index into water masks",
        "fit piecewise harmonic models per pixel",
        "derive water-frequency labels per segment",
        "cross-validate and fit the water-frequency models",
        "predict water frequency per pixel",
        "render the four-class water map",
        "extract and classify breakpoint changes",
        "score a prediction/truth pairs file",
        "render the change map",
        "run every stage in order"};
    for (std::size_t i = 0; i < std::size(stages); ++i) {
        CLI::App* sub = app.add_subcommand(stages[i], descs[i]);
        sub->add_option("--config", opt.config_path, "pipeline config JSON")->required();
        sub->add_option("--seed", opt.seed, "override config seed");
        sub->add_option("--threads", opt.threads, "worker thread count");
        sub->add_option("--region-holdout", opt.region_holdout,
                        "region id excluded from final model fits");
        sub->add_option("--out", opt.out_dir, "override config out_dir");
        const std::string name = stages[i];
        if (name == "map" || name == "render" || name == "infer")
            sub->add_option("--region", opt.map_region, "scenario index to render");
        if (name == "eval") {
            sub->add_option("--pairs", opt.pairs_path, "prediction/truth pairs JSONL");
            sub->add_option("--report", opt.report_path, "report output path");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        print_error("usage", e.what());
        return 2;
    }

    try {
        return run_stage(app.get_subcommands().front()->get_name(), opt);
    } catch (const hydro::config_error& e) {
        print_error("config", e.what());
        return 2;
    } catch (const hydro::data_error& e) {  // also format/io subclasses
        print_error("data", e.what());
        return 3;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 4;
    }
}
