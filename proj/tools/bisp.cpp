// bisp command-line entry point.
//
//   bisp synth  --config <file> [--set key=value ...] [--describe <dir>]
//   bisp train  --config <file> [--set ...]
//   bisp eval   --config <file> [--set ...]
//   bisp ablate --config <file> [--set ...]
//   bisp viz scores --dump <scores.csv> [--out <dir>]
//   bisp viz errors --config <file> --video <id> --frame <n> [--out <dir>]
//   bisp viz roc --dump <a.csv> [--dump <b.csv> ...] [--name <label> ...] [--out <dir>]
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime failure.
// BISP_OUTPUT_ROOT, when set, prefixes relative output directories.

#include "bisp/checkpoint.hpp"
#include "bisp/config.hpp"
#include "bisp/errors.hpp"
#include "bisp/logging.hpp"
#include "bisp/synth.hpp"
#include "bisp/train_eval.hpp"
#include "bisp/viz.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace bisp;

namespace {

struct CommonArgs {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config, "experiment config (JSON)");
    cmd->add_option("-s,--set", args.overrides, "override a config key, e.g. --set train.epochs=2");
}

fs::path with_output_root(const fs::path& p) {
    const char* root = std::getenv("BISP_OUTPUT_ROOT");
    if (root && *root && p.is_relative()) return fs::path(root) / p;
    return p;
}

ExperimentConfig resolve(const CommonArgs& args) {
    auto cfg = load_config(args.config, args.overrides);
    cfg.output_dir = with_output_root(cfg.output_dir);
    if (!cfg.checkpoint.empty()) cfg.checkpoint = with_output_root(cfg.checkpoint);
    return cfg;
}

void save_resolved_config(const ExperimentConfig& cfg, const char* name) {
    fs::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir / name, std::ios::trunc) << nlohmann::json(cfg).dump(2) << '\n';
}

int run_synth(const CommonArgs& args, const std::string& describe_dir) {
    if (!describe_dir.empty()) {
        std::cout << synth::describe(describe_dir).to_text();
        return 0;
    }
    auto cfg = resolve(args);
    if (cfg.data.root.empty()) throw ConfigError("data.root must name the directory to generate into");
    log::info("generating synthetic dataset in ", cfg.data.root.string());
    synth::generate(cfg.synth, cfg.data.root);
    std::cout << synth::describe(cfg.data.root).to_text();
    return 0;
}

int run_train(const CommonArgs& args) {
    auto cfg = resolve(args);
    save_resolved_config(cfg, "train_config.json");
    auto result = train(cfg);
    std::cout << "checkpoint " << result.checkpoint.string() << " after " << result.steps << " steps\n";
    if (!result.epochs.empty()) std::cout << "final epoch mean loss " << result.epochs.back().total << '\n';
    return 0;
}

int run_eval(const CommonArgs& args) {
    auto cfg = resolve(args);
    auto result = evaluate(cfg);
    const auto dir = cfg.output_dir / "eval";
    const auto ck = load_checkpoint(cfg.checkpoint_path());
    write_eval_outputs(dir, result, ck.model->variant().name());
    viz::write_score_curves(result.series, dir / "curves");
    if (result.roc) {
        std::cout << "frame-level AUC " << result.roc->auc << '\n';
    } else {
        std::cout << "frame-level AUC unavailable (missing labels)\n";
    }
    std::cout << "outputs in " << dir.string() << '\n';
    return 0;
}

int run_ablate(const CommonArgs& args) {
    auto cfg = resolve(args);
    if (cfg.data.root.empty()) throw ConfigError("data.root is not set");
    save_resolved_config(cfg, "ablation_config.json");
    auto train_clips = load_dataset(cfg.data.root, Split::Train, {cfg.data.resolution});
    auto test_clips = load_dataset(cfg.data.root, Split::Test, {cfg.data.resolution});
    const auto names = cfg.ablation.variants.empty() ? default_ablation_grid() : cfg.ablation.variants;
    auto cells = run_ablation_grid(cfg, names, train_clips, test_clips);
    const auto table = format_ablation_table(cells);
    std::cout << table;
    fs::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir / "ablation.txt", std::ios::trunc) << table;
    std::ofstream csv(cfg.output_dir / "ablation.csv", std::ios::trunc);
    csv << "name,strategy,skip_frames,varca,consa,w_f,auc,error\n";
    for (const auto& c : cells) {
        csv << c.name << ',' << to_string(c.variant.strategy) << ',' << c.variant.skip_frames << ','
            << c.variant.varca << ',' << c.variant.consa << ',' << c.w_f << ',';
        if (c.auc) csv << *c.auc;
        csv << ',' << c.error << '\n';
    }
    return 0;
}

int run_viz_scores(const std::string& dump, const std::string& out) {
    auto series = read_score_dump(dump);
    auto outputs = viz::write_score_curves(series, with_output_root(out));
    std::cout << "wrote " << outputs.images.size() << " score curves and " << outputs.table.string() << '\n';
    return 0;
}

int run_viz_errors(const CommonArgs& args, const std::string& video, std::size_t frame, const std::string& out) {
    auto cfg = resolve(args);
    auto ck = load_checkpoint(cfg.checkpoint_path());
    auto clips = load_dataset(cfg.data.root, Split::Test, {static_cast<int>(ck.model->resolution())});
    const auto it = std::find_if(clips.begin(), clips.end(), [&](const FrameClip& c) { return c.video_id == video; });
    if (it == clips.end()) throw DataError("test video '" + video + "' not found");
    const auto windows = make_test_windows(*it);
    if (frame < kTestWindowLength / 2 || frame - kTestWindowLength / 2 >= windows.size()) {
        throw DataError("frame " + std::to_string(frame) + " has no full 7-frame window");
    }
    const auto pred = predict_window(ck.model, windows[frame - kTestWindowLength / 2], cfg.scoring);
    const double peak = *std::max_element(pred.fused_error.values.begin(), pred.fused_error.values.end());
    const auto dir = with_output_root(out);
    const auto stem = "errors_" + video + "_" + std::to_string(frame);
    viz::write_image(viz::render_error_triptych(pred.truth, pred.prediction, pred.fused_error, peak),
                     dir / (stem + ".png"));
    viz::write_error_table(pred.fused_error, dir / (stem + ".csv"));
    std::cout << "psnr " << pred.psnr << ", peak error " << peak << ", wrote " << (dir / (stem + ".png")).string()
              << '\n';
    return 0;
}

int run_viz_roc(const std::vector<std::string>& dumps, std::vector<std::string> names, const std::string& out) {
    std::vector<viz::RocCurve> curves;
    for (std::size_t i = 0; i < dumps.size(); ++i) {
        const std::string name = i < names.size() ? names[i] : fs::path(dumps[i]).parent_path().filename().string();
        auto series = read_score_dump(dumps[i]);
        const bool labelled =
            std::all_of(series.begin(), series.end(), [](const ScoreSeries& s) { return s.labels.has_value(); });
        if (!labelled) {
            log::warn(dumps[i], " has unlabelled videos; excluded");
            continue;
        }
        curves.push_back({name.empty() ? "run" + std::to_string(i) : name, compute_auc(series)});
    }
    if (curves.empty()) throw DataError("no labelled score dumps to plot");
    const auto dir = with_output_root(out);
    viz::write_image(viz::render_roc(curves), dir / "roc.png");
    for (const auto& c : curves) {
        write_roc_table(dir / ("roc_" + c.name + ".csv"), c.roc);
        std::cout << c.name << " AUC " << c.roc.auc << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bidirectional skip-frame prediction for video anomaly detection"};
    app.require_subcommand(1, 1);

    CommonArgs common;
    std::string describe_dir;
    auto* synth_cmd = app.add_subcommand("synth", "generate (or --describe) a synthetic dataset");
    add_common(synth_cmd, common);
    synth_cmd->add_option("--describe", describe_dir, "summarize an existing dataset directory instead");

    auto* train_cmd = app.add_subcommand("train", "train a model");
    add_common(train_cmd, common);
    auto* eval_cmd = app.add_subcommand("eval", "score the test split and report frame-level AUC");
    add_common(eval_cmd, common);
    auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate the ablation grid");
    add_common(ablate_cmd, common);

    auto* viz_cmd = app.add_subcommand("viz", "render figures from run outputs");
    viz_cmd->require_subcommand(1, 1);
    std::string dump, out = "viz";
    std::vector<std::string> dumps, names;
    std::string video;
    std::size_t frame = 0;
    auto* viz_scores = viz_cmd->add_subcommand("scores", "anomaly score curves from a score dump");
    viz_scores->add_option("--dump", dump, "scores.csv from eval")->required();
    viz_scores->add_option("--out", out, "output directory");
    auto* viz_errors = viz_cmd->add_subcommand("errors", "truth / prediction / error triptych");
    add_common(viz_errors, common);
    viz_errors->add_option("--video", video, "test video id")->required();
    viz_errors->add_option("--frame", frame, "target frame index")->required();
    viz_errors->add_option("--out", out, "output directory");
    auto* viz_roc = viz_cmd->add_subcommand("roc", "overlaid ROC curves");
    viz_roc->add_option("--dump", dumps, "score dumps, one per variant")->required();
    viz_roc->add_option("--name", names, "legend names, in dump order");
    viz_roc->add_option("--out", out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Usage);
    }

    try {
        if (*synth_cmd) return run_synth(common, describe_dir);
        if (*train_cmd) return run_train(common);
        if (*eval_cmd) return run_eval(common);
        if (*ablate_cmd) return run_ablate(common);
        if (*viz_scores) return run_viz_scores(dump, out);
        if (*viz_errors) return run_viz_errors(common, video, frame, out);
        if (*viz_roc) return run_viz_roc(dumps, names, out);
    } catch (const bisp::Error& e) {
        std::cerr << "bisp: " << e.what() << '\n';
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "bisp: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Runtime);
    }
    return static_cast<int>(ExitCode::Usage);
}
