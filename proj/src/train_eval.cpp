#include "bisp/train_eval.hpp"

#include "bisp/checkpoint.hpp"
#include "bisp/errors.hpp"
#include "bisp/logging.hpp"
#include "bisp/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace bisp {

double cosine_lr(double base, int64_t step, int64_t total_steps) {
    if (total_steps <= 0) return base;
    const double t = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

struct SampleRef {
    const SkipFrameSample* sample;
};

torch::Tensor stack_inputs(const std::vector<const SkipFrameSample*>& batch, bool forward) {
    std::vector<torch::Tensor> items;
    items.reserve(batch.size());
    for (const auto* s : batch) items.push_back(stack_triple(forward ? s->forward_inputs : s->backward_inputs));
    return torch::stack(items);
}

torch::Tensor stack_targets(const std::vector<const SkipFrameSample*>& batch, bool forward) {
    std::vector<torch::Tensor> items;
    items.reserve(batch.size());
    for (const auto* s : batch) items.push_back(forward ? s->forward_target : s->backward_target);
    return torch::stack(items);
}

// Fisher-Yates with explicit arithmetic so the order depends only on the seed.
void seeded_shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
}

class MetricsLog {
public:
    explicit MetricsLog(const fs::path& dir) {
        if (dir.empty()) return;
        fs::create_directories(dir);
        out_.open(dir / "metrics.jsonl", std::ios::app);
    }
    void write(const json& record) {
        if (out_) out_ << record.dump() << '\n' << std::flush;
    }

private:
    std::ofstream out_;
};

void dump_nonfinite_batch(const fs::path& dir, const torch::Tensor& fwd, const torch::Tensor& bwd,
                          const std::vector<const SkipFrameSample*>& batch) {
    if (dir.empty()) return;
    fs::create_directories(dir);
    std::vector<torch::Tensor> tensors;
    if (fwd.defined()) tensors.push_back(fwd);
    if (bwd.defined()) tensors.push_back(bwd);
    torch::save(tensors, (dir / "nonfinite_batch.pt").string());
    std::ofstream meta(dir / "nonfinite_batch.txt");
    for (const auto* s : batch) meta << "window_start " << s->window_start << '\n';
}

} // namespace

TrainResult train_on_clips(const std::vector<FrameClip>& clips, const VariantSpec& variant, int64_t resolution,
                           const TrainConfig& cfg, const TrainOptions& options) {
    cfg.validate();
    std::vector<SkipFrameSample> samples;
    for (const auto& clip : clips) {
        auto s = make_training_samples(clip, variant.sampling());
        samples.insert(samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    if (samples.empty()) throw DataError("training set is empty: no clip yields a full training window");

    torch::manual_seed(cfg.seed);
    TrainResult result;
    result.model = options.initial ? options.initial : build_variant(variant, resolution);
    auto& model = result.model;
    model->train();

    torch::optim::Adam optimizer(
        model->parameters(),
        torch::optim::AdamOptions(cfg.learning_rate).betas({0.9, 0.999}).eps(1e-8));

    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    const int64_t steps_per_epoch = static_cast<int64_t>((samples.size() + batch_size - 1) / batch_size);
    const int64_t total_steps = cfg.max_steps > 0 ? cfg.max_steps : steps_per_epoch * cfg.epochs;
    const int epochs = static_cast<int>((total_steps + steps_per_epoch - 1) / steps_per_epoch);

    MetricsLog metrics(options.output_dir);
    metrics.write({{"event", "start"},
                   {"variant", variant.name()},
                   {"samples", samples.size()},
                   {"total_steps", total_steps},
                   {"seed", cfg.seed}});
    log::info("training ", variant.name(), " on ", samples.size(), " samples, ", total_steps, " steps");

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(samples.size());
    int64_t step = 0;
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < epochs && step < total_steps; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        seeded_shuffle(order, rng);
        EpochRecord er;
        er.epoch = epoch;

        for (std::size_t begin = 0; begin < order.size() && step < total_steps; begin += batch_size) {
            std::vector<const SkipFrameSample*> batch;
            for (std::size_t k = begin; k < std::min(order.size(), begin + batch_size); ++k) {
                batch.push_back(&samples[order[k]]);
            }
            const double lr = cosine_lr(cfg.learning_rate, step, total_steps);
            for (auto& group : optimizer.param_groups()) {
                static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
            }

            torch::Tensor fwd_in, bwd_in;
            PredictionTargets targets;
            if (variant.has_forward()) {
                fwd_in = stack_inputs(batch, true);
                targets.forward = stack_targets(batch, true);
            }
            if (variant.has_backward()) {
                bwd_in = stack_inputs(batch, false);
                targets.backward = stack_targets(batch, false);
            }

            optimizer.zero_grad();
            LossBundle loss;
            try {
                loss = total_loss(model->predict_pair(fwd_in, bwd_in), targets);
            } catch (const ShapeError& e) {
                // Attention blocks reject non-finite activations before the loss sees them.
                dump_nonfinite_batch(options.output_dir, fwd_in, bwd_in, batch);
                throw Error("forward pass failed at step " + std::to_string(step) + ": " + e.what());
            }
            const double total = loss.total.item<double>();
            if (!std::isfinite(total)) {
                dump_nonfinite_batch(options.output_dir, fwd_in, bwd_in, batch);
                throw Error("non-finite loss at step " + std::to_string(step) + " (l_fp=" +
                            std::to_string(loss.l_fp.item<double>()) + ", l_bp=" +
                            std::to_string(loss.l_bp.item<double>()) + ", l_con=" +
                            std::to_string(loss.l_con.item<double>()) + ")");
            }
            loss.total.backward();
            optimizer.step();

            StepRecord rec{step, epoch, lr, loss.l_fp.item<double>(), loss.l_bp.item<double>(),
                           loss.l_con.item<double>(), total};
            result.history.push_back(rec);
            er.l_fp += rec.l_fp;
            er.l_bp += rec.l_bp;
            er.l_con += rec.l_con;
            er.total += rec.total;
            ++er.steps;
            ++step;

            if (step % cfg.log_every == 0 || step == total_steps) {
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                log::info("step ", step, "/", total_steps, " loss ", rec.total, " (fp ", rec.l_fp, ", bp ",
                          rec.l_bp, ", con ", rec.l_con, ") lr ", lr, " ", static_cast<int>(secs), "s");
                metrics.write({{"event", "step"},
                               {"step", step},
                               {"epoch", epoch},
                               {"lr", lr},
                               {"l_fp", rec.l_fp},
                               {"l_bp", rec.l_bp},
                               {"l_con", rec.l_con},
                               {"total", rec.total}});
            }
        }
        if (er.steps > 0) {
            const double n = static_cast<double>(er.steps);
            er.l_fp /= n;
            er.l_bp /= n;
            er.l_con /= n;
            er.total /= n;
        }
        result.epochs.push_back(er);
        metrics.write({{"event", "epoch"},
                       {"epoch", epoch},
                       {"steps", er.steps},
                       {"l_fp", er.l_fp},
                       {"l_bp", er.l_bp},
                       {"l_con", er.l_con},
                       {"total", er.total}});
        if (cfg.checkpoint_every_epoch && !options.output_dir.empty()) {
            save_checkpoint(model, step, options.output_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"));
        }
    }
    result.steps = step;
    if (!options.output_dir.empty()) {
        result.checkpoint = options.output_dir / "model.ckpt";
        save_checkpoint(model, step, result.checkpoint);
        metrics.write({{"event", "done"}, {"steps", step}, {"checkpoint", result.checkpoint.string()}});
    }
    return result;
}

TrainResult train(const ExperimentConfig& cfg) {
    if (cfg.data.root.empty()) throw ConfigError("data.root is not set");
    auto clips = load_dataset(cfg.data.root, Split::Train, {cfg.data.resolution});
    for (auto& c : clips) c.labels.reset();
    return train_on_clips(clips, cfg.variant, cfg.data.resolution, cfg.train, {cfg.output_dir, nullptr});
}

namespace {

struct VideoErrors {
    std::vector<double> psnr;
    std::vector<double> mean_error;
};

constexpr std::size_t kEvalBatch = 8;

VideoErrors score_windows(BiSPModel& model, const std::vector<TestWindow>& windows, const ScoringConfig& cfg) {
    const auto& v = model->variant();
    ScoringConfig fuse_cfg = cfg;
    // A single-stream model only has its own error.
    if (!v.has_backward()) fuse_cfg.w_f = 1.0, fuse_cfg.w_b = 0.0;
    if (!v.has_forward()) fuse_cfg.w_f = 0.0, fuse_cfg.w_b = 1.0;

    VideoErrors out;
    for (std::size_t begin = 0; begin < windows.size(); begin += kEvalBatch) {
        const std::size_t end = std::min(windows.size(), begin + kEvalBatch);
        std::vector<torch::Tensor> fwd, bwd;
        for (std::size_t i = begin; i < end; ++i) {
            if (v.has_forward()) fwd.push_back(stack_triple(windows[i].forward_inputs));
            if (v.has_backward()) bwd.push_back(stack_triple(windows[i].backward_inputs));
        }
        auto pair = model->predict_pair(fwd.empty() ? torch::Tensor() : torch::stack(fwd),
                                        bwd.empty() ? torch::Tensor() : torch::stack(bwd));
        for (std::size_t i = begin; i < end; ++i) {
            const auto& truth = windows[i].target;
            const auto k = static_cast<int64_t>(i - begin);
            ErrorMap e_f = pair.forward.defined() ? frame_error_map(pair.forward[k], truth) : ErrorMap();
            ErrorMap e_b = pair.backward.defined() ? frame_error_map(pair.backward[k], truth) : ErrorMap();
            if (!pair.forward.defined()) e_f = e_b;
            if (!pair.backward.defined()) e_b = e_f;
            const auto fused = fuse_errors(e_f, e_b, fuse_cfg);
            double sum = 0.0;
            for (double x : fused.values) sum += x;
            out.mean_error.push_back(sum / static_cast<double>(fused.values.size()));
            out.psnr.push_back(multiscale_psnr(fused, fuse_cfg));
        }
    }
    return out;
}

} // namespace

EvalResult evaluate_clips(BiSPModel& model, const std::vector<FrameClip>& clips, const ScoringConfig& cfg) {
    cfg.validate();
    const bool was_training = model->is_training();
    model->eval();
    torch::NoGradGuard no_grad;

    std::vector<VideoErrors> errors;
    std::vector<const FrameClip*> used;
    for (const auto& clip : clips) {
        auto windows = make_test_windows(clip);
        if (windows.empty()) {
            log::warn("video ", clip.video_id, " is too short to score; skipped");
            continue;
        }
        errors.push_back(score_windows(model, windows, cfg));
        used.push_back(&clip);
    }
    if (was_training) model->train();

    // Global normalization uses one min/max over every video's PSNR.
    std::vector<std::vector<double>> global_norm;
    if (cfg.normalization == Normalization::Global && !errors.empty()) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& e : errors) {
            for (double p : e.psnr) lo = std::min(lo, p), hi = std::max(hi, p);
        }
        for (const auto& e : errors) {
            std::vector<double> n(e.psnr.size(), 0.5);
            if (hi > lo) {
                for (std::size_t i = 0; i < n.size(); ++i) n[i] = (e.psnr[i] - lo) / (hi - lo);
            }
            global_norm.push_back(std::move(n));
        }
    }

    EvalResult result;
    bool all_labelled = !used.empty();
    for (std::size_t i = 0; i < used.size(); ++i) {
        const auto& clip = *used[i];
        all_labelled = all_labelled && clip.labels.has_value();
        result.series.push_back(build_score_series(clip.video_id, clip.size(), kTestWindowLength / 2,
                                                   errors[i].psnr, errors[i].mean_error, cfg, clip.labels,
                                                   global_norm.empty() ? nullptr : &global_norm[i]));
    }
    if (all_labelled) {
        try {
            result.roc = compute_auc(result.series);
        } catch (const DataError& e) {
            log::warn("AUC skipped: ", e.what());
        }
    } else if (!used.empty()) {
        log::warn("some test videos have no labels; scores emitted, AUC skipped");
    }
    return result;
}

EvalResult evaluate(const ExperimentConfig& cfg) {
    if (cfg.data.root.empty()) throw ConfigError("data.root is not set");
    auto ck = load_checkpoint(cfg.checkpoint_path());
    if (ck.model->resolution() != cfg.data.resolution) {
        throw ConfigError("checkpoint resolution " + std::to_string(ck.model->resolution()) +
                          " differs from data.resolution " + std::to_string(cfg.data.resolution));
    }
    auto clips = load_dataset(cfg.data.root, Split::Test, {cfg.data.resolution});
    return evaluate_clips(ck.model, clips, cfg.scoring);
}

void write_score_dump(const fs::path& file, const std::vector<ScoreSeries>& series) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << "video_id,frame_index,psnr,score,label\n" << std::setprecision(17);
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.scores.size(); ++i) {
            out << s.video_id << ',' << s.frame_indices[i] << ',' << s.psnr[i] << ',' << s.scores[i] << ',';
            if (s.labels) out << (*s.labels)[i];
            out << '\n';
        }
    }
}

std::vector<ScoreSeries> read_score_dump(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open score dump " + file.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("video_id,frame_index,psnr,score,label", 0) != 0) {
        throw DataError(file.string() + ": missing score dump header");
    }
    std::vector<ScoreSeries> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.emplace_back();
        if (f.size() != 5) throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
        if (out.empty() || out.back().video_id != f[0]) {
            ScoreSeries s;
            s.video_id = f[0];
            if (!f[4].empty()) s.labels = std::vector<int>{};
            out.push_back(std::move(s));
        }
        auto& s = out.back();
        try {
            s.frame_indices.push_back(std::stoul(f[1]));
            s.psnr.push_back(std::stod(f[2]));
            s.scores.push_back(std::stod(f[3]));
        } catch (const std::exception&) {
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": malformed number");
        }
        s.fused_error.push_back(0.0);
        s.scored.push_back(true);
        if (f[4].empty() != !s.labels.has_value()) {
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": labels must be all present or absent");
        }
        if (s.labels) s.labels->push_back(f[4] == "1" ? 1 : 0);
    }
    if (out.empty()) throw DataError(file.string() + ": score dump is empty");
    return out;
}

void write_roc_table(const fs::path& file, const RocResult& roc) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << "fpr,tpr,threshold\n" << std::setprecision(17);
    for (const auto& p : roc.points) out << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
}

void write_eval_outputs(const fs::path& dir, const EvalResult& result, const std::string& variant_name) {
    fs::create_directories(dir);
    write_score_dump(dir / "scores.csv", result.series);
    json summary{{"variant", variant_name}, {"videos", result.series.size()}};
    if (result.roc) {
        write_roc_table(dir / "roc.csv", *result.roc);
        summary["auc"] = result.roc->auc;
    } else {
        summary["auc"] = nullptr;
    }
    std::ofstream(dir / "summary.json", std::ios::trunc) << summary.dump(2) << '\n';
}

std::vector<std::string> default_ablation_grid() {
    return {"model1", "model2", "model3", "model4", "model5", "model6", "Forward", "Backward", "Fusion", "BiSP"};
}

std::vector<double> weight_sweep_ratios() { return {0.1, 0.3, 0.5, 0.7, 0.9}; }

std::vector<AblationCell> run_ablation_grid(const ExperimentConfig& base, const std::vector<std::string>& names,
                                            const std::vector<FrameClip>& train_clips,
                                            const std::vector<FrameClip>& test_clips) {
    std::vector<AblationCell> cells;
    // Trained models keyed by variant so duplicates (BiSP == model6) reuse work.
    std::vector<std::pair<VariantSpec, BiSPModel>> trained;

    for (const auto& name : names) {
        AblationCell cell;
        cell.name = name;
        try {
            cell.variant = VariantSpec::parse(name);
            BiSPModel model{nullptr};
            for (auto& [v, m] : trained) {
                if (v == cell.variant) model = m;
            }
            if (!model) {
                TrainOptions opts;
                if (!base.output_dir.empty()) opts.output_dir = base.output_dir / "ablation" / name;
                model = train_on_clips(train_clips, cell.variant, base.data.resolution, base.train, opts).model;
                trained.emplace_back(cell.variant, model);
            }
            std::vector<double> weights{0.5};
            if (base.ablation.weight_sweep) weights = weight_sweep_ratios();
            for (double w : weights) {
                AblationCell c = cell;
                c.w_f = w;
                ScoringConfig sc = base.scoring;
                sc.w_f = w;
                sc.w_b = 1.0 - w;
                auto res = evaluate_clips(model, test_clips, sc);
                if (res.roc) {
                    c.auc = res.roc->auc;
                } else {
                    c.error = "no labels";
                }
                cells.push_back(c);
            }
        } catch (const std::exception& e) {
            cell.error = e.what();
            log::warn("ablation cell ", name, " failed: ", e.what());
            cells.push_back(cell);
        }
    }
    return cells;
}

std::string format_ablation_table(const std::vector<AblationCell>& cells) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "name" << std::setw(10) << "strategy" << std::setw(7) << "SkipF"
       << std::setw(7) << "VarCA" << std::setw(7) << "ConSA" << std::setw(7) << "w_f" << "AUC\n";
    for (const auto& c : cells) {
        os << std::setw(10) << c.name << std::setw(10) << to_string(c.variant.strategy) << std::setw(7)
           << (c.variant.skip_frames ? "on" : "off") << std::setw(7) << (c.variant.varca ? "on" : "off")
           << std::setw(7) << (c.variant.consa ? "on" : "off") << std::setw(7) << std::setprecision(2) << c.w_f;
        if (c.auc) {
            os << std::fixed << std::setprecision(4) << *c.auc << std::defaultfloat;
        } else {
            os << "error: " << c.error;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace bisp

namespace bisp {

WindowPrediction predict_window(BiSPModel& model, const TestWindow& window, const ScoringConfig& cfg) {
    const bool was_training = model->is_training();
    model->eval();
    torch::NoGradGuard no_grad;
    const auto& v = model->variant();
    auto pair = model->predict_pair(v.has_forward() ? stack_triple(window.forward_inputs).unsqueeze(0) : torch::Tensor(),
                                    v.has_backward() ? stack_triple(window.backward_inputs).unsqueeze(0)
                                                     : torch::Tensor());
    if (was_training) model->train();

    ScoringConfig fuse_cfg = cfg;
    if (!v.has_backward()) fuse_cfg.w_f = 1.0, fuse_cfg.w_b = 0.0;
    if (!v.has_forward()) fuse_cfg.w_f = 0.0, fuse_cfg.w_b = 1.0;

    WindowPrediction out;
    out.truth = window.target;
    torch::Tensor f = pair.forward.defined() ? pair.forward[0] : torch::Tensor();
    torch::Tensor b = pair.backward.defined() ? pair.backward[0] : torch::Tensor();
    out.prediction = f.defined() && b.defined() ? (f + b) * 0.5 : (f.defined() ? f : b);
    ErrorMap e_f = f.defined() ? frame_error_map(f, window.target) : ErrorMap();
    ErrorMap e_b = b.defined() ? frame_error_map(b, window.target) : e_f;
    if (!f.defined()) e_f = e_b;
    out.fused_error = fuse_errors(e_f, e_b, fuse_cfg);
    out.psnr = multiscale_psnr(out.fused_error, fuse_cfg);
    return out;
}

} // namespace bisp
