#pragma once

#include "bisp/config.hpp"
#include "bisp/data_pipeline.hpp"
#include "bisp/model.hpp"
#include "bisp/scoring.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bisp {

struct StepRecord {
    int64_t step = 0;
    int epoch = 0;
    double lr = 0.0;
    double l_fp = 0.0;
    double l_bp = 0.0;
    double l_con = 0.0;
    double total = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    int64_t steps = 0;
    double l_fp = 0.0;
    double l_bp = 0.0;
    double l_con = 0.0;
    double total = 0.0;
};

struct TrainResult {
    BiSPModel model{nullptr};
    std::vector<StepRecord> history;
    std::vector<EpochRecord> epochs;
    int64_t steps = 0;
    std::filesystem::path checkpoint;  // empty when nothing was written
};

/// Cosine annealing from `base` towards 0 over `total_steps` steps.
double cosine_lr(double base, int64_t step, int64_t total_steps);

struct TrainOptions {
    /// Where checkpoints, metrics.jsonl and diagnostic dumps go; empty
    /// disables all file output.
    std::filesystem::path output_dir;
    /// Continue from this model instead of a fresh initialization.
    BiSPModel initial{nullptr};
};

/// Optimizes the variant on training clips with Adam and the bidirectional
/// loss. Deterministic for a given seed on one thread. Throws DataError
/// when the clips yield no samples and Error on a non-finite loss (after
/// writing the offending batch to `<output_dir>/nonfinite_batch.pt`).
TrainResult train_on_clips(const std::vector<FrameClip>& clips, const VariantSpec& variant, int64_t resolution,
                           const TrainConfig& cfg, const TrainOptions& options = {});

/// Loads the train split named by the config and trains.
TrainResult train(const ExperimentConfig& cfg);

struct EvalResult {
    std::vector<ScoreSeries> series;
    std::optional<RocResult> roc;  // absent when labels are missing
};

/// Scores every test clip. The model is put in evaluation mode for the
/// duration and restored afterwards; parameters and BatchNorm statistics
/// are never modified. Single-stream variants use only their own error.
EvalResult evaluate_clips(BiSPModel& model, const std::vector<FrameClip>& clips, const ScoringConfig& cfg);

/// Loads the checkpoint and the test split named by the config.
EvalResult evaluate(const ExperimentConfig& cfg);

/// Per-frame record dump: video_id,frame_index,psnr,score,label.
void write_score_dump(const std::filesystem::path& file, const std::vector<ScoreSeries>& series);
std::vector<ScoreSeries> read_score_dump(const std::filesystem::path& file);

/// Two-column table "fpr,tpr" (plus the threshold).
void write_roc_table(const std::filesystem::path& file, const RocResult& roc);

/// Writes scores.csv, roc.csv and summary.json for an evaluation.
void write_eval_outputs(const std::filesystem::path& dir, const EvalResult& result, const std::string& variant_name);

struct AblationCell {
    std::string name;
    VariantSpec variant;
    double w_f = 0.5;
    std::optional<double> auc;
    std::string error;
};

/// Default grid: the six SkipF/VarCA/ConSA rows followed by the Forward,
/// Backward, Fusion and BiSP strategies.
std::vector<std::string> default_ablation_grid();

/// Fusion-weight ratios 1:9, 3:7, 5:5, 7:3, 9:1 as w_f values.
std::vector<double> weight_sweep_ratios();

/// Trains and evaluates every named variant with w_f = w_b = 0.5 (plus the
/// sweep when enabled). Identical variants are trained once. A failing cell
/// records its error and the grid continues.
std::vector<AblationCell> run_ablation_grid(const ExperimentConfig& base, const std::vector<std::string>& names,
                                            const std::vector<FrameClip>& train_clips,
                                            const std::vector<FrameClip>& test_clips);

std::string format_ablation_table(const std::vector<AblationCell>& cells);

} // namespace bisp

namespace bisp {

/// Predictions for one test window: the averaged frame used for display
/// and the fused error map used for scoring.
struct WindowPrediction {
    torch::Tensor truth;
    torch::Tensor prediction;  // mean of the available streams
    ErrorMap fused_error;
    double psnr = 0.0;
};

WindowPrediction predict_window(BiSPModel& model, const TestWindow& window, const ScoringConfig& cfg);

} // namespace bisp
