#pragma once

#include <torch/torch.h>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace bisp {

/// Row-major per-pixel error map.
struct ErrorMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    ErrorMap() = default;
    ErrorMap(int h, int w, double fill = 0.0) : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

enum class Normalization { PerVideo, Global };

struct ScoringConfig {
    double w_f = 0.5;
    double w_b = 0.5;
    std::vector<int> pool_sizes{4, 8, 16};
    double smooth_sigma = 3.0;
    double epsilon = 1e-8;
    Normalization normalization = Normalization::PerVideo;

    /// Throws ConfigError unless weights lie in [0, 1] and sum to one and
    /// every pool size is positive.
    void validate() const;
};

/// Per-frame results for one test video. Every list has one entry per
/// video frame; `scored` is false for the boundary frames that borrowed the
/// nearest windowed frame's values.
struct ScoreSeries {
    std::string video_id;
    std::vector<std::size_t> frame_indices;
    std::vector<double> fused_error;  // mean of the fused error map
    std::vector<double> psnr;
    std::vector<double> scores;
    std::vector<bool> scored;
    std::optional<std::vector<int>> labels;
};

/// Squared error per pixel averaged over channels. Frames are (3, H, W).
ErrorMap frame_error_map(const torch::Tensor& pred, const torch::Tensor& truth);

/// w_f * e_f + w_b * e_b elementwise.
ErrorMap fuse_errors(const ErrorMap& e_f, const ErrorMap& e_b, const ScoringConfig& cfg);

/// Largest mean over disjoint kernel x kernel patches (stride = kernel).
double max_pooled_mean(const ErrorMap& map, int kernel);

/// 10 log10(1 / (sum_i v_i + eps)) where v_i is the largest patch mean at
/// pool size i.
double multiscale_psnr(const ErrorMap& fused, const ScoringConfig& cfg);

/// Min-max normalization to [0, 1]; a constant series maps to 0.5.
std::vector<double> normalize_scores(const std::vector<double>& psnr);

/// Normalized Gaussian kernel with radius ceil(4 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// 1D Gaussian smoothing with symmetric (half-sample) reflection at the ends.
std::vector<double> gaussian_smooth(const std::vector<double>& values, double sigma);

/// score = smooth(1 - normalized). Sigma <= 0 disables smoothing.
std::vector<double> anomaly_scores(const std::vector<double>& normalized, const ScoringConfig& cfg);

/// Builds a full-length ScoreSeries from PSNR values at the windowed frames.
/// `psnr_by_frame[i]` belongs to frame `first_scored + i`; the frames before
/// and after copy the nearest scored frame. With `precomputed_normalized`
/// the caller supplies normalized PSNR (global normalization).
ScoreSeries build_score_series(std::string video_id, std::size_t num_frames, std::size_t first_scored,
                               const std::vector<double>& psnr_by_frame, const std::vector<double>& mean_error,
                               const ScoringConfig& cfg, std::optional<std::vector<int>> labels,
                               const std::vector<double>* precomputed_normalized = nullptr);

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocResult {
    double auc = 0.0;
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
};

/// Frame-level ROC over (score, label) pairs; ties share one ROC point.
/// Throws DataError when only one class is present.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// ROC over the concatenation of every labelled series.
RocResult compute_auc(const std::vector<ScoreSeries>& all_series);

} // namespace bisp
