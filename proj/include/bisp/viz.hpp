#pragma once

#include "bisp/scoring.hpp"

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace bisp::viz {

/// Inclusive [first, last] frame runs where the label is 1.
std::vector<std::pair<std::size_t, std::size_t>> label_runs(const std::vector<int>& labels);

/// Score-curve image with anomalous intervals shaded.
cv::Mat render_score_curve(const ScoreSeries& series);

struct ScoreVizOutputs {
    std::vector<std::filesystem::path> images;
    std::filesystem::path table;      // video_id,frame_index,score,label
    std::filesystem::path intervals;  // video_id,first,last
    std::filesystem::path thresholds; // threshold,fpr,tpr (labelled dumps only)
};

/// Writes scores_<video>.png per video plus the plotted tables.
ScoreVizOutputs write_score_curves(const std::vector<ScoreSeries>& series, const std::filesystem::path& out_dir);

inline constexpr int kPanelSize = 256;
inline constexpr int kPanelMargin = 8;

/// Ground truth, prediction and error heat map side by side. Each panel is
/// kPanelSize square; the image is (256 + 2m) x (3*256 + 4m). Error colour
/// scales linearly up to `error_scale` (brighter = larger).
cv::Mat render_error_triptych(const torch::Tensor& truth, const torch::Tensor& prediction, const ErrorMap& error,
                              double error_scale);

/// Writes the error map as a row-major CSV grid.
void write_error_table(const ErrorMap& error, const std::filesystem::path& file);

struct RocCurve {
    std::string name;
    RocResult roc;
};

/// Overlaid ROC curves with an AUC legend.
cv::Mat render_roc(const std::vector<RocCurve>& curves);

void write_image(const cv::Mat& image, const std::filesystem::path& file);

} // namespace bisp::viz
