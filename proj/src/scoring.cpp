#include "bisp/scoring.hpp"

#include "bisp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bisp {

void ScoringConfig::validate() const {
    if (w_f < 0.0 || w_f > 1.0 || w_b < 0.0 || w_b > 1.0) {
        throw ConfigError("fusion weights must lie in [0, 1]");
    }
    if (std::abs(w_f + w_b - 1.0) > 1e-9) {
        throw ConfigError("fusion weights must sum to one (w_f=" + std::to_string(w_f) +
                          ", w_b=" + std::to_string(w_b) + ")");
    }
    if (pool_sizes.empty()) throw ConfigError("at least one pool size is required");
    for (int p : pool_sizes) {
        if (p < 1) throw ConfigError("pool sizes must be positive");
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

ErrorMap frame_error_map(const torch::Tensor& pred, const torch::Tensor& truth) {
    if (pred.sizes() != truth.sizes()) throw ShapeError("frame_error_map: shape mismatch");
    if (pred.dim() != 3) throw ShapeError("frame_error_map: expected (C, H, W) frames");
    auto err = (pred.to(torch::kFloat64) - truth.to(torch::kFloat64)).pow(2).mean(0).contiguous();
    ErrorMap map(static_cast<int>(err.size(0)), static_cast<int>(err.size(1)));
    std::copy_n(err.data_ptr<double>(), map.values.size(), map.values.begin());
    return map;
}

ErrorMap fuse_errors(const ErrorMap& e_f, const ErrorMap& e_b, const ScoringConfig& cfg) {
    cfg.validate();
    if (e_f.height != e_b.height || e_f.width != e_b.width) throw ShapeError("fuse_errors: shape mismatch");
    ErrorMap out(e_f.height, e_f.width);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = cfg.w_f * e_f.values[i] + cfg.w_b * e_b.values[i];
    }
    return out;
}

double max_pooled_mean(const ErrorMap& map, int kernel) {
    if (kernel < 1 || map.height < kernel || map.width < kernel) {
        throw ShapeError("error map " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                         " is smaller than pool kernel " + std::to_string(kernel));
    }
    // Row sums of each kernel-wide strip, then column sums of those.
    const int rows = map.height / kernel;
    const int cols = map.width / kernel;
    std::vector<double> patch(static_cast<std::size_t>(rows) * cols, 0.0);
    for (int y = 0; y < rows * kernel; ++y) {
        for (int x = 0; x < cols * kernel; ++x) {
            patch[static_cast<std::size_t>(y / kernel) * cols + x / kernel] += map.at(y, x);
        }
    }
    const double area = static_cast<double>(kernel) * kernel;
    return *std::max_element(patch.begin(), patch.end()) / area;
}

double multiscale_psnr(const ErrorMap& fused, const ScoringConfig& cfg) {
    double total = 0.0;
    for (int k : cfg.pool_sizes) total += max_pooled_mean(fused, k);
    return 10.0 * std::log10(1.0 / (total + cfg.epsilon));
}

std::vector<double> normalize_scores(const std::vector<double>& psnr) {
    std::vector<double> out(psnr.size(), 0.5);
    if (psnr.empty()) return out;
    const auto [lo, hi] = std::minmax_element(psnr.begin(), psnr.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) return out;
    for (std::size_t i = 0; i < psnr.size(); ++i) out[i] = (psnr[i] - *lo) / range;
    return out;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (auto& v : k) v /= sum;
    return k;
}

namespace {

// Symmetric reflection "d c b a | a b c d | d c b a", period 2n.
std::size_t reflect_index(long i, long n) {
    const long period = 2 * n;
    long m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < n ? m : period - 1 - m);
}

} // namespace

std::vector<double> gaussian_smooth(const std::vector<double>& values, double sigma) {
    if (values.empty() || !(sigma > 0.0)) return values;
    const auto kernel = gaussian_kernel(sigma);
    const long radius = static_cast<long>(kernel.size() / 2);
    const long n = static_cast<long>(values.size());
    std::vector<double> out(values.size(), 0.0);
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k) acc += kernel[k + radius] * values[reflect_index(i + k, n)];
        out[i] = acc;
    }
    return out;
}

std::vector<double> anomaly_scores(const std::vector<double>& normalized, const ScoringConfig& cfg) {
    std::vector<double> raw(normalized.size());
    std::transform(normalized.begin(), normalized.end(), raw.begin(), [](double v) { return 1.0 - v; });
    auto smoothed = gaussian_smooth(raw, cfg.smooth_sigma);
    for (auto& v : smoothed) v = std::clamp(v, 0.0, 1.0);
    return smoothed;
}

ScoreSeries build_score_series(std::string video_id, std::size_t num_frames, std::size_t first_scored,
                               const std::vector<double>& psnr_by_frame, const std::vector<double>& mean_error,
                               const ScoringConfig& cfg, std::optional<std::vector<int>> labels,
                               const std::vector<double>* precomputed_normalized) {
    if (psnr_by_frame.empty()) throw DataError("video " + video_id + " has no scored frames");
    if (first_scored + psnr_by_frame.size() > num_frames || mean_error.size() != psnr_by_frame.size()) {
        throw ShapeError("build_score_series: inconsistent lengths");
    }
    if (labels && labels->size() != num_frames) throw DataError("video " + video_id + ": label count mismatch");

    const auto normalized = precomputed_normalized ? *precomputed_normalized : normalize_scores(psnr_by_frame);
    const auto scores = anomaly_scores(normalized, cfg);

    ScoreSeries s;
    s.video_id = std::move(video_id);
    s.labels = std::move(labels);
    const std::size_t last = first_scored + psnr_by_frame.size() - 1;
    for (std::size_t f = 0; f < num_frames; ++f) {
        const std::size_t src = std::clamp(f, first_scored, last) - first_scored;
        s.frame_indices.push_back(f);
        s.psnr.push_back(psnr_by_frame[src]);
        s.fused_error.push_back(mean_error[src]);
        s.scores.push_back(scores[src]);
        s.scored.push_back(f >= first_scored && f <= last);
    }
    return s;
}

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("roc_auc: score/label length mismatch");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const auto negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw DataError("AUC is undefined: labels contain a single class");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocResult r;
    r.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        while (i < order.size() && scores[order[i]] == threshold) {
            (labels[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / negatives;
        const double tpr = static_cast<double>(tp) / positives;
        const auto& prev = r.points.back();
        r.auc += (fpr - prev.fpr) * (tpr + prev.tpr) * 0.5;
        r.points.push_back({threshold, fpr, tpr});
    }
    return r;
}

RocResult compute_auc(const std::vector<ScoreSeries>& all_series) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : all_series) {
        if (!s.labels) throw DataError("video " + s.video_id + " has no labels");
        scores.insert(scores.end(), s.scores.begin(), s.scores.end());
        labels.insert(labels.end(), s.labels->begin(), s.labels->end());
    }
    return roc_auc(scores, labels);
}

} // namespace bisp
