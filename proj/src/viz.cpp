#include "bisp/viz.hpp"

#include "bisp/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>

namespace fs = std::filesystem;

namespace bisp::viz {

std::vector<std::pair<std::size_t, std::size_t>> label_runs(const std::vector<int>& labels) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        if (!runs.empty() && runs.back().second + 1 == i) {
            runs.back().second = i;
        } else {
            runs.emplace_back(i, i);
        }
    }
    return runs;
}

namespace {

constexpr int kPlotW = 640, kPlotH = 240, kLeft = 48, kRight = 16, kTop = 28, kBottom = 32;

const cv::Scalar kWhite(255, 255, 255), kBlack(0, 0, 0), kGrid(220, 220, 220), kShade(200, 200, 255),
    kCurve(180, 60, 20);

cv::Point plot_point(double fx, double fy, int w, int h) {
    const int px = kLeft + static_cast<int>(std::lround(fx * (w - kLeft - kRight)));
    const int py = kTop + static_cast<int>(std::lround((1.0 - fy) * (h - kTop - kBottom)));
    return {px, py};
}

void draw_axes(cv::Mat& img, const std::string& title, const std::string& xlabel) {
    const int w = img.cols, h = img.rows;
    for (int k = 0; k <= 4; ++k) {
        const double f = k / 4.0;
        cv::line(img, plot_point(0, f, w, h), plot_point(1, f, w, h), kGrid, 1);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", f);
        cv::putText(img, buf, plot_point(0, f, w, h) + cv::Point(-44, 4), cv::FONT_HERSHEY_PLAIN, 0.9, kBlack, 1);
    }
    cv::rectangle(img, plot_point(0, 1, w, h), plot_point(1, 0, w, h), kBlack, 1);
    cv::putText(img, title, {kLeft, 18}, cv::FONT_HERSHEY_PLAIN, 1.1, kBlack, 1);
    cv::putText(img, xlabel, {w / 2 - 30, h - 8}, cv::FONT_HERSHEY_PLAIN, 1.0, kBlack, 1);
}

} // namespace

cv::Mat render_score_curve(const ScoreSeries& series) {
    cv::Mat img(kPlotH, kPlotW, CV_8UC3, kWhite);
    const std::size_t n = series.scores.size();
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    if (series.labels) {
        for (auto [a, b] : label_runs(*series.labels)) {
            // Shade half a frame either side so single-frame runs stay visible.
            const double x0 = std::max(0.0, (a - 0.5) / denom), x1 = std::min(1.0, (b + 0.5) / denom);
            cv::rectangle(img, plot_point(x0, 1, kPlotW, kPlotH), plot_point(x1, 0, kPlotW, kPlotH), kShade,
                          cv::FILLED);
        }
    }
    draw_axes(img, "anomaly score: " + series.video_id, "frame");
    for (std::size_t i = 1; i < n; ++i) {
        cv::line(img, plot_point((i - 1) / denom, series.scores[i - 1], kPlotW, kPlotH),
                 plot_point(i / denom, series.scores[i], kPlotW, kPlotH), kCurve, 2, cv::LINE_AA);
    }
    return img;
}

void write_image(const cv::Mat& image, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    if (!cv::imwrite(file.string(), image)) throw Error("cannot write image " + file.string());
}

ScoreVizOutputs write_score_curves(const std::vector<ScoreSeries>& series, const fs::path& out_dir) {
    if (series.empty()) throw DataError("score dump is empty");
    fs::create_directories(out_dir);
    ScoreVizOutputs out;
    out.table = out_dir / "score_curves.csv";
    out.intervals = out_dir / "anomaly_intervals.csv";
    std::ofstream table(out.table, std::ios::trunc), intervals(out.intervals, std::ios::trunc);
    table << "video_id,frame_index,score,label\n" << std::setprecision(17);
    intervals << "video_id,first,last\n";
    bool all_labelled = true;
    for (const auto& s : series) {
        const auto img_path = out_dir / ("scores_" + s.video_id + ".png");
        write_image(render_score_curve(s), img_path);
        out.images.push_back(img_path);
        for (std::size_t i = 0; i < s.scores.size(); ++i) {
            table << s.video_id << ',' << s.frame_indices[i] << ',' << s.scores[i] << ',';
            if (s.labels) table << (*s.labels)[i];
            table << '\n';
        }
        if (s.labels) {
            for (auto [a, b] : label_runs(*s.labels)) intervals << s.video_id << ',' << a << ',' << b << '\n';
        } else {
            all_labelled = false;
        }
    }
    if (all_labelled) {
        try {
            auto roc = compute_auc(series);
            out.thresholds = out_dir / "thresholds.csv";
            std::ofstream th(out.thresholds, std::ios::trunc);
            th << "threshold,fpr,tpr\n" << std::setprecision(17);
            for (const auto& p : roc.points) th << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
        } catch (const DataError&) {
            // Single-class labels: no threshold table.
        }
    }
    return out;
}

namespace {

cv::Mat frame_panel(const torch::Tensor& frame) {
    auto rgb = ((frame.detach().to(torch::kFloat32).clamp(-1, 1) + 1.0) * 127.5)
                   .round()
                   .to(torch::kUInt8)
                   .permute({1, 2, 0})
                   .contiguous();
    cv::Mat view(static_cast<int>(rgb.size(0)), static_cast<int>(rgb.size(1)), CV_8UC3, rgb.data_ptr());
    cv::Mat bgr;
    cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
    cv::resize(bgr, bgr, cv::Size(kPanelSize, kPanelSize), 0, 0, cv::INTER_NEAREST);
    return bgr;
}

cv::Mat error_panel(const ErrorMap& error, double scale) {
    cv::Mat gray(error.height, error.width, CV_8UC1);
    const double s = scale > 0.0 ? scale : 1.0;
    for (int y = 0; y < error.height; ++y) {
        for (int x = 0; x < error.width; ++x) {
            gray.at<std::uint8_t>(y, x) =
                static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(error.at(y, x) / s, 0.0, 1.0)));
        }
    }
    cv::Mat color;
    cv::applyColorMap(gray, color, cv::COLORMAP_INFERNO);
    cv::resize(color, color, cv::Size(kPanelSize, kPanelSize), 0, 0, cv::INTER_NEAREST);
    return color;
}

} // namespace

cv::Mat render_error_triptych(const torch::Tensor& truth, const torch::Tensor& prediction, const ErrorMap& error,
                              double error_scale) {
    cv::Mat img(kPanelSize + 2 * kPanelMargin, 3 * kPanelSize + 4 * kPanelMargin, CV_8UC3, kWhite);
    const cv::Mat panels[3] = {frame_panel(truth), frame_panel(prediction), error_panel(error, error_scale)};
    for (int i = 0; i < 3; ++i) {
        panels[i].copyTo(img(cv::Rect(kPanelMargin + i * (kPanelSize + kPanelMargin), kPanelMargin, kPanelSize,
                                      kPanelSize)));
    }
    return img;
}

void write_error_table(const ErrorMap& error, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error("cannot write " + file.string());
    out << std::setprecision(10);
    for (int y = 0; y < error.height; ++y) {
        for (int x = 0; x < error.width; ++x) out << (x ? "," : "") << error.at(y, x);
        out << '\n';
    }
}

cv::Mat render_roc(const std::vector<RocCurve>& curves) {
    constexpr int kSize = 420;
    cv::Mat img(kSize, kSize, CV_8UC3, kWhite);
    draw_axes(img, "ROC", "false positive rate");
    cv::line(img, plot_point(0, 0, kSize, kSize), plot_point(1, 1, kSize, kSize), kGrid, 1, cv::LINE_AA);
    static const cv::Scalar kPalette[] = {{180, 60, 20}, {20, 120, 220}, {40, 160, 40},
                                          {160, 40, 160}, {0, 0, 200},    {120, 120, 0}};
    for (std::size_t c = 0; c < curves.size(); ++c) {
        const auto& color = kPalette[c % std::size(kPalette)];
        const auto& pts = curves[c].roc.points;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            cv::line(img, plot_point(pts[i - 1].fpr, pts[i - 1].tpr, kSize, kSize),
                     plot_point(pts[i].fpr, pts[i].tpr, kSize, kSize), color, 2, cv::LINE_AA);
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s AUC=%.4f", curves[c].name.c_str(), curves[c].roc.auc);
        const cv::Point at = plot_point(0.35, 0.30 - 0.07 * static_cast<double>(c), kSize, kSize);
        cv::line(img, at + cv::Point(-20, -4), at + cv::Point(-4, -4), color, 2);
        cv::putText(img, buf, at, cv::FONT_HERSHEY_PLAIN, 0.9, kBlack, 1);
    }
    return img;
}

} // namespace bisp::viz
