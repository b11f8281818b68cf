#include "bisp/errors.hpp"
#include "bisp/scoring.hpp"
#include "bisp/train_eval.hpp"
#include "bisp/viz.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

using namespace bisp;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BISP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ScoreSeries series_of(std::vector<double> scores, std::optional<std::vector<int>> labels = std::nullopt) {
    ScoreSeries s;
    s.video_id = "v";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        s.frame_indices.push_back(i);
        s.psnr.push_back(30.0);
        s.scored.push_back(true);
    }
    s.scores = std::move(scores);
    s.labels = std::move(labels);
    return s;
}

bool is_curve_pixel(const cv::Vec3b& p) { return p[0] > 120 && p[2] < 100 && p[0] > p[2] + 60; }

} // namespace

TEST(Viz, LabelRuns) {
    using Runs = std::vector<std::pair<std::size_t, std::size_t>>;
    EXPECT_EQ(viz::label_runs({0, 1, 1, 0, 1, 0, 1, 1, 1}), (Runs{{1, 2}, {4, 4}, {6, 8}}));
    EXPECT_EQ(viz::label_runs({0, 0}), Runs{});
    EXPECT_EQ(viz::label_runs({1}), (Runs{{0, 0}}));
}

TEST(Viz, ConstantZeroScoresPlotAFlatLine) {
    auto img = viz::render_score_curve(series_of(std::vector<double>(50, 0.0)));
    int lo = img.rows, hi = -1;
    for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
            if (is_curve_pixel(img.at<cv::Vec3b>(y, x))) lo = std::min(lo, y), hi = std::max(hi, y);
        }
    }
    ASSERT_GE(hi, 0) << "curve not drawn";
    EXPECT_LE(hi - lo, 3);
    EXPECT_GT(lo, img.rows / 2);  // zero sits at the bottom of the plot
}

TEST(Viz, AnomalousIntervalsAreShaded) {
    std::vector<int> labels(40, 0);
    for (int i = 10; i < 20; ++i) labels[i] = 1;
    auto shaded = viz::render_score_curve(series_of(std::vector<double>(40, 0.5), labels));
    auto plain = viz::render_score_curve(series_of(std::vector<double>(40, 0.5)));
    cv::Mat diff;
    cv::absdiff(shaded, plain, diff);
    EXPECT_GT(cv::countNonZero(diff.reshape(1)), 1000);
}

TEST(Viz, TriptychLayout) {
    auto truth = torch::zeros({3, 32, 32});
    auto img = viz::render_error_triptych(truth, truth, ErrorMap(32, 32, 0.0), 1.0);
    EXPECT_EQ(img.rows, viz::kPanelSize + 2 * viz::kPanelMargin);
    EXPECT_EQ(img.cols, 3 * viz::kPanelSize + 4 * viz::kPanelMargin);
}

TEST(Viz, ZeroErrorPanelIsUniformlyDark) {
    auto truth = torch::rand({3, 32, 32}) * 2 - 1;
    auto img = viz::render_error_triptych(truth, truth, frame_error_map(truth, truth), 0.1);
    const int x0 = 3 * viz::kPanelMargin + 2 * viz::kPanelSize;
    cv::Mat panel = img(cv::Rect(x0, viz::kPanelMargin, viz::kPanelSize, viz::kPanelSize));
    double lo, hi;
    cv::minMaxLoc(panel.reshape(1), &lo, &hi);
    EXPECT_LT(hi, 20.0);
    cv::Mat first = panel.row(0).clone();
    for (int y = 0; y < panel.rows; ++y) {
        cv::Mat d;
        cv::absdiff(panel.row(y), first, d);
        ASSERT_EQ(cv::countNonZero(d.reshape(1)), 0);
    }
}

TEST(Viz, RocOfPerfectScoresPassesThroughTopLeft) {
    auto roc = roc_auc({0.9, 0.8, 0.7, 0.2, 0.1}, {1, 1, 1, 0, 0});
    EXPECT_DOUBLE_EQ(roc.auc, 1.0);
    bool corner = false;
    for (const auto& p : roc.points) corner |= p.fpr == 0.0 && p.tpr == 1.0;
    EXPECT_TRUE(corner);
    auto img = viz::render_roc({{"perfect", roc}});
    EXPECT_EQ(img.rows, 420);
    // The plotted curve reaches the top-left corner of the axes.
    bool coloured = false;
    for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) coloured |= is_curve_pixel(img.at<cv::Vec3b>(28 + dy, 48 + dx));
    }
    EXPECT_TRUE(coloured);
}

TEST(Viz, ScoreCurveOutputs) {
    auto dir = bisp::testing::temp_dir("viz_out");
    std::vector<int> labels(20, 0);
    labels[5] = labels[6] = 1;
    std::vector<double> scores(20, 0.1);
    scores[5] = scores[6] = 0.9;
    auto out = viz::write_score_curves({series_of(scores, labels)}, dir);
    ASSERT_EQ(out.images.size(), 1u);
    EXPECT_TRUE(fs::exists(dir / "scores_v.png"));
    EXPECT_TRUE(fs::exists(out.table));
    EXPECT_TRUE(fs::exists(out.thresholds));
    std::ifstream in(out.intervals);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(row, "v,5,6");
    EXPECT_THROW(viz::write_score_curves({}, dir), DataError);
}

TEST(Viz, RerunningOverwritesWithIdenticalOutputs) {
    auto a = bisp::testing::temp_dir("viz_pure");
    std::vector<int> labels(30, 0);
    labels[10] = 1;
    std::vector<double> scores(30);
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = static_cast<double>(i % 7) / 7.0;
    const auto series = series_of(scores, labels);
    auto read = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    viz::write_score_curves({series}, a);
    const auto png = read(a / "scores_v.png"), table = read(a / "score_curves.csv");
    viz::write_score_curves({series}, a);
    EXPECT_EQ(read(a / "scores_v.png"), png);
    EXPECT_EQ(read(a / "score_curves.csv"), table);
}

TEST(Cli, ExitCodes) {
    auto dir = bisp::testing::temp_dir("cli");
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("train --config " + (dir / "missing.json").string()), 1);
    EXPECT_EQ(run_cli("train --set train.batch_size=0"), 1);
    EXPECT_EQ(run_cli("synth --describe " + (dir / "nothing").string()), 2);

    fs::create_directories(dir / "empty_video" / "train" / "a");
    EXPECT_EQ(run_cli("synth --describe " + (dir / "empty_video").string()), 2);

    const auto data = dir / "data";
    EXPECT_EQ(run_cli("synth --set data.root=" + data.string() +
                      " --set synth.num_train_videos=1 --set synth.num_test_videos=1"
                      " --set synth.frames_per_video=8 --set synth.height=32 --set synth.width=32"),
              0);
    EXPECT_EQ(run_cli("synth --describe " + data.string()), 0);

    write_score_dump(dir / "scores.csv", {series_of({0.1, 0.9}, std::vector<int>{0, 1})});
    std::ofstream(dir / "blocker") << "x";
    EXPECT_EQ(run_cli("viz scores --dump " + (dir / "scores.csv").string() + " --out " +
                      (dir / "blocker" / "sub").string()),
              3);
    EXPECT_EQ(run_cli("viz scores --dump " + (dir / "scores.csv").string() + " --out " + (dir / "viz").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "viz" / "scores_v.png"));
}
