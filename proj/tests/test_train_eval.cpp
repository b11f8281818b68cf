#include "bisp/checkpoint.hpp"
#include "bisp/config.hpp"
#include "bisp/errors.hpp"
#include "bisp/train_eval.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

using namespace bisp;
namespace fs = std::filesystem;

namespace {

constexpr int64_t kRes = 32;

TrainConfig quick_train(int64_t steps = 3) {
    TrainConfig t;
    t.batch_size = 2;
    t.max_steps = steps;
    t.log_every = 1000;
    return t;
}

FrameClip labelled_clip(const std::string& id, std::uint64_t seed, std::size_t n = 12) {
    auto clip = bisp::testing::random_clip(n, kRes, seed);
    clip.video_id = id;
    std::vector<int> labels(n, 0);
    for (std::size_t i = n / 2; i < n; ++i) labels[i] = 1;
    clip.labels = labels;
    return clip;
}

std::map<std::string, torch::Tensor> snapshot(torch::nn::Module& m) {
    std::map<std::string, torch::Tensor> out;
    for (const auto& p : m.named_parameters()) out[p.key()] = p.value().clone();
    for (const auto& b : m.named_buffers()) out["buf:" + b.key()] = b.value().clone();
    return out;
}

} // namespace

TEST(CosineLr, StartsAtBaseAndDecaysToZero) {
    EXPECT_EQ(cosine_lr(2e-4, 0, 100), 2e-4);
    EXPECT_NEAR(cosine_lr(2e-4, 50, 100), 1e-4, 1e-18);
    EXPECT_NEAR(cosine_lr(2e-4, 100, 100), 0.0, 1e-18);
    for (int s = 1; s <= 100; ++s) EXPECT_LE(cosine_lr(2e-4, s, 100), cosine_lr(2e-4, s - 1, 100));
}

TEST(Train, SameSeedGivesBitwiseEqualHistories) {
    std::vector<FrameClip> clips{bisp::testing::random_clip(10, kRes, 1)};
    auto a = train_on_clips(clips, VariantSpec{}, kRes, quick_train());
    auto b = train_on_clips(clips, VariantSpec{}, kRes, quick_train());
    ASSERT_EQ(a.history.size(), 3u);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].total, b.history[i].total);
        EXPECT_EQ(a.history[i].l_con, b.history[i].l_con);
    }
    auto sa = snapshot(*a.model), sb = snapshot(*b.model);
    for (const auto& [k, v] : sa) EXPECT_TRUE(torch::equal(v, sb[k])) << k;
}

TEST(Train, RecordsAllLossTermsAndLearningRate) {
    std::vector<FrameClip> clips{bisp::testing::random_clip(10, kRes, 2)};
    auto r = train_on_clips(clips, VariantSpec{}, kRes, quick_train(4));
    ASSERT_EQ(r.history.size(), 4u);
    for (const auto& h : r.history) {
        EXPECT_NEAR(h.total, h.l_fp + h.l_bp + h.l_con, 1e-6);
        EXPECT_GT(h.l_con, 0.0);
    }
    EXPECT_EQ(r.history[0].lr, 2e-4);
    EXPECT_LT(r.history[3].lr, r.history[1].lr);
}

TEST(Train, EmptyDatasetIsADataError) {
    EXPECT_THROW(train_on_clips({}, VariantSpec{}, kRes, quick_train()), DataError);
    std::vector<FrameClip> too_short{bisp::testing::random_clip(4, kRes, 3)};
    EXPECT_THROW(train_on_clips(too_short, VariantSpec{}, kRes, quick_train()), DataError);
}

TEST(Train, NonFiniteLossAbortsWithDump) {
    auto dir = bisp::testing::temp_dir("nonfinite");
    std::vector<FrameClip> clips{bisp::testing::random_clip(12, kRes, 4)};
    auto cfg = quick_train(20);
    cfg.learning_rate = 1e30;
    TrainOptions opts;
    opts.output_dir = dir;
    EXPECT_THROW(train_on_clips(clips, VariantSpec{}, kRes, cfg, opts), Error);
    EXPECT_TRUE(fs::exists(dir / "nonfinite_batch.pt"));
    EXPECT_TRUE(fs::exists(dir / "nonfinite_batch.txt"));
}

TEST(Train, WritesCheckpointAndMetrics) {
    auto dir = bisp::testing::temp_dir("train_out");
    std::vector<FrameClip> clips{bisp::testing::random_clip(10, kRes, 5)};
    TrainOptions opts;
    opts.output_dir = dir;
    auto r = train_on_clips(clips, VariantSpec::parse("Forward"), kRes, quick_train(2), opts);
    EXPECT_EQ(r.checkpoint, dir / "model.ckpt");
    EXPECT_TRUE(fs::exists(dir / "metrics.jsonl"));
    auto ck = load_checkpoint(r.checkpoint);
    EXPECT_EQ(ck.step, 2);
}

TEST(Evaluate, DoesNotModifyTheModel) {
    torch::manual_seed(6);
    auto model = build_variant(VariantSpec{}, kRes);
    model->train();
    auto before = snapshot(*model);
    evaluate_clips(model, {labelled_clip("a", 7)}, ScoringConfig{});
    EXPECT_TRUE(model->is_training());
    auto after = snapshot(*model);
    for (const auto& [k, v] : before) EXPECT_TRUE(torch::equal(v, after[k])) << k;
}

TEST(Evaluate, SeriesCoverEveryFrame) {
    torch::manual_seed(8);
    auto model = build_variant(VariantSpec{}, kRes);
    auto r = evaluate_clips(model, {labelled_clip("a", 9, 15)}, ScoringConfig{});
    ASSERT_EQ(r.series.size(), 1u);
    const auto& s = r.series[0];
    EXPECT_EQ(s.scores.size(), 15u);
    EXPECT_EQ(std::count(s.scored.begin(), s.scored.end(), true), 15 - 6);
    for (double v : s.scores) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    ASSERT_TRUE(r.roc.has_value());
}

TEST(Evaluate, VideoOrderDoesNotMatter) {
    torch::manual_seed(10);
    auto model = build_variant(VariantSpec{}, kRes);
    std::vector<FrameClip> clips{labelled_clip("a", 11), labelled_clip("b", 12), labelled_clip("c", 13)};
    for (auto norm : {Normalization::PerVideo, Normalization::Global}) {
        ScoringConfig cfg;
        cfg.normalization = norm;
        auto forward = evaluate_clips(model, clips, cfg);
        std::vector<FrameClip> reversed(clips.rbegin(), clips.rend());
        auto backward = evaluate_clips(model, reversed, cfg);
        ASSERT_EQ(forward.series.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i) {
            const auto& a = forward.series[i];
            const auto& b = backward.series[2 - i];
            ASSERT_EQ(a.video_id, b.video_id);
            EXPECT_EQ(a.scores, b.scores);
        }
        EXPECT_EQ(forward.roc->auc, backward.roc->auc);
    }
}

TEST(Evaluate, MissingLabelsSkipAuc) {
    torch::manual_seed(14);
    auto model = build_variant(VariantSpec{}, kRes);
    auto clip = labelled_clip("a", 15);
    clip.labels.reset();
    auto r = evaluate_clips(model, {clip}, ScoringConfig{});
    EXPECT_EQ(r.series.size(), 1u);
    EXPECT_FALSE(r.roc.has_value());
}

TEST(Evaluate, CheckpointRoundTripGivesIdenticalAuc) {
    auto dir = bisp::testing::temp_dir("eval_ckpt");
    std::vector<FrameClip> train{bisp::testing::random_clip(10, kRes, 16)};
    std::vector<FrameClip> test{labelled_clip("a", 17), labelled_clip("b", 18)};
    TrainOptions opts;
    opts.output_dir = dir;
    auto r = train_on_clips(train, VariantSpec{}, kRes, quick_train(2), opts);
    auto direct = evaluate_clips(r.model, test, ScoringConfig{});
    auto loaded = load_checkpoint(r.checkpoint);
    auto restored = evaluate_clips(loaded.model, test, ScoringConfig{});
    EXPECT_EQ(direct.roc->auc, restored.roc->auc);
    EXPECT_EQ(direct.series[0].psnr, restored.series[0].psnr);
}

TEST(ScoreDump, RoundTrip) {
    auto dir = bisp::testing::temp_dir("dump");
    ScoreSeries s;
    s.video_id = "v1";
    s.frame_indices = {0, 1, 2};
    s.psnr = {31.25, 30.5, 29.0};
    s.scores = {0.0, 0.5, 1.0};
    s.scored = {true, true, true};
    s.labels = std::vector<int>{0, 0, 1};
    ScoreSeries t = s;
    t.video_id = "v2";
    t.labels = std::vector<int>{1, 0, 0};
    write_score_dump(dir / "scores.csv", {s, t});
    auto back = read_score_dump(dir / "scores.csv");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].video_id, "v1");
    EXPECT_EQ(back[1].video_id, "v2");
    EXPECT_EQ(back[0].psnr, s.psnr);
    EXPECT_EQ(back[0].scores, s.scores);
    EXPECT_EQ(*back[1].labels, *t.labels);
    std::ifstream in(dir / "scores.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "video_id,frame_index,psnr,score,label");

    std::ofstream(dir / "bad.csv") << "video_id,frame_index,psnr,score,label\nv,0,x,0.1,0\n";
    EXPECT_THROW(read_score_dump(dir / "bad.csv"), DataError);
}

TEST(Ablation, EmptyGridYieldsNoCells) {
    ExperimentConfig base;
    base.data.resolution = kRes;
    base.train = quick_train(1);
    EXPECT_TRUE(run_ablation_grid(base, {}, {}, {}).empty());
}

TEST(Ablation, FailingCellIsRecordedAndGridContinues) {
    ExperimentConfig base;
    base.data.resolution = kRes;
    base.train = quick_train(1);
    base.output_dir = bisp::testing::temp_dir("ablation");
    std::vector<FrameClip> train{bisp::testing::random_clip(10, kRes, 19)};
    std::vector<FrameClip> test{labelled_clip("a", 20)};
    auto cells = run_ablation_grid(base, {"bogus", "Forward"}, train, test);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_FALSE(cells[0].error.empty());
    EXPECT_FALSE(cells[0].auc.has_value());
    EXPECT_TRUE(cells[1].error.empty());
    ASSERT_TRUE(cells[1].auc.has_value());
    auto table = format_ablation_table(cells);
    EXPECT_NE(table.find("bogus"), std::string::npos);
    EXPECT_NE(table.find("Forward"), std::string::npos);
}

TEST(Ablation, GridAndSweepContents) {
    auto grid = default_ablation_grid();
    ASSERT_EQ(grid.size(), 10u);
    EXPECT_EQ(grid.front(), "model1");
    EXPECT_EQ(grid.back(), "BiSP");
    EXPECT_EQ(weight_sweep_ratios(), (std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9}));
}

TEST(Config, OverridesAndValidation) {
    auto cfg = load_config({}, {"train.learning_rate=0.001", "model=model2", "scoring.w_f=0.3"});
    EXPECT_EQ(cfg.train.learning_rate, 0.001);
    EXPECT_EQ(cfg.variant, ablation_model(2));
    EXPECT_DOUBLE_EQ(cfg.scoring.w_b, 0.7);
    EXPECT_THROW(load_config({}, {"train.batch_size=0"}), ConfigError);
    EXPECT_THROW(load_config({}, {"nonsense.key=1"}), ConfigError);
    EXPECT_THROW(load_config({}, {"scoring.w_f=0.3", "scoring.w_b=0.3"}), ConfigError);
    EXPECT_THROW(load_config({}, {"no_equals_sign"}), ConfigError);
}

TEST(Config, JsonRoundTripAndRelativePaths) {
    auto dir = bisp::testing::temp_dir("config");
    std::ofstream(dir / "c.json") << R"({"data": {"root": "data", "resolution": 64}, "output_dir": "out"})";
    auto cfg = load_config(dir / "c.json");
    EXPECT_EQ(cfg.data.root, dir / "data");
    EXPECT_EQ(cfg.output_dir, dir / "out");
    EXPECT_EQ(cfg.data.resolution, 64);
    nlohmann::json j = cfg;
    auto back = j.get<ExperimentConfig>();
    EXPECT_EQ(back.data.root, cfg.data.root);
    EXPECT_EQ(back.variant, cfg.variant);
    EXPECT_EQ(back.train.learning_rate, cfg.train.learning_rate);
}

TEST(Config, DatasetPresetsCarryPublishedWeights) {
    const fs::path configs = BISP_CONFIG_DIR;
    std::map<std::string, double> w_f{{"ped1", 0.3}, {"ped2", 0.5}, {"avenue", 0.1}, {"shanghaitech", 0.7}};
    for (const auto& [name, wf] : w_f) {
        auto cfg = load_config(configs / (name + ".json"));
        EXPECT_DOUBLE_EQ(cfg.scoring.w_f, wf) << name;
        EXPECT_DOUBLE_EQ(cfg.scoring.w_f + cfg.scoring.w_b, 1.0) << name;
        EXPECT_EQ(cfg.train.learning_rate, 2e-4);
        EXPECT_EQ(cfg.data.resolution, 256);
    }
}
