#include "bisp/errors.hpp"
#include "bisp/losses.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bisp;

namespace {

torch::Tensor checkerboard(int size) {
    auto idx = torch::arange(size);
    auto board = (idx.unsqueeze(1) + idx.unsqueeze(0)).remainder(2).to(torch::kFloat32) * 2 - 1;
    return board.unsqueeze(0).expand({3, size, size}).contiguous();
}

} // namespace

TEST(PredictionLoss, ZeroForIdenticalFrames) {
    auto x = torch::rand({3, 8, 8});
    EXPECT_EQ(prediction_loss(x, x).item<float>(), 0.0f);
}

TEST(PredictionLoss, ConstantOffset) {
    auto t = torch::zeros({3, 8, 8}, torch::kFloat64);
    EXPECT_NEAR(prediction_loss(t + 0.1, t).item<double>(), 0.01, 1e-15);
}

TEST(PredictionLoss, Symmetric) {
    auto a = torch::randn({3, 6, 6});
    auto b = torch::randn({3, 6, 6});
    EXPECT_EQ(prediction_loss(a, b).item<float>(), prediction_loss(b, a).item<float>());
}

TEST(PredictionLoss, ShapeMismatchThrows) {
    EXPECT_THROW(prediction_loss(torch::zeros({3, 4, 4}), torch::zeros({3, 4, 5})), ShapeError);
}

TEST(Ssim, IdentityIsOne) {
    auto x = torch::rand({3, 16, 16}) * 2 - 1;
    EXPECT_NEAR(ssim(x, x).item<float>(), 1.0f, 1e-6);
}

TEST(Ssim, InvertedCheckerboardIsDissimilar) {
    auto x = checkerboard(16).to(torch::kFloat64);
    const double oracle_value = oracle::direct_ssim(x, -x);
    EXPECT_LT(oracle_value, 0.1);
    EXPECT_NEAR(ssim(x, -x).item<double>(), oracle_value, 1e-9);
}

TEST(Ssim, MatchesDirectWindowEvaluation) {
    torch::manual_seed(8);
    for (int trial = 0; trial < 5; ++trial) {
        auto a = torch::rand({3, 14, 13}, torch::kFloat64) * 2 - 1;
        auto b = (a + 0.3 * torch::randn({3, 14, 13}, torch::kFloat64)).clamp(-1, 1);
        EXPECT_NEAR(ssim(a, b).item<double>(), oracle::direct_ssim(a, b), 1e-9);
    }
}

TEST(Ssim, Symmetric) {
    auto a = torch::rand({3, 12, 12}) * 2 - 1;
    auto b = torch::rand({3, 12, 12}) * 2 - 1;
    EXPECT_NEAR(ssim(a, b).item<float>(), ssim(b, a).item<float>(), 1e-7);
}

TEST(Ssim, ImagesSmallerThanWindowThrow) {
    EXPECT_THROW(ssim(torch::zeros({3, 8, 8}), torch::zeros({3, 8, 8})), ShapeError);
}

TEST(ConsistencyLoss, IdenticalPredictionsGiveExactlyZero) {
    torch::manual_seed(1);
    for (int trial = 0; trial < 10; ++trial) {
        auto x = torch::rand({2, 3, 16, 16}) * 2 - 1;
        EXPECT_EQ(consistency_loss(x, x).item<float>(), 0.0f);
    }
}

TEST(LossesProperty, ConsistencyLossStaysInRange) {
    torch::manual_seed(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = torch::rand({3, 12, 12}) * 2 - 1;
        auto b = trial % 2 ? -a : torch::rand({3, 12, 12}) * 2 - 1;
        const float v = consistency_loss(a, b).item<float>();
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 2.0f);
    }
}

TEST(LossesProperty, ShiftingANonConstantImageIncreasesLoss) {
    std::mt19937 rng(5);
    torch::manual_seed(5);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = torch::rand({3, 10, 10}) * 2 - 1;
        const int64_t shift = 1 + rng() % 4;
        auto shifted = torch::roll(x, {shift}, {2});
        ASSERT_GT(prediction_loss(shifted, x).item<float>(), prediction_loss(x, x).item<float>());
    }
}

TEST(TotalLoss, PerfectPredictionsOfIdenticalTargetsGiveZero) {
    auto t = torch::rand({1, 3, 16, 16}) * 2 - 1;
    auto bundle = total_loss({t, t}, {t, t});
    EXPECT_EQ(bundle.total.item<float>(), 0.0f);
}

TEST(TotalLoss, ComponentsAreNonNegativeAndSumToTotal) {
    torch::manual_seed(4);
    for (int trial = 0; trial < 20; ++trial) {
        PredictionPair pair{torch::rand({2, 3, 16, 16}) * 2 - 1, torch::rand({2, 3, 16, 16}) * 2 - 1};
        PredictionTargets targets{torch::rand({2, 3, 16, 16}) * 2 - 1, torch::rand({2, 3, 16, 16}) * 2 - 1};
        auto b = total_loss(pair, targets);
        EXPECT_GE(b.l_fp.item<float>(), 0.0f);
        EXPECT_GE(b.l_bp.item<float>(), 0.0f);
        EXPECT_GE(b.l_con.item<float>(), 0.0f);
        const double sum = b.l_fp.item<double>() + b.l_bp.item<double>() + b.l_con.item<double>();
        EXPECT_NEAR(b.total.item<double>(), sum, 1e-6);
    }
}

TEST(TotalLoss, ConsistencyComparesPredictionsNotTargets) {
    // Different targets, identical predictions: the consistency term is zero.
    auto p = torch::rand({1, 3, 16, 16}) * 2 - 1;
    auto b = total_loss({p, p}, {torch::zeros_like(p), torch::ones_like(p)});
    EXPECT_EQ(b.l_con.item<float>(), 0.0f);
    EXPECT_GT(b.l_fp.item<float>(), 0.0f);
}

TEST(TotalLoss, SingleStreamHasNoConsistencyTerm) {
    auto p = torch::rand({1, 3, 16, 16});
    auto b = total_loss({p, torch::Tensor()}, {torch::zeros_like(p), torch::Tensor()});
    EXPECT_EQ(b.l_con.item<float>(), 0.0f);
    EXPECT_EQ(b.l_bp.item<float>(), 0.0f);
    EXPECT_FLOAT_EQ(b.total.item<float>(), b.l_fp.item<float>());
}

TEST(LossGradients, PredictionLossMatchesCentralDifferences) {
    auto pred = torch::rand({3, 8, 8}, torch::kFloat64) * 2 - 1;
    auto target = torch::rand({3, 8, 8}, torch::kFloat64) * 2 - 1;
    auto pg = pred.clone().requires_grad_(true);
    auto analytic = torch::autograd::grad({prediction_loss(pg, target)}, {pg})[0];
    auto numeric = oracle::numeric_gradient(
        [&](const torch::Tensor& p) { return prediction_loss(p, target).item<double>(); }, pred);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-3);
}

TEST(LossGradients, ConsistencyLossMatchesCentralDifferences) {
    // SSIM needs the full 11x11 window, so 12x12 frames are the smallest
    // size with more than one window position.
    torch::manual_seed(6);
    auto a = torch::rand({3, 12, 12}, torch::kFloat64) * 2 - 1;
    auto b = torch::rand({3, 12, 12}, torch::kFloat64) * 2 - 1;
    auto ag = a.clone().requires_grad_(true);
    auto analytic = torch::autograd::grad({consistency_loss(ag, b)}, {ag})[0];
    auto numeric = oracle::numeric_gradient(
        [&](const torch::Tensor& x) { return consistency_loss(x, b).item<double>(); }, a);
    EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-3);
}
