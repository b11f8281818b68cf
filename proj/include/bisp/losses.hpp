#pragma once

#include "bisp/model.hpp"

#include <torch/torch.h>

namespace bisp {

/// Scalar components of the training objective. Tensors are 0-dim and keep
/// their autograd history; `total` is the unweighted sum of the others.
struct LossBundle {
    torch::Tensor l_fp;
    torch::Tensor l_bp;
    torch::Tensor l_con;
    torch::Tensor total;
};

/// Mean squared error over every pixel and channel.
torch::Tensor prediction_loss(const torch::Tensor& pred, const torch::Tensor& target);

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// Mean SSIM of two frames or batches, (3, H, W) or (B, 3, H, W), with
/// values in [-1, 1]. Inputs are rescaled to [0, 1]; statistics use a
/// Gaussian window evaluated only where it fits inside the image.
torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& options = {});

/// 1 - SSIM between the two predicted frames.
torch::Tensor consistency_loss(const torch::Tensor& pred_f, const torch::Tensor& pred_b);

struct PredictionTargets {
    torch::Tensor forward;
    torch::Tensor backward;
};

/// Bidirectional loss. Single-stream variants contribute only their own
/// prediction term; the consistency term needs both predictions.
LossBundle total_loss(const PredictionPair& pair, const PredictionTargets& targets);

} // namespace bisp
