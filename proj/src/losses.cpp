#include "bisp/losses.hpp"

#include "bisp/errors.hpp"

#include <cmath>

namespace bisp {

torch::Tensor prediction_loss(const torch::Tensor& pred, const torch::Tensor& target) {
    if (pred.sizes() != target.sizes()) throw ShapeError("prediction_loss: shape mismatch");
    return (pred - target).pow(2).mean();
}

namespace {

torch::Tensor gaussian_window(int size, double sigma, const torch::TensorOptions& opts) {
    auto x = torch::arange(size, opts) - (size - 1) / 2.0;
    auto g = torch::exp(-x.pow(2) / (2.0 * sigma * sigma));
    g = g / g.sum();
    return torch::outer(g, g);
}

} // namespace

torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& options) {
    if (a.sizes() != b.sizes()) throw ShapeError("ssim: shape mismatch");
    auto x = a.dim() == 3 ? a.unsqueeze(0) : a;
    auto y = b.dim() == 3 ? b.unsqueeze(0) : b;
    if (x.dim() != 4) throw ShapeError("ssim: expected (C, H, W) or (B, C, H, W)");
    if (x.size(2) < options.window || x.size(3) < options.window) {
        throw ShapeError("ssim: image smaller than the " + std::to_string(options.window) + "x" +
                         std::to_string(options.window) + " window");
    }
    x = (x + 1.0) * 0.5;
    y = (y + 1.0) * 0.5;

    const auto channels = x.size(1);
    auto window = gaussian_window(options.window, options.sigma, x.options())
                      .expand({channels, 1, options.window, options.window})
                      .contiguous();
    auto filter = [&](const torch::Tensor& t) {
        return torch::nn::functional::conv2d(t, window, torch::nn::functional::Conv2dFuncOptions().groups(channels));
    };

    constexpr double kRange = 1.0;
    const double c1 = std::pow(options.k1 * kRange, 2);
    const double c2 = std::pow(options.k2 * kRange, 2);

    auto mu_x = filter(x);
    auto mu_y = filter(y);
    auto mu_xx = mu_x * mu_x;
    auto mu_yy = mu_y * mu_y;
    auto mu_xy = mu_x * mu_y;
    auto var_x = filter(x * x) - mu_xx;
    auto var_y = filter(y * y) - mu_yy;
    auto cov = filter(x * y) - mu_xy;

    auto map = ((2 * mu_xy + c1) * (2 * cov + c2)) / ((mu_xx + mu_yy + c1) * (var_x + var_y + c2));
    return map.mean();
}

torch::Tensor consistency_loss(const torch::Tensor& pred_f, const torch::Tensor& pred_b) {
    return 1.0 - ssim(pred_f, pred_b);
}

LossBundle total_loss(const PredictionPair& pair, const PredictionTargets& targets) {
    if (!pair.forward.defined() && !pair.backward.defined()) {
        throw ShapeError("total_loss: no predictions");
    }
    const auto& any = pair.forward.defined() ? pair.forward : pair.backward;
    auto zero = torch::zeros({}, any.options());

    LossBundle out;
    out.l_fp = pair.forward.defined() ? prediction_loss(pair.forward, targets.forward) : zero;
    out.l_bp = pair.backward.defined() ? prediction_loss(pair.backward, targets.backward) : zero;
    out.l_con = pair.forward.defined() && pair.backward.defined() ? consistency_loss(pair.forward, pair.backward)
                                                                  : zero;
    out.total = out.l_fp + out.l_bp + out.l_con;
    return out;
}

} // namespace bisp
