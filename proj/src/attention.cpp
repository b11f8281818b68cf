#include "bisp/attention.hpp"

#include "bisp/errors.hpp"

#include <array>
#include <string>
#include <utility>

namespace bisp {

namespace F = torch::nn::functional;

void zero_bias(torch::nn::Conv2d& conv) {
    torch::NoGradGuard guard;
    if (conv->bias.defined()) conv->bias.zero_();
}

void zero_bias(torch::nn::ConvTranspose2d& conv) {
    torch::NoGradGuard guard;
    if (conv->bias.defined()) conv->bias.zero_();
}

void check_feature_map(const torch::Tensor& x, const char* where) {
    if (x.dim() != 4 || x.size(0) < 1 || x.size(1) < 1 || x.size(2) < 1 || x.size(3) < 1) {
        throw ShapeError(std::string(where) + ": expected a non-empty (B, C, H, W) tensor");
    }
    if (!torch::isfinite(x).all().item<bool>()) {
        throw ShapeError(std::string(where) + ": non-finite input");
    }
}

namespace {

torch::nn::Conv2d pointwise(int64_t in, int64_t out) {
    torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, out, 1));
    zero_bias(conv);
    return conv;
}

} // namespace

VarCAImpl::VarCAImpl(int64_t channels) : channels_(channels) {
    if (channels < 2 || channels % 2 != 0) {
        throw ConfigError("VarCA needs an even channel count, got " + std::to_string(channels));
    }
    proj_1ch = register_module("proj_1ch", pointwise(channels, 1));
    se_reduce = register_module("se_reduce", pointwise(channels, channels / 2));
    se_expand = register_module("se_expand", pointwise(channels / 2, channels));
}

torch::Tensor VarCAImpl::variance_map(const torch::Tensor& x) {
    check_feature_map(x, "VarCA");
    const auto batch = x.size(0);
    // F_a: softmax over the H*W positions of a single-channel projection.
    auto fa = torch::softmax(proj_1ch->forward(x).reshape({batch, -1}), 1);
    auto deviation = (fa - fa.mean(1, /*keepdim=*/true)).pow(2);
    return torch::softmax(deviation, 1).unsqueeze(1);
}

torch::Tensor VarCAImpl::channel_map(const torch::Tensor& x) {
    check_feature_map(x, "VarCA");
    auto pooled = F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions({1, 1}));
    return torch::sigmoid(se_expand->forward(torch::relu(se_reduce->forward(pooled))));
}

torch::Tensor VarCAImpl::forward(const torch::Tensor& x) {
    check_feature_map(x, "VarCA");
    if (x.size(1) != channels_) throw ShapeError("VarCA: channel mismatch");
    const auto b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
    // Same spatial weight for every channel of the (B, C, H*W) view.
    auto f_var = (x.reshape({b, c, h * w}) * variance_map(x)).reshape({b, c, h, w});
    auto f_c = x * channel_map(x);
    return x + f_var + f_c;
}

ConSAImpl::ConSAImpl(int64_t channels) : channels_(channels) {
    if (channels < 1) throw ConfigError("ConSA needs at least one channel");
    constexpr std::array<std::pair<int64_t, int64_t>, 4> kLadder{{{1, 1}, {3, 1}, {3, 2}, {3, 4}}};
    branches = register_module("branches", torch::nn::ModuleList());
    for (auto [kernel, dilation] : kLadder) {
        torch::nn::Conv2d conv(torch::nn::Conv2dOptions(channels, kBranchChannels, kernel)
                                   .dilation(dilation)
                                   .padding(dilation * (kernel / 2)));
        zero_bias(conv);
        branches->push_back(conv);
    }
    spatial_conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 1, 3).padding(1));
    zero_bias(spatial_conv);
    register_module("spatial_conv", spatial_conv);
    out_proj = register_module("out_proj", pointwise(kContextChannels, channels));
}

torch::Tensor ConSAImpl::context_extract(const torch::Tensor& x) {
    check_feature_map(x, "ConSA");
    if (x.size(1) != channels_) throw ShapeError("ConSA: channel mismatch");
    std::vector<torch::Tensor> parts;
    parts.reserve(branches->size());
    for (const auto& branch : *branches) {
        parts.push_back(branch->as<torch::nn::Conv2d>()->forward(x));
    }
    return torch::cat(parts, 1);
}

torch::Tensor ConSAImpl::spatial_map(const torch::Tensor& context) {
    return torch::sigmoid(spatial_conv->forward(context.mean(1, /*keepdim=*/true)));
}

torch::Tensor ConSAImpl::forward(const torch::Tensor& x) {
    auto context = context_extract(x);
    return out_proj->forward(context * spatial_map(context));
}

} // namespace bisp
