#pragma once

#include <torch/torch.h>

namespace bisp {

/// Zeroes the bias of a convolution; weights keep libtorch's fan-in scaled
/// uniform initialization.
void zero_bias(torch::nn::Conv2d& conv);
void zero_bias(torch::nn::ConvTranspose2d& conv);

/// Throws ShapeError unless `x` is a finite (B, C, H, W) tensor.
void check_feature_map(const torch::Tensor& x, const char* where);

/// Variance channel attention.
///
/// Two parallel branches re-weight the input and are added back onto it:
///   out = F + F * M_var(F) + F * M_c(F)
/// M_var is a (B, 1, H, W) spatial distribution built from the squared
/// deviation of a softmax-normalized 1x1 projection; M_c is a squeeze and
/// excitation gate of shape (B, C, 1, 1).
class VarCAImpl : public torch::nn::Module {
public:
    /// `channels` must be even.
    explicit VarCAImpl(int64_t channels);

    /// (B, 1, H*W); sums to one over the last axis for each batch item.
    torch::Tensor variance_map(const torch::Tensor& x);
    /// (B, C, 1, 1); every entry in (0, 1).
    torch::Tensor channel_map(const torch::Tensor& x);
    torch::Tensor forward(const torch::Tensor& x);

    int64_t channels() const { return channels_; }

    torch::nn::Conv2d proj_1ch{nullptr};
    torch::nn::Conv2d se_reduce{nullptr};
    torch::nn::Conv2d se_expand{nullptr};

private:
    int64_t channels_;
};
TORCH_MODULE(VarCA);

/// Context spatial attention.
///
/// Four dilated branches (kernel, dilation) = (1,1), (3,1), (3,2), (3,4),
/// 32 channels each, are concatenated to a 128-channel context map F_t.
/// A 3x3 conv over the channel-mean of F_t gives a sigmoid spatial gate;
/// the gated context is projected back to the input channel count.
class ConSAImpl : public torch::nn::Module {
public:
    static constexpr int64_t kBranchChannels = 32;
    static constexpr int64_t kContextChannels = 4 * kBranchChannels;

    explicit ConSAImpl(int64_t channels);

    /// (B, 128, H, W).
    torch::Tensor context_extract(const torch::Tensor& x);
    /// Gate for a context map: (B, 1, H, W) in (0, 1).
    torch::Tensor spatial_map(const torch::Tensor& context);
    torch::Tensor forward(const torch::Tensor& x);

    int64_t channels() const { return channels_; }

    torch::nn::ModuleList branches{nullptr};
    torch::nn::Conv2d spatial_conv{nullptr};
    torch::nn::Conv2d out_proj{nullptr};

private:
    int64_t channels_;
};
TORCH_MODULE(ConSA);

} // namespace bisp
