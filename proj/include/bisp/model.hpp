#pragma once

#include "bisp/attention.hpp"
#include "bisp/data_pipeline.hpp"

#include <torch/torch.h>

#include <array>
#include <string>

namespace bisp {

/// Which streams are trained and how their features meet.
enum class Strategy {
    BiSP,      // two independent AEs
    Forward,   // forward AE only
    Backward,  // backward AE only
    Fusion,    // two AEs, each decoder consumes the sum of both latents
};

struct VariantSpec {
    Strategy strategy = Strategy::BiSP;
    bool skip_frames = true;
    bool varca = true;
    bool consa = true;

    bool has_forward() const { return strategy != Strategy::Backward; }
    bool has_backward() const { return strategy != Strategy::Forward; }
    SamplingMode sampling() const {
        return skip_frames ? SamplingMode::SkipFrame : SamplingMode::Consecutive;
    }
    /// Canonical name, e.g. "BiSP", "Fusion" or "BiSP[-skipf,-varca]".
    std::string name() const;

    /// Accepts "BiSP", "Forward", "Backward", "Fusion" and the ablation rows
    /// "model1" .. "model6". Throws ConfigError otherwise.
    static VariantSpec parse(const std::string& name);

    friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

/// Ablation rows: model1 (no SkipF, no VarCA, no ConSA) .. model6 (all on).
VariantSpec ablation_model(int index);

struct Encoded {
    torch::Tensor latent;               // (B, 256, H/8, W/8)
    std::array<torch::Tensor, 3> skips; // pre-pool: (B,32,H,W), (B,64,H/2,W/2), (B,128,H/4,W/4)
};

/// One encoder/decoder network. Attention blocks replaced by identity when
/// disabled.
class AutoEncoderImpl : public torch::nn::Module {
public:
    static constexpr int64_t kInputChannels = 9;
    static constexpr int64_t kOutputChannels = 3;
    static constexpr int64_t kLatentChannels = 256;

    AutoEncoderImpl(int64_t resolution, bool use_varca, bool use_consa);

    Encoded encode(const torch::Tensor& inputs);
    torch::Tensor decode(const torch::Tensor& latent, const std::array<torch::Tensor, 3>& skips);
    torch::Tensor forward(const torch::Tensor& inputs);

    int64_t resolution() const { return resolution_; }
    bool uses_varca() const { return use_varca_; }
    bool uses_consa() const { return use_consa_; }

private:
    int64_t resolution_;
    bool use_varca_;
    bool use_consa_;

    torch::nn::Sequential enc1{nullptr}, enc2{nullptr}, enc3{nullptr}, enc4{nullptr};
    torch::nn::Sequential dec4{nullptr};
    std::array<torch::nn::Sequential, 3> up{};    // indexed by skip level 0..2
    std::array<torch::nn::Sequential, 3> dec{};
    std::array<VarCA, 3> skip_attention{VarCA{nullptr}, VarCA{nullptr}, VarCA{nullptr}};
    std::array<ConSA, 3> decode_attention{ConSA{nullptr}, ConSA{nullptr}, ConSA{nullptr}};
    torch::nn::Conv2d out_conv{nullptr};
};
TORCH_MODULE(AutoEncoder);

/// Predicted frames of both streams. A stream missing from the variant
/// leaves its tensor undefined.
struct PredictionPair {
    torch::Tensor forward;
    torch::Tensor backward;
};

class BiSPModelImpl : public torch::nn::Module {
public:
    BiSPModelImpl(VariantSpec variant, int64_t resolution);

    /// Inputs are (B, 9, H, W) stacked triples; either may be undefined when
    /// the variant lacks that stream.
    PredictionPair predict_pair(const torch::Tensor& forward_inputs, const torch::Tensor& backward_inputs);

    const VariantSpec& variant() const { return variant_; }
    int64_t resolution() const { return resolution_; }

    AutoEncoder forward_ae{nullptr};
    AutoEncoder backward_ae{nullptr};

private:
    VariantSpec variant_;
    int64_t resolution_;
};
TORCH_MODULE(BiSPModel);

BiSPModel build_variant(const VariantSpec& variant, int64_t resolution);

int64_t parameter_count(torch::nn::Module& module);

} // namespace bisp
