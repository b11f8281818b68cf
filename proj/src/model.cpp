#include "bisp/model.hpp"

#include "bisp/errors.hpp"

#include <algorithm>
#include <cctype>

namespace bisp {

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::BiSP: return "BiSP";
    case Strategy::Forward: return "Forward";
    case Strategy::Backward: return "Backward";
    case Strategy::Fusion: return "Fusion";
    }
    return "BiSP";
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

} // namespace

Strategy parse_strategy(const std::string& s) {
    const auto l = lower(s);
    if (l == "bisp") return Strategy::BiSP;
    if (l == "forward") return Strategy::Forward;
    if (l == "backward") return Strategy::Backward;
    if (l == "fusion") return Strategy::Fusion;
    throw ConfigError("unknown strategy '" + s + "' (expected BiSP, Forward, Backward or Fusion)");
}

std::string VariantSpec::name() const {
    std::string n = to_string(strategy);
    std::string off;
    if (!skip_frames) off += "-skipf,";
    if (!varca) off += "-varca,";
    if (!consa) off += "-consa,";
    if (!off.empty()) {
        off.pop_back();
        n += "[" + off + "]";
    }
    return n;
}

VariantSpec ablation_model(int index) {
    // SkipF, VarCA, ConSA per ablation row.
    static constexpr bool kRows[6][3] = {
        {false, false, false}, {true, false, false}, {true, true, false},
        {true, false, true},   {false, true, true},  {true, true, true},
    };
    if (index < 1 || index > 6) throw ConfigError("ablation model index must be 1..6");
    const auto& r = kRows[index - 1];
    return VariantSpec{Strategy::BiSP, r[0], r[1], r[2]};
}

VariantSpec VariantSpec::parse(const std::string& name) {
    const auto l = lower(name);
    if (l.size() == 6 && l.rfind("model", 0) == 0 && l[5] >= '1' && l[5] <= '6') {
        return ablation_model(l[5] - '0');
    }
    return VariantSpec{parse_strategy(name)};
}

namespace {

torch::nn::Sequential conv_bn_relu(torch::nn::Sequential seq, int64_t in, int64_t out) {
    torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, out, 3).padding(1));
    zero_bias(conv);
    seq->push_back(conv);
    seq->push_back(torch::nn::BatchNorm2d(out));
    seq->push_back(torch::nn::ReLU());
    return seq;
}

torch::nn::Sequential conv_pair(int64_t in, int64_t out) {
    auto seq = conv_bn_relu(torch::nn::Sequential(), in, out);
    return conv_bn_relu(seq, out, out);
}

torch::nn::Sequential deconv_bn_relu(int64_t in, int64_t out) {
    // Kernel 3, stride 2, padding 1, output padding 1: exactly doubles H and W.
    torch::nn::ConvTranspose2d deconv(
        torch::nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1));
    zero_bias(deconv);
    torch::nn::Sequential seq;
    seq->push_back(deconv);
    seq->push_back(torch::nn::BatchNorm2d(out));
    seq->push_back(torch::nn::ReLU());
    return seq;
}

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (a.sizes() != b.sizes()) throw ShapeError(std::string("decode: mismatched ") + what + " shape");
}

} // namespace

AutoEncoderImpl::AutoEncoderImpl(int64_t resolution, bool use_varca, bool use_consa)
    : resolution_(resolution), use_varca_(use_varca), use_consa_(use_consa) {
    if (resolution < 8 || resolution % 8 != 0) {
        throw ConfigError("resolution must be a positive multiple of 8, got " + std::to_string(resolution));
    }
    enc1 = register_module("enc1", conv_pair(kInputChannels, 32));
    enc2 = register_module("enc2", conv_pair(32, 64));
    enc3 = register_module("enc3", conv_pair(64, 128));
    {
        auto seq = conv_bn_relu(torch::nn::Sequential(), 128, 256);
        torch::nn::Conv2d last(torch::nn::Conv2dOptions(256, kLatentChannels, 3).padding(1));
        zero_bias(last);
        seq->push_back(last);
        enc4 = register_module("enc4", seq);
    }

    dec4 = register_module("dec4", conv_pair(kLatentChannels, 256));
    constexpr int64_t kWidths[3] = {32, 64, 128};
    for (int level = 2; level >= 0; --level) {
        const int64_t out = kWidths[level];
        const int64_t in = level == 2 ? 256 : kWidths[level + 1];
        const auto tag = std::to_string(level);
        up[level] = register_module("up" + tag, deconv_bn_relu(in, out));
        if (use_varca_) skip_attention[level] = register_module("varca" + tag, VarCA(out));
        if (use_consa_) decode_attention[level] = register_module("consa" + tag, ConSA(out));
        dec[level] = register_module("dec" + tag, conv_pair(out, out));
    }
    out_conv = torch::nn::Conv2d(torch::nn::Conv2dOptions(32, kOutputChannels, 3).padding(1));
    zero_bias(out_conv);
    register_module("out_conv", out_conv);
}

Encoded AutoEncoderImpl::encode(const torch::Tensor& inputs) {
    if (inputs.dim() != 4 || inputs.size(1) != kInputChannels) {
        throw ShapeError("encode: expected (B, 9, H, W) input");
    }
    if (inputs.size(2) != resolution_ || inputs.size(3) != resolution_) {
        throw ShapeError("encode: expected " + std::to_string(resolution_) + "x" + std::to_string(resolution_) +
                         " input, got " + std::to_string(inputs.size(2)) + "x" + std::to_string(inputs.size(3)));
    }
    namespace F = torch::nn::functional;
    const auto pool = F::MaxPool2dFuncOptions(2).stride(2);
    Encoded e;
    e.skips[0] = enc1->forward(inputs);
    e.skips[1] = enc2->forward(F::max_pool2d(e.skips[0], pool));
    e.skips[2] = enc3->forward(F::max_pool2d(e.skips[1], pool));
    e.latent = enc4->forward(F::max_pool2d(e.skips[2], pool));
    return e;
}

torch::Tensor AutoEncoderImpl::decode(const torch::Tensor& latent, const std::array<torch::Tensor, 3>& skips) {
    const int64_t s = resolution_ / 8;
    if (latent.dim() != 4 || latent.size(1) != kLatentChannels || latent.size(2) != s || latent.size(3) != s) {
        throw ShapeError("decode: latent must be (B, 256, " + std::to_string(s) + ", " + std::to_string(s) + ")");
    }
    auto y = dec4->forward(latent);
    for (int level = 2; level >= 0; --level) {
        y = up[level]->forward(y);
        check_same_shape(y, skips[level], "skip");
        auto skip = use_varca_ ? skip_attention[level]->forward(skips[level]) : skips[level];
        y = y + skip;
        if (use_consa_) y = decode_attention[level]->forward(y);
        y = dec[level]->forward(y);
    }
    return torch::tanh(out_conv->forward(y));
}

torch::Tensor AutoEncoderImpl::forward(const torch::Tensor& inputs) {
    auto e = encode(inputs);
    return decode(e.latent, e.skips);
}

BiSPModelImpl::BiSPModelImpl(VariantSpec variant, int64_t resolution)
    : variant_(variant), resolution_(resolution) {
    if (variant_.has_forward()) {
        forward_ae = register_module("forward_ae", AutoEncoder(resolution, variant_.varca, variant_.consa));
    }
    if (variant_.has_backward()) {
        backward_ae = register_module("backward_ae", AutoEncoder(resolution, variant_.varca, variant_.consa));
    }
}

PredictionPair BiSPModelImpl::predict_pair(const torch::Tensor& forward_inputs,
                                           const torch::Tensor& backward_inputs) {
    PredictionPair pair;
    if (variant_.strategy == Strategy::Fusion) {
        auto ef = forward_ae->encode(forward_inputs);
        auto eb = backward_ae->encode(backward_inputs);
        auto fused = ef.latent + eb.latent;
        pair.forward = forward_ae->decode(fused, ef.skips);
        pair.backward = backward_ae->decode(fused, eb.skips);
        return pair;
    }
    if (forward_ae) {
        if (!forward_inputs.defined()) throw ShapeError("predict_pair: forward inputs missing");
        pair.forward = forward_ae->forward(forward_inputs);
    }
    if (backward_ae) {
        if (!backward_inputs.defined()) throw ShapeError("predict_pair: backward inputs missing");
        pair.backward = backward_ae->forward(backward_inputs);
    }
    return pair;
}

BiSPModel build_variant(const VariantSpec& variant, int64_t resolution) {
    return BiSPModel(variant, resolution);
}

int64_t parameter_count(torch::nn::Module& module) {
    int64_t n = 0;
    for (const auto& p : module.parameters()) n += p.numel();
    return n;
}

} // namespace bisp
