#include "bisp/config.hpp"

#include "bisp/errors.hpp"
#include "bisp/variant_json.hpp"

#include <fstream>

namespace bisp {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
    if (epochs < 1 && max_steps <= 0) throw ConfigError("train.epochs must be at least 1");
    if (log_every < 1) throw ConfigError("train.log_every must be at least 1");
}

namespace {

std::string normalization_name(Normalization n) { return n == Normalization::Global ? "global" : "per_video"; }

Normalization parse_normalization(const std::string& s) {
    if (s == "per_video") return Normalization::PerVideo;
    if (s == "global") return Normalization::Global;
    throw ConfigError("scoring.normalization must be per_video or global");
}

} // namespace

void to_json(json& j, const ExperimentConfig& c) {
    std::vector<std::string> modes;
    for (auto m : c.synth.anomaly_modes) modes.push_back(synth::to_string(m));
    j = json{
        {"data", {{"root", c.data.root.string()}, {"resolution", c.data.resolution}}},
        {"model", c.variant},
        {"train",
         {{"learning_rate", c.train.learning_rate},
          {"batch_size", c.train.batch_size},
          {"epochs", c.train.epochs},
          {"seed", c.train.seed},
          {"max_steps", c.train.max_steps},
          {"log_every", c.train.log_every},
          {"checkpoint_every_epoch", c.train.checkpoint_every_epoch}}},
        {"scoring",
         {{"w_f", c.scoring.w_f},
          {"w_b", c.scoring.w_b},
          {"pool_sizes", c.scoring.pool_sizes},
          {"smooth_sigma", c.scoring.smooth_sigma},
          {"epsilon", c.scoring.epsilon},
          {"normalization", normalization_name(c.scoring.normalization)}}},
        {"synth",
         {{"num_train_videos", c.synth.num_train_videos},
          {"num_test_videos", c.synth.num_test_videos},
          {"frames_per_video", c.synth.frames_per_video},
          {"height", c.synth.height},
          {"width", c.synth.width},
          {"normal_speed", c.synth.normal_speed},
          {"fast_speed", c.synth.fast_speed},
          {"sprites_per_video", c.synth.sprites_per_video},
          {"anomaly_length", c.synth.anomaly_length},
          {"anomaly_modes", modes},
          {"layout", c.synth.layout == synth::Layout::Ped2 ? "ped2" : "default"},
          {"seed", c.synth.seed}}},
        {"ablation", {{"variants", c.ablation.variants}, {"weight_sweep", c.ablation.weight_sweep}}},
        {"output_dir", c.output_dir.string()},
        {"checkpoint", c.checkpoint.string()},
    };
}

void from_json(const json& j, ExperimentConfig& c) {
    static const std::vector<std::string> kTopLevel{"data",  "model",    "train",      "scoring",
                                                    "synth", "ablation", "output_dir", "checkpoint"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(kTopLevel.begin(), kTopLevel.end(), key) == kTopLevel.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        c.data.root = d.value("root", c.data.root.string());
        c.data.resolution = d.value("resolution", c.data.resolution);
    }
    if (j.contains("model")) c.variant = j.at("model").get<VariantSpec>();
    if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.seed = t.value("seed", c.train.seed);
        c.train.max_steps = t.value("max_steps", c.train.max_steps);
        c.train.log_every = t.value("log_every", c.train.log_every);
        c.train.checkpoint_every_epoch = t.value("checkpoint_every_epoch", c.train.checkpoint_every_epoch);
    }
    if (j.contains("scoring")) {
        const auto& s = j.at("scoring");
        c.scoring.w_f = s.value("w_f", c.scoring.w_f);
        c.scoring.w_b = s.value("w_b", c.scoring.w_b);
        // A lone weight implies its complement.
        if (s.contains("w_f") && !s.contains("w_b")) c.scoring.w_b = 1.0 - c.scoring.w_f;
        if (s.contains("w_b") && !s.contains("w_f")) c.scoring.w_f = 1.0 - c.scoring.w_b;
        c.scoring.pool_sizes = s.value("pool_sizes", c.scoring.pool_sizes);
        c.scoring.smooth_sigma = s.value("smooth_sigma", c.scoring.smooth_sigma);
        c.scoring.epsilon = s.value("epsilon", c.scoring.epsilon);
        if (s.contains("normalization")) c.scoring.normalization = parse_normalization(s.at("normalization"));
    }
    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        auto& p = c.synth;
        p.num_train_videos = s.value("num_train_videos", p.num_train_videos);
        p.num_test_videos = s.value("num_test_videos", p.num_test_videos);
        p.frames_per_video = s.value("frames_per_video", p.frames_per_video);
        p.height = s.value("height", p.height);
        p.width = s.value("width", p.width);
        p.normal_speed = s.value("normal_speed", p.normal_speed);
        p.fast_speed = s.value("fast_speed", p.fast_speed);
        p.sprites_per_video = s.value("sprites_per_video", p.sprites_per_video);
        p.anomaly_length = s.value("anomaly_length", p.anomaly_length);
        p.seed = s.value("seed", p.seed);
        if (s.contains("anomaly_modes")) {
            p.anomaly_modes.clear();
            for (const auto& m : s.at("anomaly_modes")) p.anomaly_modes.push_back(synth::parse_anomaly_mode(m));
        }
        if (s.contains("layout")) {
            const auto l = s.at("layout").get<std::string>();
            if (l != "default" && l != "ped2") throw ConfigError("synth.layout must be default or ped2");
            p.layout = l == "ped2" ? synth::Layout::Ped2 : synth::Layout::Default;
        }
    }
    if (j.contains("ablation")) {
        const auto& a = j.at("ablation");
        c.ablation.variants = a.value("variants", c.ablation.variants);
        c.ablation.weight_sweep = a.value("weight_sweep", c.ablation.weight_sweep);
    }
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.checkpoint = j.value("checkpoint", c.checkpoint.string());
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
        if (!node->is_object()) *node = json::object();
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
}

namespace {

void resolve_relative(json& doc, const char* section, const char* key, const std::filesystem::path& base) {
    json* node = &doc;
    if (section) {
        if (!doc.contains(section)) return;
        node = &doc[section];
    }
    if (!node->contains(key) || !(*node)[key].is_string()) return;
    std::filesystem::path p = (*node)[key].get<std::string>();
    if (!p.empty() && p.is_relative()) (*node)[key] = (base / p).lexically_normal().string();
}

} // namespace

ExperimentConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    json doc = json::object();
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw ConfigError("cannot open config " + file.string());
        try {
            doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
        } catch (const json::exception& e) {
            throw ConfigError("cannot parse " + file.string() + ": " + e.what());
        }
        const auto base = file.parent_path();
        resolve_relative(doc, "data", "root", base);
        resolve_relative(doc, nullptr, "output_dir", base);
        resolve_relative(doc, nullptr, "checkpoint", base);
    }
    for (const auto& o : overrides) apply_override(doc, o);

    ExperimentConfig cfg;
    try {
        cfg = doc.get<ExperimentConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    cfg.train.validate();
    cfg.scoring.validate();
    if (cfg.data.resolution < 8 || cfg.data.resolution % 8 != 0) {
        throw ConfigError("data.resolution must be a positive multiple of 8");
    }
    for (int p : cfg.scoring.pool_sizes) {
        if (p > cfg.data.resolution) throw ConfigError("pool size exceeds data.resolution");
    }
    return cfg;
}

ExperimentConfig synthetic_preset() {
    ExperimentConfig c;
    c.data.resolution = 128;
    c.train.epochs = 5;
    c.train.batch_size = 4;
    c.synth.num_train_videos = 8;
    c.synth.num_test_videos = 4;
    c.synth.frames_per_video = 60;
    c.synth.anomaly_modes = {synth::AnomalyMode::FastMotion, synth::AnomalyMode::NovelShape};
    return c;
}

} // namespace bisp
