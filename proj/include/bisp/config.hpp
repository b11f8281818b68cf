#pragma once

#include "bisp/model.hpp"
#include "bisp/scoring.hpp"
#include "bisp/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bisp {

struct DataConfig {
    std::filesystem::path root;
    int resolution = 256;
};

struct TrainConfig {
    double learning_rate = 2e-4;
    int batch_size = 4;
    int epochs = 5;
    std::uint64_t seed = 0;
    /// Stops after this many optimizer steps when positive; the cosine
    /// schedule then spans exactly this many steps.
    int64_t max_steps = 0;
    int log_every = 10;
    /// Write a checkpoint after every epoch as well as at the end.
    bool checkpoint_every_epoch = false;

    void validate() const;
};

struct AblationConfig {
    /// Grid entries by name ("model1".."model6", "Forward", "Backward",
    /// "Fusion", "BiSP"). Empty means the full default grid.
    std::vector<std::string> variants;
    /// Also evaluate the fusion-weight ratios 1:9 .. 9:1 for each model.
    bool weight_sweep = false;
};

/// Everything a command needs. See docs/config.md for the key schema.
struct ExperimentConfig {
    DataConfig data;
    VariantSpec variant;
    TrainConfig train;
    ScoringConfig scoring;
    synth::SynthSpec synth;
    AblationConfig ablation;
    std::filesystem::path output_dir = "runs/default";
    /// Checkpoint used by eval/viz; defaults to <output_dir>/model.ckpt.
    std::filesystem::path checkpoint;

    std::filesystem::path checkpoint_path() const {
        return checkpoint.empty() ? output_dir / "model.ckpt" : checkpoint;
    }
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Applies "dotted.key=value" to a JSON document. The value is parsed as
/// JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Reads a JSON config (empty path gives defaults), applies overrides in
/// order and validates. Relative paths in the file resolve against the
/// file's directory. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

/// Preset for the desk-scale synthetic benchmark (128x128, 5 epochs).
ExperimentConfig synthetic_preset();

} // namespace bisp
