#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bisp::synth {

enum class AnomalyMode { FastMotion, NovelShape, ReverseDirection };

std::string to_string(AnomalyMode m);
AnomalyMode parse_anomaly_mode(const std::string& s);

/// Naming and pixel format of the generated tree. `Ped2` mimics the UCSD
/// layout: Train001/Test001 directories with 240x360 grayscale frames.
enum class Layout { Default, Ped2 };

struct SynthSpec {
    int num_train_videos = 8;
    int num_test_videos = 4;
    int frames_per_video = 60;
    int height = 256;
    int width = 256;
    int normal_speed = 2;
    int fast_speed = 8;
    int sprites_per_video = 2;
    /// Frames per anomalous segment; 0 means a third of the video.
    int anomaly_length = 0;
    std::vector<AnomalyMode> anomaly_modes{AnomalyMode::FastMotion, AnomalyMode::NovelShape};
    Layout layout = Layout::Default;
    std::uint64_t seed = 7;

    /// Throws ConfigError for impossible settings.
    void validate() const;
    int segment_length() const { return anomaly_length > 0 ? anomaly_length : frames_per_video / 3; }
};

/// Ground truth of one generated test video: frames [start, start + length)
/// are anomalous under `mode`.
struct AnomalySegment {
    std::string video_id;
    AnomalyMode mode;
    int start;
    int length;
};

/// Segments implied by the spec alone, without rendering anything.
std::vector<AnomalySegment> planned_segments(const SynthSpec& spec);

std::string train_video_id(const SynthSpec& spec, int index);
std::string test_video_id(const SynthSpec& spec, int index);

/// Writes `<out>/train/<id>/NNNN.png`, `<out>/test/<id>/NNNN.png` and
/// `<out>/test_labels/<id>.txt`. Identical specs give identical bytes.
std::vector<AnomalySegment> generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

struct SplitSummary {
    int videos = 0;
    std::size_t frames = 0;
    std::size_t labelled_frames = 0;
    std::size_t anomalous_frames = 0;
    double anomaly_ratio() const {
        return labelled_frames == 0 ? 0.0 : static_cast<double>(anomalous_frames) / labelled_frames;
    }
};

struct DatasetSummary {
    SplitSummary train;
    SplitSummary test;
    std::string to_text() const;
};

/// Scans a dataset tree. Throws DataError listing every offending path when
/// the layout is malformed or empty.
DatasetSummary describe(const std::filesystem::path& dataset_dir);

} // namespace bisp::synth
