#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bisp {

/// Ordered frames of one video. Each frame is a float32 tensor of shape
/// (3, H, W) with values in [-1, 1]; labels (1 = anomalous) are optional.
struct FrameClip {
    std::string video_id;
    std::vector<torch::Tensor> frames;
    std::optional<std::vector<int>> labels;

    std::size_t size() const { return frames.size(); }
    /// Throws DataError when frame shapes disagree, values leave [-1, 1]
    /// or the label count does not match the frame count.
    void validate() const;
};

enum class Split { Train, Test };

/// How training windows are cut from a clip.
///  SkipFrame:   forward (0,2,4)->5, backward (5,3,1)->0 in a 6-frame window.
///  Consecutive: forward (0,1,2)->3, backward (3,2,1)->0 in a 4-frame window.
enum class SamplingMode { SkipFrame, Consecutive };

using FrameTriple = std::array<torch::Tensor, 3>;

struct SkipFrameSample {
    FrameTriple forward_inputs;
    torch::Tensor forward_target;
    FrameTriple backward_inputs;
    torch::Tensor backward_target;
    std::size_t window_start = 0;
    // Window offsets of each field, relative to window_start.
    std::array<int, 3> forward_offsets{};
    int forward_target_offset = 0;
    std::array<int, 3> backward_offsets{};
    int backward_target_offset = 0;
};

struct TestWindow {
    FrameTriple forward_inputs;   // offsets 0, 1, 2
    FrameTriple backward_inputs;  // offsets 6, 5, 4
    torch::Tensor target;         // offset 3
    std::size_t target_frame_index = 0;
};

inline constexpr std::size_t kTestWindowLength = 7;
inline constexpr std::size_t kMinVideoFrames = kTestWindowLength;

std::size_t training_window_length(SamplingMode mode);

struct LoadOptions {
    int resolution = 256;
};

/// Raw 8-bit channel value to the model's [-1, 1] range.
inline float normalize_pixel(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

/// Reads an image from disk as a (3, res, res) normalized frame. Grayscale
/// images are replicated to three channels; resizing is bilinear.
torch::Tensor load_frame(const std::filesystem::path& file, int resolution);

/// Converts an 8-bit HxWx3 RGB buffer to a normalized (3, H, W) frame.
torch::Tensor frame_from_rgb8(const std::uint8_t* rgb, int height, int width);

/// Loads `<root>/<split>/<video_id>/*` sorted lexicographically. Test clips
/// read labels from `<root>/test_labels/<video_id>.txt` when present.
/// Videos with fewer than 7 frames are skipped with a warning.
std::vector<FrameClip> load_dataset(const std::filesystem::path& root, Split split,
                                    const LoadOptions& options = {});

/// Parses a label file: one 0/1 per line.
std::vector<int> read_label_file(const std::filesystem::path& file);

/// True for extensions the loader accepts as frames.
bool is_frame_file(const std::filesystem::path& file);

std::vector<SkipFrameSample> make_training_samples(const FrameClip& clip,
                                                   SamplingMode mode = SamplingMode::SkipFrame);

std::vector<TestWindow> make_test_windows(const FrameClip& clip);

/// Stacks a frame triple channel-wise into a (9, H, W) model input.
torch::Tensor stack_triple(const FrameTriple& triple);

} // namespace bisp
