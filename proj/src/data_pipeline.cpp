#include "bisp/data_pipeline.hpp"

#include "bisp/errors.hpp"
#include "bisp/logging.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace bisp {

void FrameClip::validate() const {
    if (frames.empty()) return;
    const auto ref = frames.front().sizes().vec();
    if (ref.size() != 3 || ref[0] != 3) {
        throw DataError("clip " + video_id + ": frames must be (3, H, W)");
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].sizes().vec() != ref) {
            throw DataError("clip " + video_id + ": frame " + std::to_string(i) + " has a different shape");
        }
        const auto lo = frames[i].min().item<float>();
        const auto hi = frames[i].max().item<float>();
        if (lo < -1.0f || hi > 1.0f) {
            throw DataError("clip " + video_id + ": frame " + std::to_string(i) + " outside [-1, 1]");
        }
    }
    if (labels && labels->size() != frames.size()) {
        throw DataError("clip " + video_id + ": " + std::to_string(labels->size()) + " labels for " +
                        std::to_string(frames.size()) + " frames");
    }
}

std::size_t training_window_length(SamplingMode mode) {
    return mode == SamplingMode::SkipFrame ? 6 : 4;
}

bool is_frame_file(const fs::path& file) {
    auto ext = file.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".tif" || ext == ".tiff" ||
           ext == ".bmp";
}

torch::Tensor frame_from_rgb8(const std::uint8_t* rgb, int height, int width) {
    auto bytes = torch::from_blob(const_cast<std::uint8_t*>(rgb), {height, width, 3}, torch::kUInt8);
    return bytes.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

torch::Tensor load_frame(const fs::path& file, int resolution) {
    // IMREAD_COLOR replicates single-channel images to three channels.
    cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw DataError("cannot decode image " + file.string());
    }
    if (bgr.rows != resolution || bgr.cols != resolution) {
        cv::resize(bgr, bgr, cv::Size(resolution, resolution), 0, 0, cv::INTER_LINEAR);
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    return frame_from_rgb8(rgb.ptr<std::uint8_t>(), rgb.rows, rgb.cols);
}

std::vector<int> read_label_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("cannot open label file " + file.string());
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
                   line.end());
        if (line.empty()) continue;
        if (line != "0" && line != "1") {
            throw DataError(file.string() + ":" + std::to_string(lineno) + ": expected 0 or 1, got '" + line + "'");
        }
        labels.push_back(line == "1" ? 1 : 0);
    }
    return labels;
}

std::vector<FrameClip> load_dataset(const fs::path& root, Split split, const LoadOptions& options) {
    const fs::path split_dir = root / (split == Split::Train ? "train" : "test");
    if (!fs::is_directory(split_dir)) {
        throw ConfigError("dataset split directory not found: " + split_dir.string());
    }
    if (options.resolution <= 0) throw ConfigError("resolution must be positive");

    std::vector<fs::path> video_dirs;
    for (const auto& entry : fs::directory_iterator(split_dir)) {
        if (entry.is_directory()) video_dirs.push_back(entry.path());
    }
    std::sort(video_dirs.begin(), video_dirs.end());

    std::vector<FrameClip> clips;
    for (const auto& dir : video_dirs) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && is_frame_file(entry.path())) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        const std::string video_id = dir.filename().string();
        if (files.size() < kMinVideoFrames) {
            log::warn("skipping video ", video_id, ": ", files.size(), " frames (need ", kMinVideoFrames, ")");
            continue;
        }

        FrameClip clip;
        clip.video_id = video_id;
        clip.frames.reserve(files.size());
        for (const auto& f : files) clip.frames.push_back(load_frame(f, options.resolution));

        if (split == Split::Test) {
            const fs::path label_file = root / "test_labels" / (video_id + ".txt");
            if (fs::exists(label_file)) {
                auto labels = read_label_file(label_file);
                if (labels.size() != clip.frames.size()) {
                    throw DataError("label file " + label_file.string() + " has " + std::to_string(labels.size()) +
                                    " entries for " + std::to_string(clip.frames.size()) + " frames");
                }
                clip.labels = std::move(labels);
            }
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

std::vector<SkipFrameSample> make_training_samples(const FrameClip& clip, SamplingMode mode) {
    const std::size_t len = training_window_length(mode);
    std::vector<SkipFrameSample> samples;
    if (clip.size() < len) return samples;

    // Forward inputs, forward target, backward inputs, backward target.
    const bool skip = mode == SamplingMode::SkipFrame;
    const std::array<int, 3> fwd = skip ? std::array<int, 3>{0, 2, 4} : std::array<int, 3>{0, 1, 2};
    const int fwd_target = skip ? 5 : 3;
    const std::array<int, 3> bwd = skip ? std::array<int, 3>{5, 3, 1} : std::array<int, 3>{3, 2, 1};
    const int bwd_target = 0;

    samples.reserve(clip.size() - len + 1);
    for (std::size_t s = 0; s + len <= clip.size(); ++s) {
        SkipFrameSample sample;
        sample.window_start = s;
        sample.forward_offsets = fwd;
        sample.forward_target_offset = fwd_target;
        sample.backward_offsets = bwd;
        sample.backward_target_offset = bwd_target;
        for (int k = 0; k < 3; ++k) {
            sample.forward_inputs[k] = clip.frames[s + fwd[k]];
            sample.backward_inputs[k] = clip.frames[s + bwd[k]];
        }
        sample.forward_target = clip.frames[s + fwd_target];
        sample.backward_target = clip.frames[s + bwd_target];
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::vector<TestWindow> make_test_windows(const FrameClip& clip) {
    std::vector<TestWindow> windows;
    if (clip.size() < kTestWindowLength) return windows;
    windows.reserve(clip.size() - kTestWindowLength + 1);
    for (std::size_t s = 0; s + kTestWindowLength <= clip.size(); ++s) {
        TestWindow w;
        w.forward_inputs = {clip.frames[s], clip.frames[s + 1], clip.frames[s + 2]};
        w.backward_inputs = {clip.frames[s + 6], clip.frames[s + 5], clip.frames[s + 4]};
        w.target = clip.frames[s + 3];
        w.target_frame_index = s + 3;
        windows.push_back(std::move(w));
    }
    return windows;
}

torch::Tensor stack_triple(const FrameTriple& triple) {
    return torch::cat({triple[0], triple[1], triple[2]}, 0);
}

} // namespace bisp
