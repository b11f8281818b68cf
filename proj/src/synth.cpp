#include "bisp/synth.hpp"

#include "bisp/data_pipeline.hpp"
#include "bisp/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace bisp::synth {

std::string to_string(AnomalyMode m) {
    switch (m) {
    case AnomalyMode::FastMotion: return "fast_motion";
    case AnomalyMode::NovelShape: return "novel_shape";
    case AnomalyMode::ReverseDirection: return "reverse_direction";
    }
    return "fast_motion";
}

AnomalyMode parse_anomaly_mode(const std::string& s) {
    if (s == "fast_motion") return AnomalyMode::FastMotion;
    if (s == "novel_shape") return AnomalyMode::NovelShape;
    if (s == "reverse_direction") return AnomalyMode::ReverseDirection;
    throw ConfigError("unknown anomaly mode '" + s + "'");
}

void SynthSpec::validate() const {
    if (num_train_videos < 0 || num_test_videos < 0) throw ConfigError("video counts must be non-negative");
    if (frames_per_video < 7) throw ConfigError("frames_per_video must be at least 7");
    if (height < 32 || width < 32) throw ConfigError("frames must be at least 32x32");
    if (normal_speed < 1 || fast_speed < 1) throw ConfigError("speeds must be positive");
    if (sprites_per_video < 1) throw ConfigError("need at least one sprite per video");
    if (num_test_videos > 0 && anomaly_modes.empty()) throw ConfigError("test videos need an anomaly mode");
    if (segment_length() < 1 || segment_length() > frames_per_video) {
        throw ConfigError("anomaly_length must lie in [1, frames_per_video]");
    }
}

namespace {

std::string numbered(const char* prefix, int index, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, index);
    return buf;
}

} // namespace

std::string train_video_id(const SynthSpec& spec, int index) {
    return spec.layout == Layout::Ped2 ? numbered("Train", index + 1, 3) : numbered("", index, 2);
}

std::string test_video_id(const SynthSpec& spec, int index) {
    return spec.layout == Layout::Ped2 ? numbered("Test", index + 1, 3) : numbered("", index, 2);
}

std::vector<AnomalySegment> planned_segments(const SynthSpec& spec) {
    spec.validate();
    std::vector<AnomalySegment> out;
    const int len = spec.segment_length();
    const int start = (spec.frames_per_video - len) / 2;
    for (int v = 0; v < spec.num_test_videos; ++v) {
        const auto mode = spec.anomaly_modes[static_cast<std::size_t>(v) % spec.anomaly_modes.size()];
        out.push_back({test_video_id(spec, v), mode, start, len});
    }
    return out;
}

namespace {

enum class Shape { Circle, Square, Triangle };

struct Sprite {
    Shape shape;
    int radius;
    int lane_y;
    int x;
    cv::Scalar color;
};

std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
    return std::mt19937_64(seq);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    // Explicit arithmetic keeps the output identical across standard libraries.
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Static scene shared by every video: a vertical gradient with a few faint
// rectangles, standing in for a fixed surveillance background.
cv::Mat render_background(const SynthSpec& spec) {
    auto rng = stream_for(spec.seed, 0xB6);
    cv::Mat bg(spec.height, spec.width, CV_8UC3);
    for (int y = 0; y < spec.height; ++y) {
        const int base = 50 + (40 * y) / spec.height;
        bg.row(y).setTo(cv::Scalar(base + 10, base, base - 10));
    }
    for (int i = 0; i < 6; ++i) {
        const int w = uniform_int(rng, spec.width / 8, spec.width / 3);
        const int h = uniform_int(rng, spec.height / 10, spec.height / 4);
        const int x = uniform_int(rng, 0, spec.width - w);
        const int y = uniform_int(rng, 0, spec.height - h);
        const int tone = uniform_int(rng, 35, 110);
        cv::rectangle(bg, cv::Rect(x, y, w, h), cv::Scalar(tone, tone + 5, tone), cv::FILLED, cv::LINE_8);
    }
    return bg;
}

void draw_sprite(cv::Mat& img, const Sprite& s, int x) {
    const cv::Point c(x, s.lane_y);
    switch (s.shape) {
    case Shape::Circle:
        cv::circle(img, c, s.radius, s.color, cv::FILLED, cv::LINE_8);
        break;
    case Shape::Square:
        cv::rectangle(img, cv::Rect(x - s.radius, s.lane_y - s.radius, 2 * s.radius, 2 * s.radius), s.color,
                      cv::FILLED, cv::LINE_8);
        break;
    case Shape::Triangle: {
        const int r = s.radius + s.radius / 2;
        std::vector<cv::Point> pts{{x, s.lane_y - r}, {x - r, s.lane_y + r}, {x + r, s.lane_y + r}};
        cv::fillConvexPoly(img, pts, s.color, cv::LINE_8);
        break;
    }
    }
}

// Horizontal motion wraps around the frame; drawing both copies keeps
// sprites continuous across the seam.
void draw_wrapped(cv::Mat& img, const Sprite& s) {
    draw_sprite(img, s, s.x);
    draw_sprite(img, s, s.x - img.cols);
    draw_sprite(img, s, s.x + img.cols);
}

std::vector<Sprite> make_sprites(const SynthSpec& spec, std::mt19937_64& rng) {
    std::vector<Sprite> sprites;
    const int lanes = spec.sprites_per_video + 1;
    const int radius = std::max(3, spec.height / 20);
    for (int i = 0; i < spec.sprites_per_video; ++i) {
        Sprite s;
        s.shape = uniform_int(rng, 0, 1) == 0 ? Shape::Circle : Shape::Square;
        s.radius = radius;
        // Each sprite gets its own horizontal lane.
        s.lane_y = (spec.height * (i + 1)) / lanes + uniform_int(rng, -radius / 2, radius / 2);
        s.x = uniform_int(rng, 0, spec.width - 1);
        const int tone = uniform_int(rng, 190, 235);
        s.color = cv::Scalar(tone, tone, tone);
        sprites.push_back(s);
    }
    return sprites;
}

void write_frame(const cv::Mat& bgr, const SynthSpec& spec, const fs::path& file) {
    std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 3};
    bool ok;
    if (spec.layout == Layout::Ped2) {
        cv::Mat gray;
        cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);
        ok = cv::imwrite(file.string(), gray, params);
    } else {
        ok = cv::imwrite(file.string(), bgr, params);
    }
    if (!ok) throw Error("cannot write frame " + file.string());
}

void render_video(const SynthSpec& spec, const cv::Mat& background, const fs::path& dir, std::uint64_t salt,
                  const AnomalySegment* anomaly) {
    fs::create_directories(dir);
    auto rng = stream_for(spec.seed, salt);
    auto sprites = make_sprites(spec, rng);

    // The intruder used by novel_shape travels along the gap between lanes.
    Sprite intruder{Shape::Triangle, sprites.front().radius, spec.height / (2 * (spec.sprites_per_video + 1)),
                    uniform_int(rng, 0, spec.width - 1), cv::Scalar(40, 40, 230)};

    for (int t = 0; t < spec.frames_per_video; ++t) {
        const bool abnormal = anomaly && t >= anomaly->start && t < anomaly->start + anomaly->length;
        cv::Mat frame = background.clone();
        for (std::size_t i = 0; i < sprites.size(); ++i) {
            int v = spec.normal_speed;
            if (abnormal && i == 0 && anomaly->mode == AnomalyMode::FastMotion) v = spec.fast_speed;
            if (abnormal && i == 0 && anomaly->mode == AnomalyMode::ReverseDirection) v = -spec.normal_speed;
            if (t > 0) sprites[i].x = ((sprites[i].x + v) % spec.width + spec.width) % spec.width;
            draw_wrapped(frame, sprites[i]);
        }
        if (abnormal && anomaly->mode == AnomalyMode::NovelShape) {
            if (t > anomaly->start) intruder.x = (intruder.x + spec.normal_speed) % spec.width;
            draw_wrapped(frame, intruder);
        }
        write_frame(frame, spec, dir / numbered("", t, 4).append(".png"));
    }
}

} // namespace

std::vector<AnomalySegment> generate(const SynthSpec& spec, const fs::path& out_dir) {
    spec.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) throw Error("cannot create output directory " + out_dir.string());

    const cv::Mat background = render_background(spec);
    for (int v = 0; v < spec.num_train_videos; ++v) {
        render_video(spec, background, out_dir / "train" / train_video_id(spec, v), 0x1000 + v, nullptr);
    }
    auto segments = planned_segments(spec);
    fs::create_directories(out_dir / "test_labels");
    for (int v = 0; v < spec.num_test_videos; ++v) {
        const auto& seg = segments[v];
        render_video(spec, background, out_dir / "test" / seg.video_id, 0x2000 + v, &seg);
        std::ofstream labels(out_dir / "test_labels" / (seg.video_id + ".txt"), std::ios::trunc);
        if (!labels) throw Error("cannot write labels for " + seg.video_id);
        for (int t = 0; t < spec.frames_per_video; ++t) {
            labels << ((t >= seg.start && t < seg.start + seg.length) ? 1 : 0) << '\n';
        }
    }
    return segments;
}

namespace {

void scan_split(const fs::path& root, const char* name, SplitSummary& summary, std::vector<std::string>& problems,
                bool with_labels) {
    const fs::path dir = root / name;
    if (!fs::is_directory(dir)) return;
    std::vector<fs::path> videos;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) {
            videos.push_back(e.path());
        } else {
            problems.push_back(e.path().string() + ": not a video directory");
        }
    }
    std::sort(videos.begin(), videos.end());
    for (const auto& v : videos) {
        std::size_t frames = 0;
        for (const auto& f : fs::directory_iterator(v)) {
            if (f.is_regular_file() && is_frame_file(f.path())) ++frames;
        }
        if (frames == 0) {
            problems.push_back(v.string() + ": no frame images");
            continue;
        }
        ++summary.videos;
        summary.frames += frames;
        if (!with_labels) {
            // Training data is normal by assumption.
            summary.labelled_frames += frames;
            continue;
        }
        const fs::path label_file = root / "test_labels" / (v.filename().string() + ".txt");
        if (!fs::exists(label_file)) continue;
        try {
            const auto labels = read_label_file(label_file);
            if (labels.size() != frames) {
                problems.push_back(label_file.string() + ": " + std::to_string(labels.size()) + " labels for " +
                                   std::to_string(frames) + " frames");
                continue;
            }
            summary.labelled_frames += labels.size();
            summary.anomalous_frames += static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
        } catch (const DataError& e) {
            problems.push_back(e.what());
        }
    }
}

} // namespace

DatasetSummary describe(const fs::path& dataset_dir) {
    if (!fs::is_directory(dataset_dir)) throw DataError(dataset_dir.string() + ": not a directory");
    DatasetSummary s;
    std::vector<std::string> problems;
    scan_split(dataset_dir, "train", s.train, problems, false);
    scan_split(dataset_dir, "test", s.test, problems, true);
    if (s.train.videos == 0 && s.test.videos == 0) {
        problems.push_back(dataset_dir.string() + ": no train/ or test/ videos found");
    }
    if (!problems.empty()) {
        std::string msg = "malformed dataset layout:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
    return s;
}

std::string DatasetSummary::to_text() const {
    std::ostringstream os;
    os << "train: " << train.videos << " videos, " << train.frames << " frames, anomaly ratio "
       << train.anomaly_ratio() << '\n'
       << "test:  " << test.videos << " videos, " << test.frames << " frames, " << test.anomalous_frames
       << " anomalous of " << test.labelled_frames << " labelled, anomaly ratio " << test.anomaly_ratio() << '\n';
    return os.str();
}

} // namespace bisp::synth
