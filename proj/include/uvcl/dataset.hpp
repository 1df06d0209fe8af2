#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uvcl/core.hpp"
#include "uvcl/image.hpp"

// Video corpora, the synthetic corpus generator used by tests and demos, and
// per-frame augmentation. A corpus is either file-backed (directories of
// numbered PGM frames plus a JSON manifest) or held in memory; frame access
// goes through decode_frame either way. Pretraining only ever sees the corpus;
// labels live in separate structures so they cannot leak into it.
namespace uvcl::dataset {

struct Video {
    std::string id;
    int frames = 0;  // M, frames are addressed 1..M
    std::vector<std::filesystem::path> frame_files;  // file-backed videos
    std::vector<Image> frame_data;                   // in-memory videos
    bool in_memory() const { return !frame_data.empty(); }
};

struct VideoCorpus {
    int image_h = 0, image_w = 0, image_c = 1;
    std::vector<Video> videos;

    const Video& video(const std::string& id) const;
};

// 1-based frame access with shape validation.
Image decode_frame(const VideoCorpus& corpus, const Video& v, int index);

// Reads a corpus manifest: {"image_shape": [h, w, c], "videos": [{"id", "dir"}]}
// with dir relative to the manifest. Frame files are <anything><number>.pgm
// and must cover 1..M without gaps. Shapes are validated against the manifest
// up front via the PGM headers.
VideoCorpus load_corpus(const std::filesystem::path& manifest_path);

// Decodes every frame into memory (small corpora only).
void preload(VideoCorpus& corpus);

// Writes an in-memory corpus as PGM trees plus manifest.json under root.
std::filesystem::path write_corpus(const VideoCorpus& corpus, const std::filesystem::path& root);

std::string manifest_json(const VideoCorpus& corpus);

// Ground truth for the synthetic task: the frame window (1-based, inclusive)
// in which the implanted pattern is visible.
struct PathologyWindow {
    std::string video_id;
    int begin = 0;
    int end = 0;
};

void write_ground_truth_csv(const std::vector<PathologyWindow>& windows,
                            const std::filesystem::path& path);
std::vector<PathologyWindow> read_ground_truth_csv(const std::filesystem::path& path);

// Synthetic corpus: per video, a drifting mixture of oriented gratings plus
// pixel noise; within a contiguous window, a small high-frequency Gabor patch
// rides on top. Temporally close frames are similar, distant ones are not,
// and each video has its own texture, mirroring how real scan videos behave.
struct SyntheticSpec {
    int num_videos = 8;
    int frames_min = 40;
    int frames_max = 80;
    int image_h = 32;
    int image_w = 32;
    double smoothness = 12.0;  // frames per radian-scale drift; larger = slower change
    int window_half_width = 3;
    double noise_level = 0.02;  // stddev of per-pixel noise
    std::uint64_t seed = 0;
};

struct SyntheticCorpus {
    VideoCorpus corpus;
    std::vector<PathologyWindow> windows;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

struct LabeledImage {
    Image image;
    std::string label;
    std::string patient_id;
};

struct LabeledImageSet {
    std::vector<std::string> classes;  // label -> head output index
    std::vector<LabeledImage> items;
};

// Turns synthetic ground truth into a balanced two-class set: frames inside
// the window are "lesion", frames at least clear_margin outside it are
// "normal" (per video, subsampled to the positive count). The patient id is
// the video id, so group-aware splits keep a video's frames together.
struct LabelingConfig {
    int clear_margin = 7;
    std::uint64_t seed = 0;
};

LabeledImageSet label_frames(const SyntheticCorpus& sc, const LabelingConfig& cfg);
LabeledImageSet label_frames(const SyntheticCorpus& sc, const LabelingConfig& cfg,
                             const std::vector<std::string>& video_ids);

// Labeled-set manifest: {"classes": [...], "items": [{"path", "label", "patient"}]}
// with paths relative to the manifest. Images are decoded eagerly.
LabeledImageSet load_labeled(const std::filesystem::path& manifest_path);
void write_labeled_manifest(const std::vector<PathologyWindow>& windows,
                            const VideoCorpus& corpus, const LabelingConfig& cfg,
                            const std::filesystem::path& manifest_path);

// Photometric/geometric jitter. All knobs default to "off"; a default config
// is the identity and consumes no randomness. Draw order is fixed: crop,
// flip, brightness/contrast, noise.
struct AugmentConfig {
    double crop_min_scale = 1.0;  // in (0, 1]; 1 disables cropping
    double hflip_prob = 0.0;      // 1 flips deterministically without a draw
    double brightness = 0.0;      // max absolute shift
    double contrast = 0.0;        // max relative deviation from 1
    double noise_stddev = 0.0;
};

Image augment(const Image& im, const AugmentConfig& cfg, Rng& rng);

}  // namespace uvcl::dataset
