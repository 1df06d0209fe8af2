#include "uvcl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace uvcl::dataset {

namespace {

using ordered_json = nlohmann::ordered_json;

void reject_unknown_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) {
            throw std::runtime_error(where + ": unknown key '" + key + "'");
        }
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot create " + path.string());
    os << text;
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

// Frame files are named <anything><number>.pgm; the trailing number is the
// 1-based frame index.
int frame_index_from_name(const std::filesystem::path& file, const std::string& video_id) {
    const std::string stem = file.stem().string();
    std::size_t pos = stem.size();
    while (pos > 0 && std::isdigit(static_cast<unsigned char>(stem[pos - 1]))) --pos;
    if (pos == stem.size()) {
        throw std::runtime_error("video '" + video_id + "': frame file '" + file.filename().string() +
                                 "' has no trailing frame number");
    }
    return std::stoi(stem.substr(pos));
}

Image bilinear_resize(const Image& src, int oh, int ow) {
    Image out = Image::zeros(oh, ow, src.c);
    const double sy = static_cast<double>(src.h) / oh;
    const double sx = static_cast<double>(src.w) / ow;
    for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(src.h - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const double wy = fy - y0;
        for (int x = 0; x < ow; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(src.w - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.w - 1);
            const double wx = fx - x0;
            for (int ch = 0; ch < src.c; ++ch) {
                const double top = src.at(y0, x0, ch) * (1.0 - wx) + src.at(y0, x1, ch) * wx;
                const double bot = src.at(y1, x0, ch) * (1.0 - wx) + src.at(y1, x1, ch) * wx;
                out.at(y, x, ch) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

std::string frame_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.pgm", index);
    return std::string(buf);
}

// Which frames of each video enter the labeled set. Selection is a pure
// function of (windows, video lengths, config), so the in-memory and manifest
// paths stay consistent.
struct FrameSelection {
    std::string video_id;
    std::vector<int> lesion;
    std::vector<int> normal;
};

std::vector<FrameSelection> select_labeled_frames(const std::vector<PathologyWindow>& windows,
                                                  const VideoCorpus& corpus,
                                                  const LabelingConfig& cfg,
                                                  const std::vector<std::string>* subset) {
    if (cfg.clear_margin < 0) throw std::invalid_argument("label_frames: clear_margin must be non-negative");
    std::vector<FrameSelection> out;
    for (const auto& w : windows) {
        if (subset && std::find(subset->begin(), subset->end(), w.video_id) == subset->end()) continue;
        const Video& v = corpus.video(w.video_id);
        if (w.begin < 1 || w.end > v.frames || w.begin > w.end) {
            throw std::runtime_error("label_frames: window [" + std::to_string(w.begin) + ", " +
                                     std::to_string(w.end) + "] invalid for video '" + w.video_id +
                                     "' with " + std::to_string(v.frames) + " frames");
        }
        FrameSelection sel;
        sel.video_id = w.video_id;
        for (int j = w.begin; j <= w.end; ++j) sel.lesion.push_back(j);
        std::vector<int> candidates;
        for (int j = 1; j <= v.frames; ++j) {
            if (j < w.begin - cfg.clear_margin || j > w.end + cfg.clear_margin) candidates.push_back(j);
        }
        if (candidates.empty()) {
            throw std::runtime_error("label_frames: window plus margin covers all of video '" +
                                     w.video_id + "', no clean frames left");
        }
        // Balance classes per video by subsampling the larger side.
        Rng rng(mix_seed(cfg.seed, fnv1a64(w.video_id)));
        const std::size_t m = std::min(sel.lesion.size(), candidates.size());
        rng.shuffle(candidates);
        candidates.resize(m);
        std::sort(candidates.begin(), candidates.end());
        if (sel.lesion.size() > m) {
            rng.shuffle(sel.lesion);
            sel.lesion.resize(m);
            std::sort(sel.lesion.begin(), sel.lesion.end());
        }
        sel.normal = std::move(candidates);
        out.push_back(std::move(sel));
    }
    return out;
}

const char* kNormal = "normal";
const char* kLesion = "lesion";

}  // namespace

const Video& VideoCorpus::video(const std::string& id) const {
    for (const auto& v : videos) {
        if (v.id == id) return v;
    }
    throw std::runtime_error("corpus: unknown video id '" + id + "'");
}

Image decode_frame(const VideoCorpus& corpus, const Video& v, int index) {
    if (index < 1 || index > v.frames) {
        throw std::out_of_range("decode_frame: frame " + std::to_string(index) + " outside [1, " +
                                std::to_string(v.frames) + "] in video '" + v.id + "'");
    }
    Image im;
    if (v.in_memory()) {
        im = v.frame_data[static_cast<std::size_t>(index - 1)];
    } else {
        im = read_pgm(v.frame_files[static_cast<std::size_t>(index - 1)]);
    }
    if (im.h != corpus.image_h || im.w != corpus.image_w || im.c != corpus.image_c) {
        throw std::runtime_error("decode_frame: frame " + std::to_string(index) + " of video '" +
                                 v.id + "' has shape " + std::to_string(im.h) + "x" +
                                 std::to_string(im.w) + "x" + std::to_string(im.c) +
                                 ", corpus declares " + std::to_string(corpus.image_h) + "x" +
                                 std::to_string(corpus.image_w) + "x" + std::to_string(corpus.image_c));
    }
    return im;
}

VideoCorpus load_corpus(const std::filesystem::path& manifest_path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corpus manifest " + manifest_path.string() + ": " + e.what());
    }
    const std::string where = "corpus manifest " + manifest_path.string();
    if (!j.is_object()) throw std::runtime_error(where + ": top level must be an object");
    reject_unknown_keys(j, {"image_shape", "videos"}, where);
    if (!j.contains("image_shape") || !j.contains("videos")) {
        throw std::runtime_error(where + ": image_shape and videos are required");
    }
    const auto& shape = j["image_shape"];
    if (!shape.is_array() || shape.size() != 3) {
        throw std::runtime_error(where + ": image_shape must be [height, width, channels]");
    }

    VideoCorpus corpus;
    corpus.image_h = shape[0].get<int>();
    corpus.image_w = shape[1].get<int>();
    corpus.image_c = shape[2].get<int>();
    if (corpus.image_h <= 0 || corpus.image_w <= 0) {
        throw std::runtime_error(where + ": non-positive image dimensions");
    }
    if (corpus.image_c != 1) {
        throw std::runtime_error(where + ": only single-channel frame data is supported");
    }

    const std::filesystem::path root = manifest_path.parent_path();
    std::set<std::string> seen_ids;
    for (const auto& jv : j["videos"]) {
        reject_unknown_keys(jv, {"id", "dir"}, where);
        Video v;
        v.id = jv.at("id").get<std::string>();
        if (v.id.empty()) throw std::runtime_error(where + ": empty video id");
        if (!seen_ids.insert(v.id).second) {
            throw std::runtime_error(where + ": duplicate video id '" + v.id + "'");
        }
        const std::string dir = jv.at("dir").get<std::string>();
        const std::filesystem::path vdir = root / dir;
        if (!std::filesystem::is_directory(vdir)) {
            throw std::runtime_error(where + ": video '" + v.id + "' directory " + vdir.string() +
                                     " does not exist");
        }
        std::map<int, std::filesystem::path> indexed;
        for (const auto& entry : std::filesystem::directory_iterator(vdir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".pgm") continue;
            const int idx = frame_index_from_name(entry.path(), v.id);
            if (!indexed.emplace(idx, entry.path()).second) {
                throw std::runtime_error("video '" + v.id + "': duplicate frame index " +
                                         std::to_string(idx));
            }
        }
        if (indexed.empty()) {
            throw std::runtime_error("video '" + v.id + "': no .pgm frames in " + vdir.string());
        }
        int expect = 1;
        for (const auto& [idx, file] : indexed) {
            if (idx != expect) {
                throw std::runtime_error("video '" + v.id + "': frame indices are not contiguous, expected " +
                                         std::to_string(expect) + " but found " + std::to_string(idx));
            }
            const PgmHeader hdr = read_pgm_header(file);
            if (hdr.h != corpus.image_h || hdr.w != corpus.image_w) {
                throw std::runtime_error("video '" + v.id + "': frame " + std::to_string(idx) +
                                         " has shape " + std::to_string(hdr.h) + "x" + std::to_string(hdr.w) +
                                         ", corpus declares " + std::to_string(corpus.image_h) + "x" +
                                         std::to_string(corpus.image_w));
            }
            v.frame_files.push_back(file);
            ++expect;
        }
        v.frames = static_cast<int>(v.frame_files.size());
        corpus.videos.push_back(std::move(v));
    }
    return corpus;
}

void preload(VideoCorpus& corpus) {
    for (auto& v : corpus.videos) {
        if (v.in_memory()) continue;
        // decode into a separate vector: a partially filled frame_data would
        // flip in_memory() mid-loop and make decode_frame read unfilled slots
        std::vector<Image> frames;
        frames.reserve(static_cast<std::size_t>(v.frames));
        for (int j = 1; j <= v.frames; ++j) {
            frames.push_back(decode_frame(corpus, v, j));
        }
        v.frame_data = std::move(frames);
    }
}

std::string manifest_json(const VideoCorpus& corpus) {
    ordered_json j;
    j["image_shape"] = {corpus.image_h, corpus.image_w, corpus.image_c};
    j["videos"] = ordered_json::array();
    for (const auto& v : corpus.videos) {
        j["videos"].push_back(ordered_json{{"id", v.id}, {"dir", v.id}});
    }
    return j.dump(2) + "\n";
}

std::filesystem::path write_corpus(const VideoCorpus& corpus, const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    for (const auto& v : corpus.videos) {
        if (!v.in_memory()) {
            throw std::runtime_error("write_corpus: video '" + v.id + "' has no in-memory frames");
        }
        const std::filesystem::path vdir = root / v.id;
        std::filesystem::create_directories(vdir);
        for (int j = 1; j <= v.frames; ++j) {
            write_pgm(v.frame_data[static_cast<std::size_t>(j - 1)], vdir / frame_file_name(j));
        }
    }
    const std::filesystem::path manifest = root / "manifest.json";
    write_text_file(manifest, manifest_json(corpus));
    return manifest;
}

void write_ground_truth_csv(const std::vector<PathologyWindow>& windows,
                            const std::filesystem::path& path) {
    std::ostringstream ss;
    ss << "video_id,begin,end\n";
    for (const auto& w : windows) ss << w.video_id << "," << w.begin << "," << w.end << "\n";
    write_text_file(path, ss.str());
}

std::vector<PathologyWindow> read_ground_truth_csv(const std::filesystem::path& path) {
    std::istringstream is(read_text_file(path));
    std::string line;
    if (!std::getline(is, line) || line != "video_id,begin,end") {
        throw std::runtime_error("ground truth " + path.string() + ": missing or wrong header");
    }
    std::vector<PathologyWindow> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw std::runtime_error("ground truth " + path.string() + ": malformed row '" + line + "'");
        }
        PathologyWindow w;
        w.video_id = line.substr(0, c1);
        w.begin = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        w.end = std::stoi(line.substr(c2 + 1));
        out.push_back(std::move(w));
    }
    return out;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_videos < 1) throw std::invalid_argument("generate_synthetic: num_videos must be positive");
    if (spec.frames_min > spec.frames_max) {
        throw std::invalid_argument("generate_synthetic: frames_min exceeds frames_max");
    }
    if (spec.window_half_width < 0) {
        throw std::invalid_argument("generate_synthetic: window_half_width must be non-negative");
    }
    const int window_len = 2 * spec.window_half_width + 1;
    if (spec.frames_min < std::max(2, window_len)) {
        throw std::invalid_argument("generate_synthetic: pathology window of " +
                                    std::to_string(window_len) +
                                    " frames does not fit in the shortest video (frames_min=" +
                                    std::to_string(spec.frames_min) + ")");
    }
    if (spec.image_h < 8 || spec.image_w < 8) {
        throw std::invalid_argument("generate_synthetic: images must be at least 8x8");
    }
    if (spec.smoothness <= 0.0) throw std::invalid_argument("generate_synthetic: smoothness must be positive");
    if (spec.noise_level < 0.0) throw std::invalid_argument("generate_synthetic: noise_level must be non-negative");

    SyntheticCorpus out;
    out.corpus.image_h = spec.image_h;
    out.corpus.image_w = spec.image_w;
    out.corpus.image_c = 1;

    constexpr int kGratings = 3;
    for (int vi = 0; vi < spec.num_videos; ++vi) {
        Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(vi)));
        Video v;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "v%03d", vi);
        v.id = idbuf;
        v.frames = static_cast<int>(rng.uniform_int(spec.frames_min, spec.frames_max));

        const int T = static_cast<int>(
            rng.uniform_int(1 + spec.window_half_width, v.frames - spec.window_half_width));
        out.windows.push_back({v.id, T - spec.window_half_width, T + spec.window_half_width});

        // Per-video texture: oriented gratings whose phases drift over time.
        struct Grating {
            double angle, freq, phase, drift, amp;
        };
        Grating gr[kGratings];
        for (auto& g : gr) {
            g.angle = rng.uniform_real(0.0, M_PI);
            g.freq = rng.uniform_real(1.0, 3.0);  // cycles across the width
            g.phase = rng.uniform_real(0.0, 2.0 * M_PI);
            const double mag = rng.uniform_real(0.25, 0.5) * 2.0 * M_PI / spec.smoothness;
            g.drift = rng.uniform_real() < 0.5 ? -mag : mag;
            g.amp = rng.uniform_real(0.08, 0.15);
        }

        // The implanted patch: an oriented high-frequency pattern under a
        // Gaussian envelope, drifting slowly, visible only inside the window.
        const double pcx0 = rng.uniform_real(0.3, 0.7) * spec.image_w;
        const double pcy0 = rng.uniform_real(0.3, 0.7) * spec.image_h;
        const double pvx = rng.uniform_real(-0.4, 0.4) * spec.image_w / spec.smoothness;
        const double pvy = rng.uniform_real(-0.4, 0.4) * spec.image_h / spec.smoothness;
        const double psigma = rng.uniform_real(0.12, 0.18) * spec.image_w;
        const double plambda = rng.uniform_real(2.2, 3.5);
        const double pamp = rng.uniform_real(0.35, 0.5);
        const double ppsi = rng.uniform_real(0.0, M_PI);

        v.frame_data.reserve(static_cast<std::size_t>(v.frames));
        for (int j = 1; j <= v.frames; ++j) {
            Image im = Image::zeros(spec.image_h, spec.image_w, 1);
            const bool visible = j >= T - spec.window_half_width && j <= T + spec.window_half_width;
            // drift is relative to the window center so the patch cannot walk
            // off the image while it is supposed to be visible
            const double pcx = pcx0 + pvx * (j - T);
            const double pcy = pcy0 + pvy * (j - T);
            for (int y = 0; y < spec.image_h; ++y) {
                for (int x = 0; x < spec.image_w; ++x) {
                    double val = 0.5;
                    for (const auto& g : gr) {
                        const double d = (x * std::cos(g.angle) + y * std::sin(g.angle)) / spec.image_w;
                        val += g.amp * std::sin(2.0 * M_PI * g.freq * d + g.phase + g.drift * (j - 1));
                    }
                    if (visible) {
                        const double dx = x - pcx;
                        const double dy = y - pcy;
                        const double r2 = dx * dx + dy * dy;
                        const double along = dx * std::cos(ppsi) + dy * std::sin(ppsi);
                        val += pamp * std::exp(-r2 / (2.0 * psigma * psigma)) *
                               std::cos(2.0 * M_PI * along / plambda);
                    }
                    im.at(y, x) = val;
                }
            }
            if (spec.noise_level > 0.0) {
                for (auto& p : im.px) p += rng.normal(0.0, spec.noise_level);
            }
            for (auto& p : im.px) p = std::min(1.0, std::max(0.0, p));
            v.frame_data.push_back(std::move(im));
        }
        out.corpus.videos.push_back(std::move(v));
    }
    return out;
}

LabeledImageSet label_frames(const SyntheticCorpus& sc, const LabelingConfig& cfg) {
    return label_frames(sc, cfg, {});
}

LabeledImageSet label_frames(const SyntheticCorpus& sc, const LabelingConfig& cfg,
                             const std::vector<std::string>& video_ids) {
    const auto selections =
        select_labeled_frames(sc.windows, sc.corpus, cfg, video_ids.empty() ? nullptr : &video_ids);
    LabeledImageSet set;
    set.classes = {kNormal, kLesion};
    for (const auto& sel : selections) {
        const Video& v = sc.corpus.video(sel.video_id);
        for (int j : sel.lesion) {
            set.items.push_back({decode_frame(sc.corpus, v, j), kLesion, sel.video_id});
        }
        for (int j : sel.normal) {
            set.items.push_back({decode_frame(sc.corpus, v, j), kNormal, sel.video_id});
        }
    }
    return set;
}

LabeledImageSet load_labeled(const std::filesystem::path& manifest_path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("labeled manifest " + manifest_path.string() + ": " + e.what());
    }
    const std::string where = "labeled manifest " + manifest_path.string();
    reject_unknown_keys(j, {"classes", "items"}, where);
    if (!j.contains("classes") || !j.contains("items")) {
        throw std::runtime_error(where + ": classes and items are required");
    }
    LabeledImageSet set;
    for (const auto& c : j["classes"]) set.classes.push_back(c.get<std::string>());
    if (set.classes.size() < 2) throw std::runtime_error(where + ": need at least two classes");
    const std::filesystem::path root = manifest_path.parent_path();
    for (const auto& item : j["items"]) {
        reject_unknown_keys(item, {"path", "label", "patient"}, where);
        LabeledImage li;
        li.label = item.at("label").get<std::string>();
        li.patient_id = item.at("patient").get<std::string>();
        if (std::find(set.classes.begin(), set.classes.end(), li.label) == set.classes.end()) {
            throw std::runtime_error(where + ": label '" + li.label + "' not in classes");
        }
        li.image = read_pgm(root / item.at("path").get<std::string>());
        set.items.push_back(std::move(li));
    }
    return set;
}

void write_labeled_manifest(const std::vector<PathologyWindow>& windows,
                            const VideoCorpus& corpus, const LabelingConfig& cfg,
                            const std::filesystem::path& manifest_path) {
    const auto selections = select_labeled_frames(windows, corpus, cfg, nullptr);
    ordered_json j;
    j["classes"] = {kNormal, kLesion};
    j["items"] = ordered_json::array();
    for (const auto& sel : selections) {
        for (int idx : sel.lesion) {
            j["items"].push_back(ordered_json{{"path", sel.video_id + "/" + frame_file_name(idx)},
                                              {"label", kLesion},
                                              {"patient", sel.video_id}});
        }
        for (int idx : sel.normal) {
            j["items"].push_back(ordered_json{{"path", sel.video_id + "/" + frame_file_name(idx)},
                                              {"label", kNormal},
                                              {"patient", sel.video_id}});
        }
    }
    write_text_file(manifest_path, j.dump(2) + "\n");
}

Image augment(const Image& im, const AugmentConfig& cfg, Rng& rng) {
    if (cfg.crop_min_scale <= 0.0 || cfg.crop_min_scale > 1.0) {
        throw std::invalid_argument("augment: crop_min_scale must lie in (0, 1]; a crop cannot "
                                    "exceed the image");
    }
    if (cfg.hflip_prob < 0.0 || cfg.hflip_prob > 1.0) {
        throw std::invalid_argument("augment: hflip_prob must lie in [0, 1]");
    }
    if (cfg.brightness < 0.0 || cfg.contrast < 0.0 || cfg.noise_stddev < 0.0) {
        throw std::invalid_argument("augment: jitter magnitudes must be non-negative");
    }

    Image out = im;

    if (cfg.crop_min_scale < 1.0) {
        const double s = rng.uniform_real(cfg.crop_min_scale, 1.0);
        const int ch = std::max(1, static_cast<int>(std::lround(im.h * s)));
        const int cw = std::max(1, static_cast<int>(std::lround(im.w * s)));
        const int y0 = static_cast<int>(rng.uniform_int(0, im.h - ch));
        const int x0 = static_cast<int>(rng.uniform_int(0, im.w - cw));
        Image crop = Image::zeros(ch, cw, im.c);
        for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
                for (int k = 0; k < im.c; ++k) crop.at(y, x, k) = out.at(y0 + y, x0 + x, k);
            }
        }
        out = bilinear_resize(crop, im.h, im.w);
    }

    // Probability 1 flips unconditionally without spending a draw, so a
    // deterministic flip does not perturb the stream.
    const bool flip = cfg.hflip_prob >= 1.0 ||
                      (cfg.hflip_prob > 0.0 && rng.uniform_real() < cfg.hflip_prob);
    if (flip) {
        for (int y = 0; y < out.h; ++y) {
            for (int x = 0; x < out.w / 2; ++x) {
                for (int k = 0; k < out.c; ++k) std::swap(out.at(y, x, k), out.at(y, out.w - 1 - x, k));
            }
        }
    }

    if (cfg.contrast > 0.0 || cfg.brightness > 0.0) {
        const double f = cfg.contrast > 0.0 ? rng.uniform_real(1.0 - cfg.contrast, 1.0 + cfg.contrast) : 1.0;
        const double b = cfg.brightness > 0.0 ? rng.uniform_real(-cfg.brightness, cfg.brightness) : 0.0;
        for (auto& p : out.px) p = (p - 0.5) * f + 0.5 + b;
    }

    if (cfg.noise_stddev > 0.0) {
        for (auto& p : out.px) p += rng.normal(0.0, cfg.noise_stddev);
    }

    if (cfg.crop_min_scale < 1.0 || flip || cfg.contrast > 0.0 || cfg.brightness > 0.0 ||
        cfg.noise_stddev > 0.0) {
        for (auto& p : out.px) p = std::min(1.0, std::max(0.0, p));
    }
    return out;
}

}  // namespace uvcl::dataset
