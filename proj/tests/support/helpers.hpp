#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "uvcl/dataset.hpp"

// Shared scaffolding for the test suites: scratch directories under the
// system temp root, file slurping, stdout capture for CLI tests, and a small
// in-memory corpus that trainer-level tests can share.
namespace testsupport {

inline std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "uvcl_tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("test cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CoutCapture {
    std::ostringstream ss;
    std::streambuf* old;
    CoutCapture() : old(std::cout.rdbuf(ss.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old); }
    std::string str() const { return ss.str(); }
};

// Four short 16x16 videos; enough structure for the trainer to chew on while
// keeping tests fast.
inline uvcl::dataset::SyntheticCorpus tiny_corpus(std::uint64_t seed = 11) {
    uvcl::dataset::SyntheticSpec spec;
    spec.num_videos = 4;
    spec.frames_min = 24;
    spec.frames_max = 28;
    spec.image_h = 16;
    spec.image_w = 16;
    spec.window_half_width = 2;
    spec.seed = seed;
    return uvcl::dataset::generate_synthetic(spec);
}

}  // namespace testsupport
