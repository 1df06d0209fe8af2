#include "uvcl/sampler.hpp"

#include <stdexcept>

namespace uvcl::sampler {

namespace {

void check_anchor(int a, int M, const char* fn) {
    if (M < 1) throw std::invalid_argument(std::string(fn) + ": video has no frames");
    if (a < 1 || a > M) {
        throw std::invalid_argument(std::string(fn) + ": anchor " + std::to_string(a) +
                                    " outside [1, " + std::to_string(M) + "]");
    }
}

// Sizes of the two arms of the exclusion-window complement.
struct NegativeArms {
    int left;   // frames 1 .. a - big_delta - 1
    int right;  // frames a + big_delta + 1 .. M
};

NegativeArms negative_arms(int a, int big_delta, int M) {
    NegativeArms arms{};
    arms.left = std::max(0, a - big_delta - 1);
    arms.right = std::max(0, M - (a + big_delta));
    return arms;
}

}  // namespace

std::vector<int> positive_support(int a, int delta, int M) {
    check_anchor(a, M, "positive_support");
    if (delta < 1) throw std::invalid_argument("positive_support: delta must be at least 1");
    if (M == 1) {
        throw std::runtime_error("positive_support: video has a single frame, no positive available");
    }
    const int lo = std::max(1, a - delta);
    const int hi = std::min(M, a + delta);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(hi - lo));
    for (int j = lo; j <= hi; ++j) {
        if (j != a) out.push_back(j);
    }
    return out;
}

std::vector<int> negative_support(int a, int big_delta, int M) {
    check_anchor(a, M, "negative_support");
    if (big_delta < 0) throw std::invalid_argument("negative_support: big_delta must be non-negative");
    const NegativeArms arms = negative_arms(a, big_delta, M);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(arms.left + arms.right));
    for (int j = 1; j <= arms.left; ++j) out.push_back(j);
    for (int j = a + big_delta + 1; j <= M; ++j) out.push_back(j);
    return out;
}

SampleTuple sample_tuple(const std::string& video_id, int M, int delta, int k,
                         int big_delta, Rng& rng) {
    if (M < 2) {
        throw std::runtime_error("sample_tuple: video '" + video_id +
                                 "' has fewer than 2 frames, cannot form a positive pair");
    }
    if (k < 1) throw std::invalid_argument("sample_tuple: k must be at least 1");

    constexpr int kMaxRedraws = 10;
    for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
        const int a = static_cast<int>(rng.uniform_int(1, M));
        const NegativeArms arms = negative_arms(a, big_delta, M);
        const int total = arms.left + arms.right;
        if (total == 0) continue;  // redraw the anchor

        const std::vector<int> pos = positive_support(a, delta, M);
        SampleTuple t;
        t.video_id = video_id;
        t.anchor = a;
        t.positive = pos[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pos.size()) - 1))];
        t.negatives.reserve(static_cast<std::size_t>(k));
        for (int j = 0; j < k; ++j) {
            const int r = static_cast<int>(rng.uniform_int(0, total - 1));
            t.negatives.push_back(r < arms.left ? 1 + r : a + big_delta + 1 + (r - arms.left));
        }
        t.delta = delta;
        t.big_delta = big_delta;
        return t;
    }
    throw std::runtime_error(
        "sample_tuple: no anchor with a non-empty negative support after " +
        std::to_string(kMaxRedraws) + " redraws in video '" + video_id +
        "' (M=" + std::to_string(M) + ", big_delta=" + std::to_string(big_delta) +
        "); reduce the exclusion radius or use longer videos");
}

}  // namespace uvcl::sampler
