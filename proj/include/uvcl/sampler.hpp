#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvcl/core.hpp"

// Frame-index sampling within one video. Frames are 1-based, matching how
// clinical video tooling numbers them. The anchor/positive pair comes from a
// narrow temporal window; within-video negatives come from outside a wider
// exclusion window whose radius is the curriculum-controlled hardness knob.
namespace uvcl::sampler {

struct SamplerConfig {
    int delta = 3;      // positive window radius
    int k = 3;          // within-video negatives per tuple
    int delta_low = 7;  // final (hardest) exclusion radius
    std::uint64_t seed = 0;
};

struct SampleTuple {
    std::string video_id;
    int anchor = 0;
    int positive = 0;
    std::vector<int> negatives;  // sampled with replacement
    int delta = 0;               // positive radius in force when drawn
    int big_delta = 0;           // exclusion radius in force when drawn
};

// Frames within delta of the anchor, anchor excluded, clipped to [1, M].
// Errors when no positive exists (M == 1).
std::vector<int> positive_support(int a, int delta, int M);

// Frames strictly farther than big_delta from the anchor. May be empty.
std::vector<int> negative_support(int a, int big_delta, int M);

// Draws one tuple: anchor uniform over frames, positive uniform over its
// support, k negatives i.i.d. uniform over the exclusion-window complement.
// An anchor whose negative support is empty is redrawn, up to 10 times, after
// which the draw fails with advice to shrink big_delta or use longer videos.
SampleTuple sample_tuple(const std::string& video_id, int M, int delta, int k,
                         int big_delta, Rng& rng);

}  // namespace uvcl::sampler
