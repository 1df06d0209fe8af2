#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "uvcl/core.hpp"

// Schedules the hardness of within-video negatives across training. The
// exclusion radius starts wide (easy negatives, far from the anchor) and is
// cosine-annealed down to delta_low (hard negatives, temporally close). Three
// modes exist so the schedule itself can be ablated:
//
//   proposed  cross-video-only warm-up, then joint loss with easy-to-hard
//             annealing
//   anti      joint loss from epoch 0 with the reversed (hard-to-easy)
//             schedule, cross-video-only in the final warmup_fraction epochs
//   control   joint loss throughout, radius drawn uniformly at random per
//             tuple
namespace uvcl::curriculum {

enum class Mode { Proposed, Anti, Control };
enum class Phase { CrossOnly, Full };

struct CurriculumConfig {
    Mode mode = Mode::Proposed;
    int total_epochs = 60;
    double warmup_fraction = 0.2;  // rho: share of epochs spent cross-video-only
    int delta_low = 7;
};

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);
std::string to_string(Phase p);

// Number of cross-video-only epochs: the integer count of epochs e with
// e < rho * total_epochs.
int warmup_epochs(const CurriculumConfig& cfg);

// Widest exclusion radius for a video of M frames: ceil(M / 5).
int delta_high(int M);

// True when the video is so short that delta_high falls below delta_low; the
// schedule then pins the radius to delta_low and callers should warn once.
bool schedule_degenerate(int M, const CurriculumConfig& cfg);

struct CurriculumState {
    int epoch = 0;
    Phase phase = Phase::Full;
    // Anneal position in [0, 1], 1 = widest radius. Absent in control mode.
    std::optional<double> lambda;
};

Phase phase(int epoch, const CurriculumConfig& cfg);
CurriculumState state_at(int epoch, const CurriculumConfig& cfg);

// Exclusion radius for epoch and video length M. Control mode draws from the
// given rng (required); the deterministic modes ignore it.
int delta_at(int epoch, int M, const CurriculumConfig& cfg, Rng* rng = nullptr);

}  // namespace uvcl::curriculum
