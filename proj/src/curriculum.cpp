#include "uvcl/curriculum.hpp"

#include <stdexcept>

namespace uvcl::curriculum {

namespace {

void validate(const CurriculumConfig& cfg) {
    if (cfg.total_epochs < 1) throw std::invalid_argument("curriculum: total_epochs must be at least 1");
    if (cfg.warmup_fraction < 0.0 || cfg.warmup_fraction >= 1.0) {
        throw std::invalid_argument("curriculum: warmup_fraction must lie in [0, 1)");
    }
    if (cfg.delta_low < 1) throw std::invalid_argument("curriculum: delta_low must be at least 1");
}

void check_epoch(int epoch, const CurriculumConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.total_epochs) {
        throw std::invalid_argument("curriculum: epoch " + std::to_string(epoch) +
                                    " outside [0, " + std::to_string(cfg.total_epochs) + ")");
    }
}

// Anneal position for a deterministic mode: 1 at the wide end of the
// schedule, 0 at delta_low. The anti schedule evaluates the same grid at the
// mirrored epoch index, which makes its radius sequence the exact reverse of
// the proposed one.
double lambda_at(int epoch, const CurriculumConfig& cfg) {
    const int w = warmup_epochs(cfg);
    const int full_len = cfg.total_epochs - w;
    if (cfg.mode == Mode::Proposed) {
        if (epoch < w) return 1.0;
        const int e = epoch - w;
        const double t = full_len > 1 ? static_cast<double>(e) / (full_len - 1) : 1.0;
        return 0.5 * (1.0 + std::cos(M_PI * t));
    }
    // Anti: full phase first, cross-video-only tail.
    if (epoch >= full_len) return 1.0;
    const double t = full_len > 1 ? static_cast<double>(full_len - 1 - epoch) / (full_len - 1) : 0.0;
    return 0.5 * (1.0 + std::cos(M_PI * t));
}

}  // namespace

Mode mode_from_string(const std::string& s) {
    if (s == "proposed") return Mode::Proposed;
    if (s == "anti") return Mode::Anti;
    if (s == "control") return Mode::Control;
    throw std::invalid_argument("curriculum: unknown mode '" + s + "' (expected proposed, anti or control)");
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Proposed: return "proposed";
        case Mode::Anti: return "anti";
        case Mode::Control: return "control";
    }
    return "?";
}

std::string to_string(Phase p) { return p == Phase::CrossOnly ? "cross" : "full"; }

int warmup_epochs(const CurriculumConfig& cfg) {
    validate(cfg);
    // Count of integer epochs e with e < rho * E. The small guard keeps an
    // exact product like 0.2 * 60 from creeping over 12 in floating point.
    const int w = static_cast<int>(std::ceil(cfg.warmup_fraction * cfg.total_epochs - 1e-9));
    if (w >= cfg.total_epochs) {
        throw std::invalid_argument("curriculum: warmup_fraction leaves no epochs for the full loss");
    }
    return std::max(0, w);
}

int delta_high(int M) {
    if (M < 1) throw std::invalid_argument("curriculum: video length must be positive");
    return (M + 4) / 5;
}

bool schedule_degenerate(int M, const CurriculumConfig& cfg) {
    validate(cfg);
    return delta_high(M) < cfg.delta_low;
}

Phase phase(int epoch, const CurriculumConfig& cfg) {
    validate(cfg);
    check_epoch(epoch, cfg);
    const int w = warmup_epochs(cfg);
    switch (cfg.mode) {
        case Mode::Proposed: return epoch < w ? Phase::CrossOnly : Phase::Full;
        case Mode::Anti: return epoch >= cfg.total_epochs - w ? Phase::CrossOnly : Phase::Full;
        case Mode::Control: return Phase::Full;
    }
    return Phase::Full;
}

CurriculumState state_at(int epoch, const CurriculumConfig& cfg) {
    CurriculumState st;
    st.epoch = epoch;
    st.phase = phase(epoch, cfg);
    if (cfg.mode != Mode::Control) st.lambda = lambda_at(epoch, cfg);
    return st;
}

int delta_at(int epoch, int M, const CurriculumConfig& cfg, Rng* rng) {
    validate(cfg);
    check_epoch(epoch, cfg);
    const int dl = cfg.delta_low;
    const int dh = delta_high(M);
    if (dh <= dl) return dl;  // short video: schedule collapses to the hard radius

    if (cfg.mode == Mode::Control) {
        if (!rng) throw std::invalid_argument("curriculum: control mode needs an rng to draw the radius");
        return static_cast<int>(rng->uniform_int(dl, dh));
    }

    const double lam = lambda_at(epoch, cfg);
    const double value = dl + (dh - dl) * lam;
    const int d = static_cast<int>(std::floor(value + 0.5));  // ties round toward the wide end
    return std::min(dh, std::max(dl, d));
}

}  // namespace uvcl::curriculum
