#pragma once

#include <optional>
#include <vector>

// Contrastive losses over one sampled tuple. All similarity terms are cosine
// similarities divided by the temperature, and every exponential sum goes
// through max-subtracted log-sum-exp so the result stays finite for any
// positive temperature.
namespace uvcl::loss {

struct LossInputs {
    std::vector<double> q;                         // query embedding
    std::vector<double> z_plus;                    // positive key
    std::vector<std::vector<double>> z_minus;      // within-video negative keys
    std::optional<std::vector<double>> z_hat_minus;  // synthesized cross-video negative
    double tau = 0.07;
};

// Joint form: positive against the within-video negatives plus, when present,
// the synthesized cross-video negative. At least one negative of either kind
// is required. Omitting z_hat_minus gives the within-video-only variant;
// omitting z_minus (empty) gives the cross-video-only variant, identical to
// loss_cross.
double loss_full(const LossInputs& in);

// Cross-video-only form.
double loss_cross(const std::vector<double>& q, const std::vector<double>& z_plus,
                  const std::vector<double>& z_hat_minus, double tau);

struct LossGradients {
    std::vector<double> dq;
    std::vector<double> dz_plus;
    std::vector<std::vector<double>> dz_minus;
    std::vector<double> dz_hat_minus;  // empty when z_hat_minus absent
};

// Analytic gradients of loss_full w.r.t. every input vector. The trainer only
// propagates dq (keys and the synthesized negative are treated as constants),
// but all of them are exposed for verification.
LossGradients loss_gradients(const LossInputs& in);

}  // namespace uvcl::loss
