#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

// Independent reference implementations used to validate the library. Nothing
// in here may include or call library code: loss values are recomputed naively
// in extended precision, gradients come from finite differences, and sampler
// supports from a direct predicate scan. Linked only into test binaries.
namespace uvcl::oracle {

// Contrastive loss on one tuple, computed straight from the definition in
// long double. z_minus may be empty (cross-video-only form) and z_hat may be
// absent (within-video-only form). Falls back to a log-domain evaluation when
// the naive exponentials over- or underflow.
long double oracle_loss(const std::vector<double>& q,
                        const std::vector<double>& z_plus,
                        const std::vector<std::vector<double>>& z_minus,
                        const std::optional<std::vector<double>>& z_hat,
                        double tau);

// Central finite differences of an arbitrary scalar function.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& fn,
                                     const std::vector<double>& x, double eps = 1e-5);

// Frame indices (1-based) eligible as positives for anchor a: within delta,
// excluding a itself. Plain scan over 1..M.
std::vector<int> enumerate_positive_support(int a, int delta, int M);

// Frame indices eligible as within-video negatives: farther than big_delta
// from a.
std::vector<int> enumerate_negative_support(int a, int big_delta, int M);

// One row of comparison output for the test logs.
struct OracleReport {
    std::string name;
    double reference = 0.0;
    double candidate = 0.0;

    double abs_err() const;
    std::string line() const;
};

}  // namespace uvcl::oracle
