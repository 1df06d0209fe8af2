#include "uvcl/oracle/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace uvcl::oracle {

namespace {

long double dot_ld(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("oracle_loss: dimension mismatch");
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
    return acc;
}

long double norm_ld(const std::vector<double>& a) { return std::sqrt(dot_ld(a, a)); }

long double cosine_ld(const std::vector<double>& a, const std::vector<double>& b) {
    const long double na = norm_ld(a), nb = norm_ld(b);
    if (na == 0.0L || nb == 0.0L) throw std::invalid_argument("oracle_loss: zero-norm vector");
    return dot_ld(a, b) / (na * nb);
}

}  // namespace

long double oracle_loss(const std::vector<double>& q,
                        const std::vector<double>& z_plus,
                        const std::vector<std::vector<double>>& z_minus,
                        const std::optional<std::vector<double>>& z_hat,
                        double tau) {
    if (tau <= 0.0) throw std::invalid_argument("oracle_loss: tau must be positive");
    std::vector<long double> logits;
    logits.push_back(cosine_ld(q, z_plus) / tau);
    for (const auto& z : z_minus) logits.push_back(cosine_ld(q, z) / tau);
    if (z_hat) logits.push_back(cosine_ld(q, *z_hat) / tau);

    // Naive evaluation first.
    long double num = std::exp(logits[0]);
    long double den = 0.0L;
    for (long double l : logits) den += std::exp(l);
    if (std::isfinite(static_cast<double>(num)) && std::isfinite(static_cast<double>(den)) &&
        den > 0.0L && num > 0.0L) {
        return -std::log(num / den);
    }

    // Log-domain fallback for extreme tau.
    long double mx = logits[0];
    for (long double l : logits) mx = std::max(mx, l);
    long double s = 0.0L;
    for (long double l : logits) s += std::exp(l - mx);
    return -(logits[0] - mx - std::log(s));
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& fn,
                                     const std::vector<double>& x, double eps) {
    std::vector<double> g(x.size());
    std::vector<double> p = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        p[i] = x[i] + eps;
        const double hi = fn(p);
        p[i] = x[i] - eps;
        const double lo = fn(p);
        p[i] = x[i];
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

std::vector<int> enumerate_positive_support(int a, int delta, int M) {
    std::vector<int> out;
    for (int j = 1; j <= M; ++j) {
        if (j != a && std::abs(j - a) <= delta) out.push_back(j);
    }
    return out;
}

std::vector<int> enumerate_negative_support(int a, int big_delta, int M) {
    std::vector<int> out;
    for (int j = 1; j <= M; ++j) {
        if (std::abs(j - a) > big_delta) out.push_back(j);
    }
    return out;
}

double OracleReport::abs_err() const { return std::fabs(reference - candidate); }

std::string OracleReport::line() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "oracle %-32s ref=%.17g impl=%.17g abs_err=%.3g",
                  name.c_str(), reference, candidate, abs_err());
    return std::string(buf);
}

}  // namespace uvcl::oracle
