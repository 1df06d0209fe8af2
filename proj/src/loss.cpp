#include "uvcl/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace uvcl::loss {

namespace {

void check_vector(const std::vector<double>& v, std::size_t dim, const char* what) {
    if (v.size() != dim) {
        throw std::invalid_argument(std::string("loss: ") + what + " has dimension " +
                                    std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw std::invalid_argument(std::string("loss: ") + what + " contains a non-finite value");
    }
}

double norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double cosine(const std::vector<double>& a, double na, const std::vector<double>& b, const char* what) {
    const double nb = norm(b);
    if (nb == 0.0) throw std::invalid_argument(std::string("loss: ") + what + " has zero norm");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc / (na * nb);
}

// Logit layout shared by every entry point: index 0 is the positive, then the
// within-video negatives in order, then the synthesized negative if present.
std::vector<double> build_logits(const LossInputs& in) {
    if (in.tau <= 0.0) throw std::invalid_argument("loss: tau must be positive");
    const std::size_t dim = in.q.size();
    if (dim == 0) throw std::invalid_argument("loss: q is empty");
    check_vector(in.q, dim, "q");
    check_vector(in.z_plus, dim, "z_plus");
    for (const auto& z : in.z_minus) check_vector(z, dim, "z_minus entry");
    if (in.z_hat_minus) check_vector(*in.z_hat_minus, dim, "z_hat_minus");
    if (in.z_minus.empty() && !in.z_hat_minus) {
        throw std::invalid_argument("loss: at least one negative is required");
    }
    const double nq = norm(in.q);
    if (nq == 0.0) throw std::invalid_argument("loss: q has zero norm");

    std::vector<double> logits;
    logits.reserve(in.z_minus.size() + 2);
    logits.push_back(cosine(in.q, nq, in.z_plus, "z_plus") / in.tau);
    for (const auto& z : in.z_minus) logits.push_back(cosine(in.q, nq, z, "z_minus entry") / in.tau);
    if (in.z_hat_minus) logits.push_back(cosine(in.q, nq, *in.z_hat_minus, "z_hat_minus") / in.tau);
    return logits;
}

double logsumexp(const std::vector<double>& x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double s = 0.0;
    for (double v : x) s += std::exp(v - mx);
    return mx + std::log(s);
}

}  // namespace

double loss_full(const LossInputs& in) {
    const std::vector<double> logits = build_logits(in);
    return logsumexp(logits) - logits[0];
}

double loss_cross(const std::vector<double>& q, const std::vector<double>& z_plus,
                  const std::vector<double>& z_hat_minus, double tau) {
    LossInputs in;
    in.q = q;
    in.z_plus = z_plus;
    in.z_hat_minus = z_hat_minus;
    in.tau = tau;
    return loss_full(in);
}

LossGradients loss_gradients(const LossInputs& in) {
    const std::vector<double> logits = build_logits(in);
    const std::size_t dim = in.q.size();
    const std::size_t m = logits.size();

    // softmax over the logits; coefficient on logit i is softmax_i - [i == 0]
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> sm(m);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sm[i] = std::exp(logits[i] - mx);
        s += sm[i];
    }
    for (auto& v : sm) v /= s;

    const double nq = norm(in.q);
    std::vector<double> u(dim);
    for (std::size_t d = 0; d < dim; ++d) u[d] = in.q[d] / nq;

    LossGradients g;
    g.dq.assign(dim, 0.0);
    g.dz_plus.assign(dim, 0.0);
    g.dz_minus.assign(in.z_minus.size(), std::vector<double>(dim, 0.0));
    if (in.z_hat_minus) g.dz_hat_minus.assign(dim, 0.0);

    // d cos(q, v) / dq = (w - cos * u) / |q|,  d cos / dv = (u - cos * w) / |v|
    // with u, w the unit vectors. Each logit contributes coeff / tau times that.
    auto accumulate = [&](const std::vector<double>& v, double coeff, std::vector<double>* dv) {
        const double nv = norm(v);
        std::vector<double> w(dim);
        for (std::size_t d = 0; d < dim; ++d) w[d] = v[d] / nv;
        double cs = 0.0;
        for (std::size_t d = 0; d < dim; ++d) cs += u[d] * w[d];
        const double c = coeff / in.tau;
        for (std::size_t d = 0; d < dim; ++d) {
            g.dq[d] += c * (w[d] - cs * u[d]) / nq;
            (*dv)[d] += c * (u[d] - cs * w[d]) / nv;
        }
    };

    accumulate(in.z_plus, sm[0] - 1.0, &g.dz_plus);
    for (std::size_t j = 0; j < in.z_minus.size(); ++j) {
        accumulate(in.z_minus[j], sm[1 + j], &g.dz_minus[j]);
    }
    if (in.z_hat_minus) {
        accumulate(*in.z_hat_minus, sm[m - 1], &g.dz_hat_minus);
    }
    return g;
}

}  // namespace uvcl::loss
