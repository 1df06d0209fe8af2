#include <cmath>
#include <vector>

#include "doctest.h"
#include "uvcl/core.hpp"
#include "uvcl/loss.hpp"
#include "uvcl/oracle/oracle.hpp"

using namespace uvcl;

namespace {

std::vector<double> unit(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

std::vector<double> random_unit(int dim, Rng& rng) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    return unit(v);
}

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("frozen two-term case: aligned positive, orthogonal negative") {
    loss::LossInputs in;
    in.q = {1, 0, 0};
    in.z_plus = {1, 0, 0};
    in.z_minus = {{0, 1, 0}};
    in.tau = 1.0;
    // logits [1, 0]: log(e + 1) - 1
    CHECK(loss::loss_full(in) == doctest::Approx(0.31326168751822281).epsilon(1e-14));
}

TEST_CASE("frozen three-term case: logits 1, 0, -1") {
    loss::LossInputs in;
    in.q = {1, 0, 0};
    in.z_plus = {1, 0, 0};
    in.z_minus = {{0, 1, 0}, {-1, 0, 0}};
    in.tau = 1.0;
    CHECK(loss::loss_full(in) == doctest::Approx(0.40760596444438035).epsilon(1e-14));
}

TEST_CASE("equal similarities give log of the logit count") {
    // Positive and negatives all identical: softmax is uniform.
    loss::LossInputs in;
    in.q = {1, 0};
    in.z_plus = {1, 0};
    in.z_minus = {{1, 0}, {1, 0}, {1, 0}, {1, 0}};
    in.tau = 0.31;  // temperature cancels when all logits are equal
    CHECK(loss::loss_full(in) == doctest::Approx(1.6094379124341003).epsilon(1e-14));
}

TEST_CASE("dropping the intra negatives reduces to the cross-video loss bitwise") {
    Rng rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        auto q = random_unit(16, rng);
        auto zp = random_unit(16, rng);
        auto zh = random_unit(16, rng);
        loss::LossInputs in;
        in.q = q;
        in.z_plus = zp;
        in.z_hat_minus = zh;
        in.tau = 0.07;
        double full = loss::loss_full(in);
        double cross = loss::loss_cross(q, zp, zh, 0.07);
        CHECK(full == cross);  // same code path, bit-identical
    }
}

TEST_CASE("matches the long-double oracle on random inputs") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        int k = trial % 6;
        double tau = (trial % 3 == 0) ? 0.07 : (trial % 3 == 1) ? 0.5 : 1.0;
        loss::LossInputs in;
        in.q = random_unit(32, rng);
        in.z_plus = random_unit(32, rng);
        for (int j = 0; j < k; ++j) in.z_minus.push_back(random_unit(32, rng));
        bool with_hat = trial % 2 == 0 || k == 0;
        std::optional<std::vector<double>> hat;
        if (with_hat) {
            hat = random_unit(32, rng);
            in.z_hat_minus = hat;
        }
        in.tau = tau;
        long double ref = oracle::oracle_loss(in.q, in.z_plus, in.z_minus, hat, tau);
        double got = loss::loss_full(in);
        CHECK(std::abs(static_cast<double>(ref) - got) < 1e-9);
    }
}

TEST_CASE("loss is non-negative and respects the similarity bound") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        loss::LossInputs in;
        in.q = random_unit(8, rng);
        in.z_plus = random_unit(8, rng);
        for (int j = 0; j < 3; ++j) in.z_minus.push_back(random_unit(8, rng));
        in.z_hat_minus = random_unit(8, rng);
        in.tau = 0.07;
        double l = loss::loss_full(in);
        CHECK(l >= 0.0);
        // logits live in [-1/tau, 1/tau]; the gap to the positive is at most
        // 2/tau, so loss <= 2/tau + log(#logits).
        CHECK(l <= 2.0 / 0.07 + std::log(5.0) + 1e-12);
    }
}

TEST_CASE("a perfectly separated positive drives the loss to zero") {
    loss::LossInputs in;
    in.q = {1, 0};
    in.z_plus = {1, 0};
    in.z_minus = {{-1, 0}};
    in.tau = 0.01;  // logit gap 200: the negative term is below double epsilon
    CHECK(loss::loss_full(in) < 1e-10);
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(77);
    const int dim = 12;
    for (int trial = 0; trial < 10; ++trial) {
        loss::LossInputs in;
        in.q = random_unit(dim, rng);
        in.z_plus = random_unit(dim, rng);
        in.z_minus = {random_unit(dim, rng), random_unit(dim, rng)};
        in.z_hat_minus = random_unit(dim, rng);
        in.tau = 0.5;

        loss::LossGradients g = loss::loss_gradients(in);

        auto check_block = [&](const std::vector<double>& base, const std::vector<double>& grad,
                               auto assign) {
            auto f = [&](const std::vector<double>& v) {
                loss::LossInputs probe = in;
                assign(probe, v);
                return loss::loss_full(probe);
            };
            std::vector<double> fd = oracle::finite_diff_grad(f, base, 1e-5);
            for (int i = 0; i < dim; ++i) {
                double denom = std::max({std::abs(fd[i]), std::abs(grad[i]), 1e-8});
                CHECK(std::abs(fd[i] - grad[i]) / denom < 1e-6);
            }
        };

        check_block(in.q, g.dq, [](loss::LossInputs& p, const std::vector<double>& v) { p.q = v; });
        check_block(in.z_plus, g.dz_plus,
                    [](loss::LossInputs& p, const std::vector<double>& v) { p.z_plus = v; });
        check_block(in.z_minus[0], g.dz_minus[0],
                    [](loss::LossInputs& p, const std::vector<double>& v) { p.z_minus[0] = v; });
        check_block(*in.z_hat_minus, g.dz_hat_minus,
                    [](loss::LossInputs& p, const std::vector<double>& v) { p.z_hat_minus = v; });
    }
}

TEST_CASE("invalid inputs are rejected with clear errors") {
    loss::LossInputs in;
    in.q = {1, 0};
    in.z_plus = {1, 0};
    CHECK_THROWS_AS(loss::loss_full(in), std::exception);  // no negatives at all

    in.z_minus = {{0, 1}};
    in.tau = 0.0;
    CHECK_THROWS_AS(loss::loss_full(in), std::exception);  // temperature must be positive

    in.tau = 0.07;
    in.z_minus = {{0, 1, 0}};
    CHECK_THROWS_AS(loss::loss_full(in), std::exception);  // dimension mismatch

    in.z_minus = {{0, 0}};
    CHECK_THROWS_AS(loss::loss_full(in), std::exception);  // zero-norm vector
}

}  // TEST_SUITE
