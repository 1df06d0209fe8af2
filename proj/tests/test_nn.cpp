#include <cmath>
#include <vector>

#include "doctest.h"
#include "uvcl/core.hpp"
#include "uvcl/nn.hpp"
#include "uvcl/oracle/oracle.hpp"

using namespace uvcl;
using kernels::Exec;
using nn::Tensor;

TEST_SUITE("nn") {

TEST_CASE("relu and its backward mask") {
    Tensor x = Tensor::zeros({4});
    x.data = {-1, 0, 2, -3};
    Tensor y = nn::relu(x);
    CHECK(y.data == std::vector<double>{0, 0, 2, 0});

    Tensor dy = Tensor::zeros({4});
    dy.data = {1, 1, 1, 1};
    Tensor dx = nn::relu_backward(x, dy);
    CHECK(dx.data == std::vector<double>{0, 0, 1, 0});
}

TEST_CASE("row normalization and its gradient") {
    Tensor x = Tensor::zeros({1, 2});
    x.data = {3, 4};
    Tensor y = nn::l2_normalize_rows(x);
    CHECK(y.data[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(y.data[1] == doctest::Approx(0.8).epsilon(1e-15));

    // finite-difference check of the backward pass
    Tensor dy = Tensor::zeros({1, 2});
    dy.data = {0.3, -0.7};
    Tensor dx = nn::l2_normalize_rows_backward(x, y, dy);
    auto f = [&](const std::vector<double>& v) {
        Tensor t = Tensor::zeros({1, 2});
        t.data = v;
        Tensor out = nn::l2_normalize_rows(t);
        return out.data[0] * 0.3 - out.data[1] * 0.7;
    };
    auto fd = oracle::finite_diff_grad(f, x.data, 1e-6);
    CHECK(dx.data[0] == doctest::Approx(fd[0]).epsilon(1e-6));
    CHECK(dx.data[1] == doctest::Approx(fd[1]).epsilon(1e-6));
}

TEST_CASE("sgd follows the momentum plus weight decay convention") {
    nn::Param p;
    p.name = "w";
    p.value = Tensor::zeros({1});
    p.grad = Tensor::zeros({1});
    p.value.data[0] = 1.0;

    nn::ParamRefs refs = {&p};
    nn::Sgd opt(refs);
    nn::SgdConfig cfg;
    cfg.lr = 0.1;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.1;

    p.grad.data[0] = 0.5;
    opt.step(refs, cfg);
    CHECK(p.value.data[0] == doctest::Approx(0.94).epsilon(1e-15));

    p.grad.data[0] = 0.5;
    opt.step(refs, cfg);
    CHECK(p.value.data[0] == doctest::Approx(0.8266).epsilon(1e-15));
}

TEST_CASE("cosine learning rate hits base, half, and zero") {
    CHECK(nn::cosine_lr(0.003, 0, 60) == 0.003);
    CHECK(nn::cosine_lr(0.003, 30, 60) == doctest::Approx(0.0015).epsilon(1e-15));
    CHECK(nn::cosine_lr(0.003, 60, 60) == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("backbone shapes and width progression") {
    nn::BackboneConfig cfg;
    cfg.in_ch = 1;
    cfg.in_h = 16;
    cfg.in_w = 16;
    cfg.width = 4;
    cfg.blocks = 3;
    nn::Backbone f(cfg, "f");
    Rng rng(1);
    f.init(rng);

    REQUIRE(f.convs.size() == 3);
    CHECK(f.convs[0].out_ch == 4);
    CHECK(f.convs[1].out_ch == 8);
    CHECK(f.convs[2].out_ch == 16);
    CHECK(f.feature_dim() == 16);

    Tensor x = Tensor::zeros({2, 1, 16, 16});
    for (auto& v : x.data) v = 0.5;
    Tensor feat = f.forward(x, Exec::Serial);
    CHECK(feat.shape == std::vector<int>{2, 16});

    // identical rows in, identical rows out
    CHECK(std::equal(feat.data.begin(), feat.data.begin() + 16, feat.data.begin() + 16));

    nn::BackboneConfig bad = cfg;
    bad.in_h = 20;  // not divisible by 2^3
    CHECK_THROWS_AS(nn::Backbone(bad, "f"), std::exception);
}

TEST_CASE("backbone and head gradients agree with finite differences") {
    nn::BackboneConfig cfg;
    cfg.in_ch = 1;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.width = 2;
    cfg.blocks = 1;
    cfg.global_pool = "avg";  // smooth everywhere, kind to finite differences
    nn::Backbone f(cfg, "f");
    nn::ProjectionHead g("g", f.feature_dim(), 3, 4);
    Rng rng(17);
    f.init(rng);
    g.init(rng);

    Tensor x = Tensor::zeros({1, 1, 8, 8});
    for (auto& v : x.data) v = rng.uniform_real(0.1, 0.9);
    std::vector<double> probe = {0.3, -0.2, 0.5, 0.9};

    auto loss_from = [&](const Tensor& input) {
        Tensor feat = f.forward(input, Exec::Serial);
        Tensor out = g.forward(feat, Exec::Serial);
        double l = 0;
        for (int i = 0; i < 4; ++i) l += out.data[i] * probe[i];
        return l;
    };

    // analytic gradients
    nn::Backbone::Trace ft;
    nn::ProjectionHead::Trace gt;
    Tensor feat = f.forward(x, Exec::Serial, &ft);
    Tensor out = g.forward(feat, Exec::Serial, &gt);
    (void)out;
    Tensor dout = Tensor::zeros({1, 4});
    dout.data = probe;
    nn::ParamRefs params;
    f.collect(params);
    g.collect(params);
    nn::zero_grads(params);
    Tensor dfeat = g.backward(gt, dout, Exec::Serial);
    f.backward(ft, dfeat, Exec::Serial);

    // input gradient: reconstruct from a fresh trace-driven backward via
    // finite differences on the flat input vector
    auto fd_input = oracle::finite_diff_grad(
        [&](const std::vector<double>& v) {
            Tensor t = x;
            t.data = v;
            return loss_from(t);
        },
        x.data, 1e-6);

    // parameter gradients against finite differences, a spread of entries
    for (nn::Param* p : params) {
        auto fd = oracle::finite_diff_grad(
            [&](const std::vector<double>& v) {
                std::vector<double> saved = p->value.data;
                p->value.data = v;
                double l = loss_from(x);
                p->value.data = saved;
                return l;
            },
            p->value.data, 1e-6);
        std::size_t stride = std::max<std::size_t>(1, fd.size() / 5);
        for (std::size_t i = 0; i < fd.size(); i += stride) {
            // entries whose true gradient is zero only show FD rounding noise
            if (std::abs(fd[i]) < 1e-9 && std::abs(p->grad.data[i]) < 1e-9) continue;
            double denom = std::max(std::abs(fd[i]), std::abs(p->grad.data[i]));
            CHECK(std::abs(fd[i] - p->grad.data[i]) / denom < 1e-5);
        }
    }
    (void)fd_input;  // input gradient is not exposed by Backbone::backward
}

TEST_CASE("global max pool backbone routes gradients through the argmax") {
    nn::BackboneConfig cfg;
    cfg.in_ch = 1;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.width = 2;
    cfg.blocks = 1;
    cfg.global_pool = "max";
    nn::Backbone f(cfg, "f");
    Rng rng(23);
    f.init(rng);

    Tensor x = Tensor::zeros({1, 1, 8, 8});
    for (auto& v : x.data) v = rng.uniform_real(0.0, 1.0);

    nn::Backbone::Trace tr;
    Tensor feat = f.forward(x, Exec::Serial, &tr);
    Tensor dfeat = Tensor::zeros(feat.shape);
    for (auto& v : dfeat.data) v = 1.0;

    nn::ParamRefs params;
    f.collect(params);
    nn::zero_grads(params);
    f.backward(tr, dfeat, Exec::Serial);

    // finite-difference check on the first conv bias (max pool gradients are
    // valid only for perturbations that keep the argmax; bias shifts whole
    // channels so the argmax is stable)
    nn::Param* bias = params[1];
    REQUIRE(bias->name == "f.conv0.b");
    auto fd = oracle::finite_diff_grad(
        [&](const std::vector<double>& v) {
            std::vector<double> saved = bias->value.data;
            bias->value.data = v;
            Tensor out = f.forward(x, Exec::Serial);
            double l = 0;
            for (double d : out.data) l += d;
            bias->value.data = saved;
            return l;
        },
        bias->value.data, 1e-6);
    for (std::size_t i = 0; i < fd.size(); ++i)
        CHECK(bias->grad.data[i] == doctest::Approx(fd[i]).epsilon(1e-5));
}

TEST_CASE("unsupported pool names are rejected") {
    nn::BackboneConfig cfg;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.blocks = 1;
    cfg.global_pool = "median";
    CHECK_THROWS_AS(nn::Backbone(cfg, "f"), std::exception);
}

}  // TEST_SUITE
