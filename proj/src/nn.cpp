#include "uvcl/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace uvcl::nn {

namespace {

void check_shape(const Tensor& t, std::size_t rank, const char* what) {
    if (t.shape.size() != rank) {
        throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                    " tensor, got rank " + std::to_string(t.shape.size()));
    }
}

int capped_width(int width, int block) {
    // width, 2w, 4w, 4w, ... deeper blocks stay at 4w
    const int factor = block == 0 ? 1 : (block == 1 ? 2 : 4);
    return width * factor;
}

}  // namespace

void zero_grads(const ParamRefs& params) {
    for (Param* p : params) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

Conv2d::Conv2d(const std::string& name, int in_ch_, int out_ch_, int ks_, int pad_) {
    in_ch = in_ch_;
    out_ch = out_ch_;
    ks = ks_;
    pad = pad_;
    w.name = name + ".w";
    w.value = Tensor::zeros({out_ch, in_ch, ks, ks});
    w.grad = Tensor::zeros({out_ch, in_ch, ks, ks});
    b.name = name + ".b";
    b.value = Tensor::zeros({out_ch});
    b.grad = Tensor::zeros({out_ch});
}

void Conv2d::init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (in_ch * ks * ks));
    for (auto& v : w.value.data) v = rng.normal(0.0, stddev);
    std::fill(b.value.data.begin(), b.value.data.end(), 0.0);
}

Tensor Conv2d::forward(const Tensor& x, kernels::Exec mode) const {
    check_shape(x, 4, "Conv2d::forward");
    if (x.dim(1) != in_ch) throw std::invalid_argument("Conv2d::forward: channel mismatch");
    const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
    const int oh = h + 2 * pad - ks + 1, ow = wd + 2 * pad - ks + 1;
    Tensor y = Tensor::zeros({n, out_ch, oh, ow});
    kernels::conv2d_forward(mode, x.data.data(), n, in_ch, h, wd, w.value.data.data(), out_ch, ks,
                            pad, b.value.data.data(), y.data.data());
    return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy, kernels::Exec mode) {
    const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
    Tensor dx = Tensor::zeros(x.shape);
    kernels::conv2d_backward_input(mode, dy.data.data(), w.value.data.data(), n, in_ch, h, wd,
                                   out_ch, ks, pad, dx.data.data());
    kernels::conv2d_backward_params(mode, x.data.data(), dy.data.data(), n, in_ch, h, wd, out_ch,
                                    ks, pad, w.grad.data.data(), b.grad.data.data());
    return dx;
}

void Conv2d::collect(ParamRefs& out) {
    out.push_back(&w);
    out.push_back(&b);
}

Dense::Dense(const std::string& name, int in_f_, int out_f_) {
    in_f = in_f_;
    out_f = out_f_;
    w.name = name + ".w";
    w.value = Tensor::zeros({out_f, in_f});
    w.grad = Tensor::zeros({out_f, in_f});
    b.name = name + ".b";
    b.value = Tensor::zeros({out_f});
    b.grad = Tensor::zeros({out_f});
}

void Dense::init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / in_f);
    for (auto& v : w.value.data) v = rng.normal(0.0, stddev);
    std::fill(b.value.data.begin(), b.value.data.end(), 0.0);
}

Tensor Dense::forward(const Tensor& x, kernels::Exec mode) const {
    check_shape(x, 2, "Dense::forward");
    if (x.dim(1) != in_f) throw std::invalid_argument("Dense::forward: feature mismatch");
    Tensor y = Tensor::zeros({x.dim(0), out_f});
    kernels::dense_forward(mode, x.data.data(), x.dim(0), in_f, w.value.data.data(),
                           b.value.data.data(), out_f, y.data.data());
    return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& dy, kernels::Exec mode) {
    Tensor dx = Tensor::zeros(x.shape);
    kernels::dense_backward_input(mode, dy.data.data(), w.value.data.data(), x.dim(0), in_f, out_f,
                                  dx.data.data());
    kernels::dense_backward_params(mode, x.data.data(), dy.data.data(), x.dim(0), in_f, out_f,
                                   w.grad.data.data(), b.grad.data.data());
    return dx;
}

void Dense::collect(ParamRefs& out) {
    out.push_back(&w);
    out.push_back(&b);
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x_pre, const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i) {
        if (x_pre.data[i] <= 0.0) dx.data[i] = 0.0;
    }
    return dx;
}

Tensor l2_normalize_rows(const Tensor& x) {
    check_shape(x, 2, "l2_normalize_rows");
    Tensor y = x;
    const int n = x.dim(0), d = x.dim(1);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += x.data[static_cast<std::size_t>(i) * d + j] * x.data[static_cast<std::size_t>(i) * d + j];
        const double inv = 1.0 / std::max(std::sqrt(s), 1e-12);
        for (int j = 0; j < d; ++j) y.data[static_cast<std::size_t>(i) * d + j] *= inv;
    }
    return y;
}

Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& dy) {
    Tensor dx = dy;
    const int n = x.dim(0), d = x.dim(1);
    for (int i = 0; i < n; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * d;
        double s = 0.0, ydy = 0.0;
        for (int j = 0; j < d; ++j) {
            s += x.data[off + j] * x.data[off + j];
            ydy += y.data[off + j] * dy.data[off + j];
        }
        const double inv = 1.0 / std::max(std::sqrt(s), 1e-12);
        for (int j = 0; j < d; ++j) {
            dx.data[off + j] = (dy.data[off + j] - ydy * y.data[off + j]) * inv;
        }
    }
    return dx;
}

Backbone::Backbone(const BackboneConfig& cfg_, const std::string& prefix) {
    cfg = cfg_;
    if (cfg.width < 1 || cfg.blocks < 1) {
        throw std::invalid_argument("Backbone: width and blocks must be positive");
    }
    int h = cfg.in_h, w = cfg.in_w;
    int in_ch = cfg.in_ch;
    for (int bidx = 0; bidx < cfg.blocks; ++bidx) {
        if (h % 2 != 0 || w % 2 != 0) {
            throw std::invalid_argument("Backbone: input " + std::to_string(cfg.in_h) + "x" +
                                        std::to_string(cfg.in_w) + " is not divisible by 2^" +
                                        std::to_string(cfg.blocks));
        }
        const int out_ch = capped_width(cfg.width, bidx);
        convs.emplace_back(prefix + ".conv" + std::to_string(bidx), in_ch, out_ch, 3, 1);
        in_ch = out_ch;
        h /= 2;
        w /= 2;
    }
    if (cfg.global_pool != "max" && cfg.global_pool != "avg") {
        throw std::invalid_argument("Backbone: global_pool must be 'max' or 'avg'");
    }
}

void Backbone::init(Rng& rng) {
    for (auto& c : convs) c.init(rng);
}

int Backbone::feature_dim() const { return convs.back().out_ch; }

Tensor Backbone::forward(const Tensor& x, kernels::Exec mode, Trace* trace) const {
    check_shape(x, 4, "Backbone::forward");
    if (x.dim(1) != cfg.in_ch || x.dim(2) != cfg.in_h || x.dim(3) != cfg.in_w) {
        throw std::invalid_argument("Backbone::forward: input shape does not match configuration");
    }
    if (trace) {
        trace->input = x;
        trace->pre_relu.clear();
        trace->post_relu.clear();
        trace->pooled.clear();
        trace->pool_argmax.clear();
    }
    Tensor cur = x;
    for (const auto& conv : convs) {
        Tensor pre = conv.forward(cur, mode);
        Tensor post = relu(pre);
        const int n = post.dim(0), c = post.dim(1), h = post.dim(2), w = post.dim(3);
        Tensor pooled = Tensor::zeros({n, c, h / 2, w / 2});
        std::vector<std::int32_t> argmax(pooled.data.size());
        kernels::maxpool2_forward(mode, post.data.data(), n, c, h, w, pooled.data.data(),
                                  argmax.data());
        if (trace) {
            trace->pre_relu.push_back(std::move(pre));
            trace->post_relu.push_back(std::move(post));
            trace->pooled.push_back(pooled);
            trace->pool_argmax.push_back(std::move(argmax));
        }
        cur = std::move(pooled);
    }

    const int n = cur.dim(0), c = cur.dim(1), hw = cur.dim(2) * cur.dim(3);
    Tensor feat = Tensor::zeros({n, c});
    if (cfg.global_pool == "avg") {
        kernels::global_avgpool_forward(mode, cur.data.data(), n, c, hw, feat.data.data());
    } else {
        std::vector<std::int32_t> argmax(static_cast<std::size_t>(n) * c);
        kernels::global_maxpool_forward(mode, cur.data.data(), n, c, hw, feat.data.data(),
                                        argmax.data());
        if (trace) trace->global_argmax = std::move(argmax);
    }
    return feat;
}

void Backbone::backward(const Trace& trace, const Tensor& dfeat, kernels::Exec mode) {
    const Tensor& last = trace.pooled.back();
    const int n = last.dim(0), c = last.dim(1), hw = last.dim(2) * last.dim(3);
    Tensor dcur = Tensor::zeros(last.shape);
    if (cfg.global_pool == "avg") {
        kernels::global_avgpool_backward(mode, dfeat.data.data(), n, c, hw, dcur.data.data());
    } else {
        kernels::global_maxpool_backward(mode, dfeat.data.data(), trace.global_argmax.data(), n, c,
                                         hw, dcur.data.data());
    }

    for (int bidx = static_cast<int>(convs.size()) - 1; bidx >= 0; --bidx) {
        const Tensor& post = trace.post_relu[static_cast<std::size_t>(bidx)];
        Tensor dpost = Tensor::zeros(post.shape);
        kernels::maxpool2_backward(mode, dcur.data.data(),
                                   trace.pool_argmax[static_cast<std::size_t>(bidx)].data(),
                                   post.dim(0), post.dim(1), post.dim(2), post.dim(3),
                                   dpost.data.data());
        Tensor dpre = relu_backward(trace.pre_relu[static_cast<std::size_t>(bidx)], dpost);
        const Tensor& in =
            bidx == 0 ? trace.input : trace.pooled[static_cast<std::size_t>(bidx) - 1];
        dcur = convs[static_cast<std::size_t>(bidx)].backward(in, dpre, mode);
    }
}

void Backbone::collect(ParamRefs& out) {
    for (auto& c : convs) c.collect(out);
}

std::string Backbone::signature() const {
    return "cnn-w" + std::to_string(cfg.width) + "-b" + std::to_string(cfg.blocks) + "-in" +
           std::to_string(cfg.in_ch) + "x" + std::to_string(cfg.in_h) + "x" +
           std::to_string(cfg.in_w) + "-" + cfg.global_pool;
}

ProjectionHead::ProjectionHead(const std::string& prefix, int in_dim, int hidden, int out_dim)
    : fc1(prefix + ".fc1", in_dim, hidden), fc2(prefix + ".fc2", hidden, out_dim) {}

void ProjectionHead::init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
}

Tensor ProjectionHead::forward(const Tensor& feat, kernels::Exec mode, Trace* trace) const {
    Tensor a = fc1.forward(feat, mode);
    Tensor r = relu(a);
    Tensor z = fc2.forward(r, mode);
    Tensor out = l2_normalize_rows(z);
    if (trace) {
        trace->input = feat;
        trace->fc1_out = std::move(a);
        trace->relu_out = std::move(r);
        trace->fc2_out = std::move(z);
        trace->out = out;
    }
    return out;
}

Tensor ProjectionHead::backward(const Trace& trace, const Tensor& dout, kernels::Exec mode) {
    Tensor dz = l2_normalize_rows_backward(trace.fc2_out, trace.out, dout);
    Tensor dr = fc2.backward(trace.relu_out, dz, mode);
    Tensor da = relu_backward(trace.fc1_out, dr);
    return fc1.backward(trace.input, da, mode);
}

void ProjectionHead::collect(ParamRefs& out) {
    fc1.collect(out);
    fc2.collect(out);
}

Sgd::Sgd(const ParamRefs& params) {
    buf_.reserve(params.size());
    for (const Param* p : params) buf_.push_back(Tensor::zeros(p->value.shape));
}

void Sgd::step(const ParamRefs& params, const SgdConfig& cfg) {
    if (params.size() != buf_.size()) {
        throw std::invalid_argument("Sgd::step: parameter list does not match optimizer state");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        Tensor& buf = buf_[i];
        for (std::size_t j = 0; j < p.value.data.size(); ++j) {
            const double g = p.grad.data[j] + cfg.weight_decay * p.value.data[j];
            buf.data[j] = cfg.momentum * buf.data[j] + g;
            p.value.data[j] -= cfg.lr * buf.data[j];
        }
    }
}

double cosine_lr(double base, int epoch, int total) {
    if (total < 1) throw std::invalid_argument("cosine_lr: total must be positive");
    if (epoch < 0) throw std::invalid_argument("cosine_lr: negative epoch");
    return base * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / total));
}

}  // namespace uvcl::nn
