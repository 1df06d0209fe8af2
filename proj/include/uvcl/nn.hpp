#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uvcl/core.hpp"
#include "uvcl/kernels.hpp"

// Minimal dense-tensor network layer zoo with hand-written backward passes,
// enough for the small convolutional encoders this project trains. Layers are
// stateless; activations needed by backward live in explicit trace structs
// owned by the caller.
namespace uvcl::nn {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    static Tensor zeros(std::vector<int> s) {
        Tensor t;
        t.shape = std::move(s);
        std::int64_t n = 1;
        for (int d : t.shape) n *= d;
        t.data.assign(static_cast<std::size_t>(n), 0.0);
        return t;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int dim(std::size_t i) const { return shape.at(i); }
};

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
};

using ParamRefs = std::vector<Param*>;

void zero_grads(const ParamRefs& params);

struct Conv2d {
    int in_ch = 0, out_ch = 0, ks = 3, pad = 1;
    Param w, b;

    Conv2d() = default;
    Conv2d(const std::string& name, int in_ch, int out_ch, int ks, int pad);
    void init(Rng& rng);  // He-normal weights, zero bias
    Tensor forward(const Tensor& x, kernels::Exec mode) const;
    // Accumulates into w.grad/b.grad and returns dL/dx.
    Tensor backward(const Tensor& x, const Tensor& dy, kernels::Exec mode);
    void collect(ParamRefs& out);
};

struct Dense {
    int in_f = 0, out_f = 0;
    Param w, b;

    Dense() = default;
    Dense(const std::string& name, int in_f, int out_f);
    void init(Rng& rng);
    Tensor forward(const Tensor& x, kernels::Exec mode) const;
    Tensor backward(const Tensor& x, const Tensor& dy, kernels::Exec mode);
    void collect(ParamRefs& out);
};

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x_pre, const Tensor& dy);

// Row-wise L2 normalization onto the unit sphere, with backward.
Tensor l2_normalize_rows(const Tensor& x);
Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& dy);

// Convolutional feature extractor: `blocks` rounds of conv3x3/relu/maxpool2
// with channel widths width, 2*width, 4*width (then capped), followed by a
// global spatial pool. Input height and width must be divisible by 2^blocks.
struct BackboneConfig {
    int in_ch = 1;
    int in_h = 32;
    int in_w = 32;
    int width = 8;
    int blocks = 3;
    std::string global_pool = "max";  // "max" or "avg"

    bool operator==(const BackboneConfig&) const = default;
};

struct Backbone {
    BackboneConfig cfg;
    std::vector<Conv2d> convs;

    struct Trace {
        Tensor input;
        std::vector<Tensor> pre_relu;
        std::vector<Tensor> post_relu;
        std::vector<Tensor> pooled;
        std::vector<std::vector<std::int32_t>> pool_argmax;
        std::vector<std::int32_t> global_argmax;
    };

    Backbone() = default;
    Backbone(const BackboneConfig& cfg, const std::string& prefix);
    void init(Rng& rng);
    int feature_dim() const;
    // x: [N, in_ch, in_h, in_w] -> features [N, feature_dim]
    Tensor forward(const Tensor& x, kernels::Exec mode, Trace* trace = nullptr) const;
    void backward(const Trace& trace, const Tensor& dfeat, kernels::Exec mode);
    void collect(ParamRefs& out);
    std::string signature() const;
};

// Two-layer projection onto the unit sphere: dense, relu, dense, normalize.
struct ProjectionHead {
    Dense fc1, fc2;

    struct Trace {
        Tensor input;
        Tensor fc1_out;
        Tensor relu_out;
        Tensor fc2_out;  // pre-normalization
        Tensor out;
    };

    ProjectionHead() = default;
    ProjectionHead(const std::string& prefix, int in_dim, int hidden, int out_dim);
    void init(Rng& rng);
    Tensor forward(const Tensor& feat, kernels::Exec mode, Trace* trace = nullptr) const;
    Tensor backward(const Trace& trace, const Tensor& dout, kernels::Exec mode);
    void collect(ParamRefs& out);
};

struct SgdConfig {
    double lr = 0.003;
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

// SGD with momentum and decoupled-from-nothing L2 weight decay folded into
// the gradient (the common deep-learning convention).
class Sgd {
  public:
    Sgd() = default;
    explicit Sgd(const ParamRefs& params);
    void step(const ParamRefs& params, const SgdConfig& cfg);
    const std::vector<Tensor>& buffers() const { return buf_; }
    std::vector<Tensor>& buffers() { return buf_; }

  private:
    std::vector<Tensor> buf_;
};

// Cosine-annealed learning rate, full decay at epoch == total.
double cosine_lr(double base, int epoch, int total);

}  // namespace uvcl::nn
