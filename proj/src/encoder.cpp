#include "uvcl/encoder.hpp"

#include <stdexcept>

namespace uvcl::encoder {

nn::ParamRefs Encoder::params() {
    nn::ParamRefs refs;
    f.collect(refs);
    g.collect(refs);
    return refs;
}

std::string Encoder::signature() const {
    return f.signature() + "-h" + std::to_string(g.fc1.out_f) + "-e" + std::to_string(g.fc2.out_f);
}

int Encoder::head_hidden_dim() const { return g.fc1.out_f; }

Encoder make_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
    if (cfg.embed_dim < 1) throw std::invalid_argument("make_encoder: embed_dim must be positive");
    Encoder enc;
    enc.cfg = cfg;
    enc.f = nn::Backbone(cfg.backbone, "f");
    const int hidden = cfg.head_hidden > 0 ? cfg.head_hidden : enc.f.feature_dim();
    enc.g = nn::ProjectionHead("g", enc.f.feature_dim(), hidden, cfg.embed_dim);
    Rng rng(mix_seed(seed, 0x656e63ULL));  // dedicated init stream
    enc.f.init(rng);
    enc.g.init(rng);
    return enc;
}

nn::Tensor images_to_batch(const std::vector<Image>& images, const nn::BackboneConfig& cfg) {
    if (images.empty()) throw std::invalid_argument("images_to_batch: empty batch");
    nn::Tensor batch = nn::Tensor::zeros(
        {static_cast<int>(images.size()), cfg.in_ch, cfg.in_h, cfg.in_w});
    const std::size_t plane = static_cast<std::size_t>(cfg.in_h) * cfg.in_w;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& im = images[i];
        if (im.h != cfg.in_h || im.w != cfg.in_w) {
            throw std::invalid_argument("images_to_batch: image " + std::to_string(i) + " is " +
                                        std::to_string(im.h) + "x" + std::to_string(im.w) +
                                        ", encoder expects " + std::to_string(cfg.in_h) + "x" +
                                        std::to_string(cfg.in_w));
        }
        double* dst = batch.data.data() + i * plane * static_cast<std::size_t>(cfg.in_ch);
        if (im.c == cfg.in_ch) {
            for (int y = 0; y < im.h; ++y) {
                for (int x = 0; x < im.w; ++x) {
                    for (int ch = 0; ch < im.c; ++ch) {
                        dst[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * im.w + x] =
                            im.at(y, x, ch);
                    }
                }
            }
        } else if (im.c == 1) {
            // Grey input into a multi-channel encoder: replicate.
            for (int y = 0; y < im.h; ++y) {
                for (int x = 0; x < im.w; ++x) {
                    for (int ch = 0; ch < cfg.in_ch; ++ch) {
                        dst[static_cast<std::size_t>(ch) * plane + static_cast<std::size_t>(y) * im.w + x] =
                            im.at(y, x, 0);
                    }
                }
            }
        } else {
            throw std::invalid_argument("images_to_batch: image has " + std::to_string(im.c) +
                                        " channels, encoder expects " + std::to_string(cfg.in_ch));
        }
    }
    return batch;
}

nn::Tensor embed(const Encoder& enc, const nn::Tensor& batch, kernels::Exec mode) {
    const nn::Tensor feat = enc.f.forward(batch, mode);
    return enc.g.forward(feat, mode);
}

nn::Tensor embed(const Encoder& enc, const std::vector<Image>& images, kernels::Exec mode) {
    return embed(enc, images_to_batch(images, enc.f.cfg), mode);
}

nn::Tensor forward_train(Encoder& enc, const nn::Tensor& batch, kernels::Exec mode,
                         EncoderTrace& trace) {
    const nn::Tensor feat = enc.f.forward(batch, mode, &trace.f);
    return enc.g.forward(feat, mode, &trace.g);
}

void backward_train(Encoder& enc, const EncoderTrace& trace, const nn::Tensor& dq,
                    kernels::Exec mode) {
    const nn::Tensor dfeat = enc.g.backward(trace.g, dq, mode);
    enc.f.backward(trace.f, dfeat, mode);
}

void momentum_update(Encoder& key, Encoder& query, double m) {
    if (m <= 0.0 || m >= 1.0) {
        throw std::invalid_argument("momentum_update: coefficient must lie strictly in (0, 1)");
    }
    nn::ParamRefs kp = key.params();
    nn::ParamRefs qp = query.params();
    if (kp.size() != qp.size()) {
        throw std::invalid_argument("momentum_update: encoders have different parameter counts");
    }
    for (std::size_t i = 0; i < kp.size(); ++i) {
        if (kp[i]->name != qp[i]->name || kp[i]->value.shape != qp[i]->value.shape) {
            throw std::invalid_argument("momentum_update: parameter '" + kp[i]->name +
                                        "' does not line up with '" + qp[i]->name + "'");
        }
        for (std::size_t j = 0; j < kp[i]->value.data.size(); ++j) {
            kp[i]->value.data[j] = m * kp[i]->value.data[j] + (1.0 - m) * qp[i]->value.data[j];
        }
    }
}

}  // namespace uvcl::encoder
