#pragma once

#include <string>
#include <vector>

#include "uvcl/image.hpp"
#include "uvcl/nn.hpp"

// The twin-encoder pair: a backbone followed by a projection head emitting
// unit-norm embeddings. The query encoder is trained by gradient descent; the
// key encoder is its slow exponential moving average and never sees the
// optimizer.
namespace uvcl::encoder {

struct EncoderConfig {
    nn::BackboneConfig backbone;
    int head_hidden = 0;  // 0 means "same as the backbone feature width"
    int embed_dim = 128;

    bool operator==(const EncoderConfig&) const = default;
};

struct Encoder {
    EncoderConfig cfg;
    nn::Backbone f;
    nn::ProjectionHead g;

    nn::ParamRefs params();
    std::string signature() const;
    int head_hidden_dim() const;
};

Encoder make_encoder(const EncoderConfig& cfg, std::uint64_t seed);

// Stacks images into an [N, C, H, W] batch matching the encoder input.
// Single-channel images are replicated across channels when the encoder
// expects more; any other mismatch is an error.
nn::Tensor images_to_batch(const std::vector<Image>& images, const nn::BackboneConfig& cfg);

// Inference-path embedding: [N, embed_dim] with unit-norm rows.
nn::Tensor embed(const Encoder& enc, const std::vector<Image>& images, kernels::Exec mode);
nn::Tensor embed(const Encoder& enc, const nn::Tensor& batch, kernels::Exec mode);

struct EncoderTrace {
    nn::Backbone::Trace f;
    nn::ProjectionHead::Trace g;
};

// Training path: forward keeps activations, backward pushes dL/d(embedding)
// through head and backbone, accumulating parameter gradients.
nn::Tensor forward_train(Encoder& enc, const nn::Tensor& batch, kernels::Exec mode,
                         EncoderTrace& trace);
void backward_train(Encoder& enc, const EncoderTrace& trace, const nn::Tensor& dq,
                    kernels::Exec mode);

// key <- m * key + (1 - m) * query, parameter by parameter. The two encoders
// must be structurally identical (same parameter names and shapes).
void momentum_update(Encoder& key, Encoder& query, double m);

}  // namespace uvcl::encoder
