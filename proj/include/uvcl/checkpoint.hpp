#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uvcl/encoder.hpp"
#include "uvcl/mining.hpp"
#include "uvcl/nn.hpp"

// Single-file binary checkpoints. A pretrain checkpoint captures everything
// the training loop needs to continue bit-identically from an epoch boundary:
// both encoders, optimizer momentum, the negative queue with its tags, and
// the serialized RNG stream. Layout: magic, JSON manifest (architecture and
// counters), then raw little-endian double blobs in a fixed order.
namespace uvcl::checkpoint {

struct PretrainState {
    encoder::Encoder query;
    encoder::Encoder key;
    std::vector<nn::Tensor> opt_buffers;
    mining::NegativeQueue queue{1};
    std::string rng_state;
    int next_epoch = 0;
    std::uint64_t step_counter = 0;
    std::string config_hash;
};

void save_pretrain(PretrainState& state, const std::filesystem::path& path);
PretrainState load_pretrain(const std::filesystem::path& path);

struct ClassifierState {
    nn::BackboneConfig backbone_cfg;
    nn::Backbone f;
    nn::Dense head;
    std::vector<std::string> classes;
};

void save_classifier(ClassifierState& state, const std::filesystem::path& path);
ClassifierState load_classifier(const std::filesystem::path& path);

}  // namespace uvcl::checkpoint
