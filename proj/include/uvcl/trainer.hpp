#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uvcl/checkpoint.hpp"
#include "uvcl/curriculum.hpp"
#include "uvcl/dataset.hpp"
#include "uvcl/encoder.hpp"
#include "uvcl/mining.hpp"
#include "uvcl/sampler.hpp"

// Self-supervised pretraining loop. Each epoch visits every video once,
// drawing one anchor/positive/negatives tuple per video; anchors go through
// the query encoder, positives and negatives through the key encoder. Per
// step the order is fixed: forward, loss, backward, optimizer step, key
// momentum update, queue update. All randomness flows from one serializable
// stream, so a run is a pure function of (corpus, config) and resuming from a
// checkpoint continues bit-identically.
namespace uvcl::trainer {

// Which negatives the loss sees. Joint follows the curriculum phase; the
// other two pin the loss composition for ablations.
enum class NegativesMode { Joint, CrossOnly, IntraOnly };

NegativesMode negatives_mode_from_string(const std::string& s);
std::string to_string(NegativesMode m);

struct PretrainConfig {
    encoder::EncoderConfig encoder;
    int epochs = 60;
    int batch_size = 32;
    nn::SgdConfig optimizer;             // lr 0.003, momentum 0.9, weight decay 1e-4
    double momentum_coefficient = 0.999;  // key encoder EMA
    double tau = 0.07;
    int delta = 3;       // positive window radius
    int k = 3;           // within-video negatives per tuple
    int delta_low = 7;   // hardest exclusion radius
    double warmup_fraction = 0.2;
    curriculum::Mode curriculum_mode = curriculum::Mode::Proposed;
    NegativesMode negatives = NegativesMode::Joint;
    std::size_t queue_capacity = 96;
    int top_n = 4;  // queue entries blended into the synthesized negative
    dataset::AugmentConfig augment;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs; 0 = final checkpoint only
    kernels::Exec exec = kernels::Exec::Parallel;
};

curriculum::CurriculumConfig curriculum_config(const PretrainConfig& cfg);

// Stable fingerprint of everything that influences the numbers; stored in
// checkpoints and checked on resume.
std::string config_fingerprint(const PretrainConfig& cfg);

struct TrainState {
    PretrainConfig cfg;
    encoder::Encoder query;
    encoder::Encoder key;
    nn::Sgd opt;
    mining::NegativeQueue queue{1};
    Rng rng{0};
    int epoch = 0;
    std::uint64_t step_counter = 0;
    double lr = 0.0;
    curriculum::Phase phase = curriculum::Phase::Full;
    // Optional sink for per-step mining diagnostics (CSV rows).
    std::function<void(const std::string&)> mining_sink;
};

// Fresh state: key starts as a copy of the query encoder, empty queue.
TrainState make_train_state(const PretrainConfig& cfg);

// State restored from a checkpoint; the fingerprint must match cfg.
TrainState restore_train_state(const PretrainConfig& cfg, const std::filesystem::path& ckpt);

// Sets the learning rate and effective phase for an epoch.
void begin_epoch(TrainState& state, int epoch);

// One sampled tuple with its decoded (and, for anchor/positive, augmented)
// frames.
struct TupleImages {
    sampler::SampleTuple tuple;
    Image anchor;
    Image positive;
    std::vector<Image> negatives;
};

struct StepResult {
    double loss = 0.0;
    int delta = 0;  // radius used by the first tuple of the batch
};

StepResult train_step(TrainState& state, const std::vector<TupleImages>& batch);

struct StepLogRow {
    int epoch = 0;
    std::uint64_t step = 0;
    std::string phase;
    int delta = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct PretrainResult {
    std::filesystem::path checkpoint;
    std::vector<StepLogRow> rows;
    std::vector<double> epoch_mean_loss;
};

// Full run. Writes step_log.csv, checkpoints (checkpoint_final.bin plus
// periodic checkpoint_epoch####.bin when configured) and, when log_mining is
// set, mining_log.csv into run_dir. Pass a checkpoint path to resume from an
// epoch boundary.
PretrainResult pretrain(const dataset::VideoCorpus& corpus, const PretrainConfig& cfg,
                        const std::filesystem::path& run_dir,
                        const std::optional<std::filesystem::path>& resume = std::nullopt,
                        bool log_mining = false);

}  // namespace uvcl::trainer
