#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uvcl/checkpoint.hpp"
#include "uvcl/dataset.hpp"
#include "uvcl/nn.hpp"

// Supervised fine-tuning of a pretrained backbone and its evaluation. The
// projection head from pretraining is discarded; a single affine layer maps
// backbone features to class logits and the whole network trains under
// softmax cross-entropy. Cross-validation splits by patient, never by image,
// and stratifies patients by class.
namespace uvcl::downstream {

using Classifier = checkpoint::ClassifierState;

struct FinetuneConfig {
    int epochs = 30;
    int batch_size = 64;
    nn::SgdConfig optimizer{0.003, 0.9, 5e-4};
    bool freeze_backbone = false;  // linear-probe mode for baselines
    int folds = 10;
    std::uint64_t seed = 0;
    kernels::Exec exec = kernels::Exec::Parallel;
};

// The query-encoder backbone out of a pretraining checkpoint.
nn::Backbone backbone_from_checkpoint(const std::filesystem::path& ckpt);

nn::Backbone random_backbone(const nn::BackboneConfig& cfg, std::uint64_t seed);

Classifier finetune(const nn::Backbone& init, const dataset::LabeledImageSet& train,
                    const FinetuneConfig& cfg);

struct Metrics {
    std::vector<std::string> classes;
    std::vector<std::vector<std::int64_t>> confusion;  // [true][pred]
    std::int64_t total = 0;
    double accuracy = 0.0;
    std::vector<std::optional<double>> per_class_recall;  // absent when a class has no samples
    // Two-class sets only; positive = the configured positive class.
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

// Counts-based metrics; evaluate() delegates here, and tests can feed
// hand-built prediction vectors. positive_class empty means "last class".
Metrics metrics_from_predictions(const std::vector<std::string>& classes,
                                 const std::vector<int>& true_idx, const std::vector<int>& pred_idx,
                                 const std::string& positive_class = "");

Metrics evaluate(const Classifier& clf, const dataset::LabeledImageSet& test,
                 const std::string& positive_class = "",
                 kernels::Exec exec = kernels::Exec::Parallel);

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;  // sample std (n-1); 0 when fewer than two folds define the metric
    int folds = 0;        // folds where the metric was defined
};

struct CrossValidateResult {
    std::vector<Metrics> fold_metrics;
    std::vector<std::vector<std::string>> fold_patients;
    Aggregate accuracy;
    std::optional<Aggregate> sensitivity;
    std::optional<Aggregate> specificity;
};

// Every fold fine-tunes a fresh copy of `init` on the other folds' patients
// and evaluates on its own. Errors if any training split lacks a class.
CrossValidateResult cross_validate(const nn::Backbone& init, const dataset::LabeledImageSet& data,
                                   const FinetuneConfig& cfg,
                                   const std::string& positive_class = "");

std::string metrics_csv(const Metrics& m);
std::string results_csv(const CrossValidateResult& r);
std::string results_table(const CrossValidateResult& r);

}  // namespace uvcl::downstream
