#pragma once

#include <filesystem>
#include <string>

#include "uvcl/dataset.hpp"
#include "uvcl/downstream.hpp"
#include "uvcl/trainer.hpp"

// JSON run configuration. Every knob has an in-code default, a config file
// overrides defaults section by section, and command-line flags override the
// file. Parsing is strict: an unknown key anywhere is an error, so typos
// cannot silently fall back to defaults.
namespace uvcl::config {

struct RunConfig {
    trainer::PretrainConfig pretrain;  // includes encoder, augment
    downstream::FinetuneConfig finetune;
    dataset::SyntheticSpec synthetic;
    dataset::LabelingConfig labeling;
    std::string positive_class;  // "" means the last class in the list
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical serialization: every key, fixed order, current values. Two
// configs hash equal iff this text is byte-identical.
std::string config_text(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);  // 16 hex digits

void write_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace uvcl::config
