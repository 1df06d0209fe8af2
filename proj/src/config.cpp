#include "uvcl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "uvcl/core.hpp"
#include "uvcl/curriculum.hpp"

namespace uvcl::config {

namespace {

using ordered_json = nlohmann::ordered_json;

// Reads known keys out of one JSON object and errors on anything else.
class Section {
  public:
    Section(const ordered_json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j.is_object())
            throw std::runtime_error("config section '" + name_ + "' must be a JSON object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const ordered_json::exception&) {
            throw std::runtime_error("config key '" + name_ + "." + key + "' has the wrong type");
        }
    }

    void get(const char* key, std::size_t& out) {
        long long v = static_cast<long long>(out);
        get(key, v);
        if (v < 0)
            throw std::runtime_error("config key '" + name_ + "." + key + "' must not be negative");
        out = static_cast<std::size_t>(v);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                throw std::runtime_error("unknown config key '" + key + "' in section '" + name_ +
                                         "'");
    }

  private:
    const ordered_json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

void parse_encoder(const ordered_json& j, encoder::EncoderConfig& cfg) {
    Section s(j, "encoder");
    s.get("in_ch", cfg.backbone.in_ch);
    s.get("in_h", cfg.backbone.in_h);
    s.get("in_w", cfg.backbone.in_w);
    s.get("width", cfg.backbone.width);
    s.get("blocks", cfg.backbone.blocks);
    s.get("global_pool", cfg.backbone.global_pool);
    s.get("head_hidden", cfg.head_hidden);
    s.get("embed_dim", cfg.embed_dim);
    s.finish();
}

void parse_pretrain(const ordered_json& j, trainer::PretrainConfig& cfg) {
    Section s(j, "pretrain");
    s.get("epochs", cfg.epochs);
    s.get("batch_size", cfg.batch_size);
    s.get("lr", cfg.optimizer.lr);
    s.get("momentum", cfg.optimizer.momentum);
    s.get("weight_decay", cfg.optimizer.weight_decay);
    s.get("momentum_coefficient", cfg.momentum_coefficient);
    s.get("tau", cfg.tau);
    s.get("delta", cfg.delta);
    s.get("k", cfg.k);
    s.get("delta_low", cfg.delta_low);
    s.get("warmup_fraction", cfg.warmup_fraction);
    std::string curriculum = curriculum::to_string(cfg.curriculum_mode);
    s.get("curriculum", curriculum);
    cfg.curriculum_mode = curriculum::mode_from_string(curriculum);
    std::string negatives = trainer::to_string(cfg.negatives);
    s.get("negatives", negatives);
    cfg.negatives = trainer::negatives_mode_from_string(negatives);
    s.get("queue_capacity", cfg.queue_capacity);
    s.get("top_n", cfg.top_n);
    s.get("seed", cfg.seed);
    s.get("checkpoint_every", cfg.checkpoint_every);
    s.finish();
}

void parse_augment(const ordered_json& j, dataset::AugmentConfig& cfg) {
    Section s(j, "augment");
    s.get("crop_min_scale", cfg.crop_min_scale);
    s.get("hflip_prob", cfg.hflip_prob);
    s.get("brightness", cfg.brightness);
    s.get("contrast", cfg.contrast);
    s.get("noise_stddev", cfg.noise_stddev);
    s.finish();
}

void parse_finetune(const ordered_json& j, downstream::FinetuneConfig& cfg,
                    std::string& positive_class) {
    Section s(j, "finetune");
    s.get("epochs", cfg.epochs);
    s.get("batch_size", cfg.batch_size);
    s.get("lr", cfg.optimizer.lr);
    s.get("momentum", cfg.optimizer.momentum);
    s.get("weight_decay", cfg.optimizer.weight_decay);
    s.get("freeze_backbone", cfg.freeze_backbone);
    s.get("folds", cfg.folds);
    s.get("seed", cfg.seed);
    s.get("positive_class", positive_class);
    s.finish();
}

void parse_synthetic(const ordered_json& j, dataset::SyntheticSpec& cfg) {
    Section s(j, "synthetic");
    s.get("num_videos", cfg.num_videos);
    s.get("frames_min", cfg.frames_min);
    s.get("frames_max", cfg.frames_max);
    s.get("image_h", cfg.image_h);
    s.get("image_w", cfg.image_w);
    s.get("smoothness", cfg.smoothness);
    s.get("window_half_width", cfg.window_half_width);
    s.get("noise_level", cfg.noise_level);
    s.get("seed", cfg.seed);
    s.finish();
}

void parse_labeling(const ordered_json& j, dataset::LabelingConfig& cfg) {
    Section s(j, "labeling");
    s.get("clear_margin", cfg.clear_margin);
    s.get("seed", cfg.seed);
    s.finish();
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const ordered_json::parse_error& e) {
        throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config root must be a JSON object");

    RunConfig cfg;
    static const std::set<std::string> sections = {"encoder",  "pretrain",  "augment",
                                                   "finetune", "synthetic", "labeling"};
    for (const auto& [key, value] : j.items())
        if (!sections.count(key))
            throw std::runtime_error("unknown config section '" + key + "'");

    if (j.contains("encoder")) parse_encoder(j.at("encoder"), cfg.pretrain.encoder);
    if (j.contains("pretrain")) parse_pretrain(j.at("pretrain"), cfg.pretrain);
    if (j.contains("augment")) parse_augment(j.at("augment"), cfg.pretrain.augment);
    if (j.contains("finetune")) parse_finetune(j.at("finetune"), cfg.finetune, cfg.positive_class);
    if (j.contains("synthetic")) parse_synthetic(j.at("synthetic"), cfg.synthetic);
    if (j.contains("labeling")) parse_labeling(j.at("labeling"), cfg.labeling);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string config_text(const RunConfig& cfg) {
    ordered_json j;
    j["encoder"] = {{"in_ch", cfg.pretrain.encoder.backbone.in_ch},
                    {"in_h", cfg.pretrain.encoder.backbone.in_h},
                    {"in_w", cfg.pretrain.encoder.backbone.in_w},
                    {"width", cfg.pretrain.encoder.backbone.width},
                    {"blocks", cfg.pretrain.encoder.backbone.blocks},
                    {"global_pool", cfg.pretrain.encoder.backbone.global_pool},
                    {"head_hidden", cfg.pretrain.encoder.head_hidden},
                    {"embed_dim", cfg.pretrain.encoder.embed_dim}};
    j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                     {"batch_size", cfg.pretrain.batch_size},
                     {"lr", cfg.pretrain.optimizer.lr},
                     {"momentum", cfg.pretrain.optimizer.momentum},
                     {"weight_decay", cfg.pretrain.optimizer.weight_decay},
                     {"momentum_coefficient", cfg.pretrain.momentum_coefficient},
                     {"tau", cfg.pretrain.tau},
                     {"delta", cfg.pretrain.delta},
                     {"k", cfg.pretrain.k},
                     {"delta_low", cfg.pretrain.delta_low},
                     {"warmup_fraction", cfg.pretrain.warmup_fraction},
                     {"curriculum", curriculum::to_string(cfg.pretrain.curriculum_mode)},
                     {"negatives", trainer::to_string(cfg.pretrain.negatives)},
                     {"queue_capacity", cfg.pretrain.queue_capacity},
                     {"top_n", cfg.pretrain.top_n},
                     {"seed", cfg.pretrain.seed},
                     {"checkpoint_every", cfg.pretrain.checkpoint_every}};
    j["augment"] = {{"crop_min_scale", cfg.pretrain.augment.crop_min_scale},
                    {"hflip_prob", cfg.pretrain.augment.hflip_prob},
                    {"brightness", cfg.pretrain.augment.brightness},
                    {"contrast", cfg.pretrain.augment.contrast},
                    {"noise_stddev", cfg.pretrain.augment.noise_stddev}};
    j["finetune"] = {{"epochs", cfg.finetune.epochs},
                     {"batch_size", cfg.finetune.batch_size},
                     {"lr", cfg.finetune.optimizer.lr},
                     {"momentum", cfg.finetune.optimizer.momentum},
                     {"weight_decay", cfg.finetune.optimizer.weight_decay},
                     {"freeze_backbone", cfg.finetune.freeze_backbone},
                     {"folds", cfg.finetune.folds},
                     {"seed", cfg.finetune.seed},
                     {"positive_class", cfg.positive_class}};
    j["synthetic"] = {{"num_videos", cfg.synthetic.num_videos},
                      {"frames_min", cfg.synthetic.frames_min},
                      {"frames_max", cfg.synthetic.frames_max},
                      {"image_h", cfg.synthetic.image_h},
                      {"image_w", cfg.synthetic.image_w},
                      {"smoothness", cfg.synthetic.smoothness},
                      {"window_half_width", cfg.synthetic.window_half_width},
                      {"noise_level", cfg.synthetic.noise_level},
                      {"seed", cfg.synthetic.seed}};
    j["labeling"] = {{"clear_margin", cfg.labeling.clear_margin},
                     {"seed", cfg.labeling.seed}};
    return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) { return to_hex(fnv1a64(config_text(cfg))); }

void write_config(const RunConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write config file " + path.string());
    out << config_text(cfg);
}

}  // namespace uvcl::config
