#include "uvcl/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace uvcl::checkpoint {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kPretrainMagic[8] = {'U', 'V', 'C', 'L', 'P', 'T', '0', '1'};
constexpr char kClassifierMagic[8] = {'U', 'V', 'C', 'L', 'C', 'L', '0', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is, const std::filesystem::path& path) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint " + path.string() + ": truncated");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::filesystem::path& path) {
    const std::uint64_t len = read_u64(is, path);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw std::runtime_error("checkpoint " + path.string() + ": truncated");
    return s;
}

void write_tensor(std::ostream& os, const nn::Tensor& t) {
    write_u64(os, t.data.size());
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

void read_tensor_into(std::istream& is, nn::Tensor& t, const std::filesystem::path& path,
                      const std::string& what) {
    const std::uint64_t count = read_u64(is, path);
    if (count != t.data.size()) {
        throw std::runtime_error("checkpoint " + path.string() + ": " + what + " holds " +
                                 std::to_string(count) + " values, expected " +
                                 std::to_string(t.data.size()));
    }
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint " + path.string() + ": truncated");
}

ordered_json encoder_config_json(const encoder::EncoderConfig& cfg) {
    ordered_json j;
    j["in_ch"] = cfg.backbone.in_ch;
    j["in_h"] = cfg.backbone.in_h;
    j["in_w"] = cfg.backbone.in_w;
    j["width"] = cfg.backbone.width;
    j["blocks"] = cfg.backbone.blocks;
    j["global_pool"] = cfg.backbone.global_pool;
    j["head_hidden"] = cfg.head_hidden;
    j["embed_dim"] = cfg.embed_dim;
    return j;
}

encoder::EncoderConfig encoder_config_from_json(const ordered_json& j) {
    encoder::EncoderConfig cfg;
    cfg.backbone.in_ch = j.at("in_ch").get<int>();
    cfg.backbone.in_h = j.at("in_h").get<int>();
    cfg.backbone.in_w = j.at("in_w").get<int>();
    cfg.backbone.width = j.at("width").get<int>();
    cfg.backbone.blocks = j.at("blocks").get<int>();
    cfg.backbone.global_pool = j.at("global_pool").get<std::string>();
    cfg.head_hidden = j.at("head_hidden").get<int>();
    cfg.embed_dim = j.at("embed_dim").get<int>();
    return cfg;
}

void check_magic(std::istream& is, const char (&magic)[8], const std::filesystem::path& path,
                 const char* kind) {
    char buf[8];
    is.read(buf, 8);
    if (!is || !std::equal(buf, buf + 8, magic)) {
        throw std::runtime_error(path.string() + " is not a " + kind + " checkpoint");
    }
}

}  // namespace

void save_pretrain(PretrainState& state, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot create " + path.string());
    os.write(kPretrainMagic, 8);

    ordered_json manifest;
    manifest["encoder"] = encoder_config_json(state.query.cfg);
    manifest["signature"] = state.query.signature();
    manifest["next_epoch"] = state.next_epoch;
    manifest["step_counter"] = state.step_counter;
    manifest["config_hash"] = state.config_hash;
    ordered_json names = ordered_json::array();
    for (nn::Param* p : state.query.params()) names.push_back(p->name);
    manifest["params"] = names;
    write_string(os, manifest.dump());

    for (nn::Param* p : state.query.params()) write_tensor(os, p->value);
    for (nn::Param* p : state.key.params()) write_tensor(os, p->value);
    write_u64(os, state.opt_buffers.size());
    for (const auto& t : state.opt_buffers) write_tensor(os, t);
    state.queue.save(os);
    write_string(os, state.rng_state);
    if (!os) throw std::runtime_error("checkpoint: failed writing " + path.string());
}

PretrainState load_pretrain(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    check_magic(is, kPretrainMagic, path, "pretrain");

    ordered_json manifest;
    try {
        manifest = ordered_json::parse(read_string(is, path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint " + path.string() + ": bad manifest: " + e.what());
    }
    const encoder::EncoderConfig cfg = encoder_config_from_json(manifest.at("encoder"));

    PretrainState state;
    state.query = encoder::make_encoder(cfg, 0);
    state.key = encoder::make_encoder(cfg, 0);
    state.next_epoch = manifest.at("next_epoch").get<int>();
    state.step_counter = manifest.at("step_counter").get<std::uint64_t>();
    state.config_hash = manifest.at("config_hash").get<std::string>();

    const auto names = manifest.at("params");
    nn::ParamRefs qp = state.query.params();
    if (names.size() != qp.size()) {
        throw std::runtime_error("checkpoint " + path.string() + ": parameter list mismatch");
    }
    for (std::size_t i = 0; i < qp.size(); ++i) {
        if (names[i].get<std::string>() != qp[i]->name) {
            throw std::runtime_error("checkpoint " + path.string() + ": parameter '" +
                                     names[i].get<std::string>() + "' does not match '" +
                                     qp[i]->name + "'");
        }
    }

    for (nn::Param* p : qp) read_tensor_into(is, p->value, path, p->name);
    for (nn::Param* p : state.key.params()) read_tensor_into(is, p->value, path, p->name + " (key)");
    const std::uint64_t nbuf = read_u64(is, path);
    if (nbuf != qp.size()) {
        throw std::runtime_error("checkpoint " + path.string() + ": optimizer buffer count mismatch");
    }
    state.opt_buffers.clear();
    for (std::size_t i = 0; i < nbuf; ++i) {
        nn::Tensor t = nn::Tensor::zeros(qp[i]->value.shape);
        read_tensor_into(is, t, path, "optimizer buffer " + std::to_string(i));
        state.opt_buffers.push_back(std::move(t));
    }
    state.queue = mining::NegativeQueue::load(is);
    state.rng_state = read_string(is, path);
    return state;
}

void save_classifier(ClassifierState& state, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot create " + path.string());
    os.write(kClassifierMagic, 8);

    ordered_json manifest;
    ordered_json bb;
    bb["in_ch"] = state.backbone_cfg.in_ch;
    bb["in_h"] = state.backbone_cfg.in_h;
    bb["in_w"] = state.backbone_cfg.in_w;
    bb["width"] = state.backbone_cfg.width;
    bb["blocks"] = state.backbone_cfg.blocks;
    bb["global_pool"] = state.backbone_cfg.global_pool;
    manifest["backbone"] = bb;
    manifest["classes"] = state.classes;
    manifest["signature"] = state.f.signature();
    write_string(os, manifest.dump());

    nn::ParamRefs refs;
    state.f.collect(refs);
    state.head.collect(refs);
    for (nn::Param* p : refs) write_tensor(os, p->value);
    if (!os) throw std::runtime_error("checkpoint: failed writing " + path.string());
}

ClassifierState load_classifier(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    check_magic(is, kClassifierMagic, path, "classifier");

    ordered_json manifest;
    try {
        manifest = ordered_json::parse(read_string(is, path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint " + path.string() + ": bad manifest: " + e.what());
    }
    ClassifierState state;
    const auto& bb = manifest.at("backbone");
    state.backbone_cfg.in_ch = bb.at("in_ch").get<int>();
    state.backbone_cfg.in_h = bb.at("in_h").get<int>();
    state.backbone_cfg.in_w = bb.at("in_w").get<int>();
    state.backbone_cfg.width = bb.at("width").get<int>();
    state.backbone_cfg.blocks = bb.at("blocks").get<int>();
    state.backbone_cfg.global_pool = bb.at("global_pool").get<std::string>();
    for (const auto& c : manifest.at("classes")) state.classes.push_back(c.get<std::string>());
    if (state.classes.size() < 2) {
        throw std::runtime_error("checkpoint " + path.string() + ": classifier needs >= 2 classes");
    }

    state.f = nn::Backbone(state.backbone_cfg, "f");
    state.head = nn::Dense("head", state.f.feature_dim(), static_cast<int>(state.classes.size()));
    nn::ParamRefs refs;
    state.f.collect(refs);
    state.head.collect(refs);
    for (nn::Param* p : refs) read_tensor_into(is, p->value, path, p->name);
    return state;
}

}  // namespace uvcl::checkpoint
