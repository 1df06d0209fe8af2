#include <fstream>

#include "doctest.h"
#include "support/helpers.hpp"
#include "uvcl/config.hpp"

using namespace uvcl;

TEST_SUITE("config") {

TEST_CASE("the canonical dump parses back to the same canonical dump") {
    config::RunConfig defaults;
    std::string text = config::config_text(defaults);
    auto reparsed = config::parse_config(text);
    CHECK(config::config_text(reparsed) == text);
    CHECK(config::config_hash(reparsed) == config::config_hash(defaults));
}

TEST_CASE("a partial config only overrides what it names") {
    auto cfg = config::parse_config(R"({"pretrain": {"tau": 0.5, "k": 7}})");
    CHECK(cfg.pretrain.tau == 0.5);
    CHECK(cfg.pretrain.k == 7);
    config::RunConfig defaults;
    CHECK(cfg.pretrain.epochs == defaults.pretrain.epochs);
    CHECK(cfg.finetune.folds == defaults.finetune.folds);
    CHECK(cfg.pretrain.encoder.embed_dim == defaults.pretrain.encoder.embed_dim);
}

TEST_CASE("enum-valued keys go through the string forms") {
    auto cfg = config::parse_config(
        R"({"pretrain": {"curriculum": "anti", "negatives": "cross_only"}})");
    CHECK(cfg.pretrain.curriculum_mode == curriculum::Mode::Anti);
    CHECK(cfg.pretrain.negatives == trainer::NegativesMode::CrossOnly);
    CHECK_THROWS_AS(config::parse_config(R"({"pretrain": {"curriculum": "sideways"}})"),
                    std::exception);
}

TEST_CASE("misspellings are errors, not silent defaults") {
    CHECK_THROWS_WITH_AS(config::parse_config(R"({"pretrain": {"taw": 0.1}})"),
                         doctest::Contains("taw"), std::runtime_error);
    CHECK_THROWS_WITH_AS(config::parse_config(R"({"pertrain": {}})"),
                         doctest::Contains("pertrain"), std::runtime_error);
    CHECK_THROWS_WITH_AS(config::parse_config(R"({"pretrain": {"epochs": "many"}})"),
                         doctest::Contains("wrong type"), std::runtime_error);
    CHECK_THROWS_WITH_AS(config::parse_config(R"({"pretrain": {"queue_capacity": -4}})"),
                         doctest::Contains("negative"), std::runtime_error);
    CHECK_THROWS_WITH_AS(config::parse_config("{nope"), doctest::Contains("not valid JSON"),
                         std::runtime_error);
    CHECK_THROWS_AS(config::parse_config("[1, 2]"), std::runtime_error);
}

TEST_CASE("the hash tracks content, not formatting of the input") {
    auto a = config::parse_config(R"({"pretrain": {"tau": 0.5}})");
    auto b = config::parse_config("{\n  \"pretrain\": {\"tau\": 0.5}\n}\n");
    CHECK(config::config_hash(a) == config::config_hash(b));
    auto c = config::parse_config(R"({"pretrain": {"tau": 0.25}})");
    CHECK(config::config_hash(a) != config::config_hash(c));
}

TEST_CASE("file write and load round-trip") {
    auto dir = testsupport::fresh_dir("config_file");
    config::RunConfig cfg;
    cfg.pretrain.seed = 123;
    cfg.positive_class = "lesion";
    config::write_config(cfg, dir / "config.json");
    auto loaded = config::load_config(dir / "config.json");
    CHECK(loaded.pretrain.seed == 123);
    CHECK(loaded.positive_class == "lesion");
    CHECK(config::config_text(loaded) == config::config_text(cfg));
    CHECK_THROWS_AS(config::load_config(dir / "absent.json"), std::runtime_error);
}

}  // TEST_SUITE
