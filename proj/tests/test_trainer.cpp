#include <cmath>
#include <fstream>

#include "doctest.h"
#include "support/helpers.hpp"
#include "uvcl/checkpoint.hpp"
#include "uvcl/trainer.hpp"

using namespace uvcl;

namespace {

trainer::PretrainConfig tiny_cfg(std::uint64_t seed = 0) {
    trainer::PretrainConfig cfg;
    cfg.encoder.backbone.in_ch = 1;
    cfg.encoder.backbone.in_h = 16;
    cfg.encoder.backbone.in_w = 16;
    cfg.encoder.backbone.width = 4;
    cfg.encoder.backbone.blocks = 2;
    cfg.encoder.embed_dim = 8;
    cfg.epochs = 4;
    cfg.batch_size = 4;
    cfg.optimizer.lr = 0.01;
    cfg.tau = 0.1;
    cfg.delta = 2;
    cfg.k = 2;
    cfg.delta_low = 3;
    cfg.warmup_fraction = 0.25;
    cfg.queue_capacity = 8;
    cfg.top_n = 2;
    cfg.seed = seed;
    cfg.exec = kernels::Exec::Serial;
    return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("one step updates the query, eases the key, and grows the queue") {
    auto synth = testsupport::tiny_corpus(21);
    auto cfg = tiny_cfg(4);
    cfg.negatives = trainer::NegativesMode::IntraOnly;  // no queue needed for the loss

    auto st = trainer::make_train_state(cfg);
    trainer::begin_epoch(st, 0);
    REQUIRE(st.phase == curriculum::Phase::Full);

    // key starts as an exact copy of the query
    {
        auto qp = st.query.params(), kp = st.key.params();
        for (std::size_t i = 0; i < qp.size(); ++i) CHECK(qp[i]->value.data == kp[i]->value.data);
    }

    // build one batch by hand from real frames
    std::vector<trainer::TupleImages> batch;
    for (int v = 0; v < 2; ++v) {
        const auto& video = synth.corpus.videos[v];
        trainer::TupleImages ti;
        ti.tuple = sampler::SampleTuple{video.id, 10, 11, {1, 20}, cfg.delta, cfg.delta_low};
        ti.anchor = video.frame_data[9];
        ti.positive = video.frame_data[10];
        ti.negatives = {video.frame_data[0], video.frame_data[19]};
        batch.push_back(std::move(ti));
    }

    auto key_before = st.key;
    auto query_before_data = st.query.params()[0]->value.data;

    auto res = trainer::train_step(st, batch);
    CHECK(std::isfinite(res.loss));
    CHECK(res.loss >= 0.0);
    CHECK(res.delta == cfg.delta_low);
    CHECK(st.step_counter == 1);

    // query moved
    CHECK(st.query.params()[0]->value.data != query_before_data);

    // key obeys the exact momentum recurrence against the post-step query
    auto kb = key_before.params();
    auto kp = st.key.params();
    auto qp = st.query.params();
    const double m = cfg.momentum_coefficient;
    for (std::size_t i = 0; i < kp.size(); ++i)
        for (std::size_t j = 0; j < kp[i]->value.data.size(); ++j) {
            double expected = m * kb[i]->value.data[j] + (1 - m) * qp[i]->value.data[j];
            CHECK(std::abs(kp[i]->value.data[j] - expected) < 1e-12);
        }

    // one key embedding per tuple was enqueued, tagged by source video
    REQUIRE(st.queue.size() == 2);
    CHECK(st.queue.entries()[0].video_id == synth.corpus.videos[0].id);
    CHECK(st.queue.entries()[1].video_id == synth.corpus.videos[1].id);
}

TEST_CASE("repeated steps on a fixed batch drive its loss down") {
    auto synth = testsupport::tiny_corpus(22);
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto cfg = tiny_cfg(seed);
        cfg.negatives = trainer::NegativesMode::IntraOnly;
        cfg.epochs = 1;
        auto st = trainer::make_train_state(cfg);
        trainer::begin_epoch(st, 0);

        std::vector<trainer::TupleImages> batch;
        for (int v = 0; v < 4; ++v) {
            const auto& video = synth.corpus.videos[v];
            trainer::TupleImages ti;
            ti.tuple = sampler::SampleTuple{video.id, 10, 12, {2, 20}, cfg.delta, cfg.delta_low};
            ti.anchor = video.frame_data[9];
            ti.positive = video.frame_data[11];
            ti.negatives = {video.frame_data[1], video.frame_data[19]};
            batch.push_back(std::move(ti));
        }

        double first = trainer::train_step(st, batch).loss;
        double last = first;
        for (int i = 0; i < 30; ++i) last = trainer::train_step(st, batch).loss;
        CHECK(last < first);
    }
}

TEST_CASE("full runs write a parseable step log and a checkpoint") {
    auto synth = testsupport::tiny_corpus(22);
    auto dir = testsupport::fresh_dir("trainer_log");
    auto cfg = tiny_cfg(1);
    cfg.epochs = 12;
    auto res = trainer::pretrain(synth.corpus, cfg, dir);

    REQUIRE(res.epoch_mean_loss.size() == 12);
    for (double l : res.epoch_mean_loss) {
        CHECK(std::isfinite(l));
        CHECK(l >= 0.0);
    }

    auto log = testsupport::read_file(dir / "step_log.csv");
    CHECK(log.rfind("epoch,step,phase,delta,loss,lr\n", 0) == 0);
    // one tuple per video per epoch, batches of 4 over 4 videos
    CHECK(res.rows.size() == 12);
    // warmup is ceil(0.25 * 12) = 3 epochs of the cross-video phase
    CHECK(res.rows[0].phase == "cross");
    CHECK(res.rows[2].phase == "cross");
    CHECK(res.rows[3].phase == "full");
    CHECK(res.rows[11].phase == "full");
    // the hardness schedule ends at the tightest radius
    CHECK(res.rows[11].delta == cfg.delta_low);
    CHECK(std::filesystem::exists(res.checkpoint));
}

TEST_CASE("the warm-up pass fills the queue before any optimizer step") {
    auto synth = testsupport::tiny_corpus(23);
    auto dir = testsupport::fresh_dir("trainer_warm");
    auto cfg = tiny_cfg(7);
    cfg.epochs = 2;
    auto res = trainer::pretrain(synth.corpus, cfg, dir, std::nullopt, true);
    auto state = checkpoint::load_pretrain(res.checkpoint);
    // prefill reaches max(top_n, capacity/2) = 4, the epochs top it up to capacity
    CHECK(state.queue.size() == 8);
    // mining already had material at the very first step
    auto log = testsupport::read_file(dir / "mining_log.csv");
    CHECK(log.find("\n0,0,") != std::string::npos);
}

TEST_CASE("checkpoint resume continues bit-identically") {
    auto synth = testsupport::tiny_corpus(24);
    auto cfg = tiny_cfg(11);
    cfg.epochs = 6;

    auto dir_a = testsupport::fresh_dir("trainer_straight");
    auto res_a = trainer::pretrain(synth.corpus, cfg, dir_a);

    auto cfg_b = cfg;
    cfg_b.checkpoint_every = 3;
    auto dir_b = testsupport::fresh_dir("trainer_interrupted");
    auto res_b = trainer::pretrain(synth.corpus, cfg_b, dir_b);
    auto mid = dir_b / "checkpoint_epoch0003.bin";
    REQUIRE(std::filesystem::exists(mid));

    auto dir_c = testsupport::fresh_dir("trainer_resumed");
    auto res_c = trainer::pretrain(synth.corpus, cfg, dir_c, mid);

    // the resumed run reproduces exactly the second half of the step log
    REQUIRE(res_a.rows.size() == 6);
    REQUIRE(res_c.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& a = res_a.rows[3 + i];
        const auto& c = res_c.rows[i];
        CHECK(a.epoch == c.epoch);
        CHECK(a.loss == c.loss);
        CHECK(a.lr == c.lr);
        CHECK(a.delta == c.delta);
    }

    // and the final checkpoints are byte-identical
    CHECK(testsupport::read_file(res_a.checkpoint) == testsupport::read_file(res_c.checkpoint));
}

TEST_CASE("resume rejects a checkpoint from a different setup") {
    auto synth = testsupport::tiny_corpus(25);
    auto cfg = tiny_cfg(13);
    cfg.epochs = 2;
    auto dir = testsupport::fresh_dir("trainer_mismatch");
    auto res = trainer::pretrain(synth.corpus, cfg, dir);

    auto other = cfg;
    other.tau = 0.2;
    auto dir2 = testsupport::fresh_dir("trainer_mismatch2");
    CHECK_THROWS_WITH_AS(trainer::pretrain(synth.corpus, other, dir2, res.checkpoint),
                         doctest::Contains("configuration"), std::runtime_error);
}

TEST_CASE("identical configs reproduce the step log byte for byte") {
    auto synth = testsupport::tiny_corpus(26);
    auto cfg = tiny_cfg(17);
    cfg.epochs = 3;
    auto dir_a = testsupport::fresh_dir("trainer_repro_a");
    auto dir_b = testsupport::fresh_dir("trainer_repro_b");
    trainer::pretrain(synth.corpus, cfg, dir_a);
    trainer::pretrain(synth.corpus, cfg, dir_b);
    CHECK(testsupport::read_file(dir_a / "step_log.csv") ==
          testsupport::read_file(dir_b / "step_log.csv"));

    cfg.seed = 18;
    auto dir_c = testsupport::fresh_dir("trainer_repro_c");
    trainer::pretrain(synth.corpus, cfg, dir_c);
    CHECK(testsupport::read_file(dir_a / "step_log.csv") !=
          testsupport::read_file(dir_c / "step_log.csv"));
}

TEST_CASE("mining log appears only on request and names real queue entries") {
    auto synth = testsupport::tiny_corpus(27);
    auto cfg = tiny_cfg(19);
    cfg.epochs = 2;

    auto dir_plain = testsupport::fresh_dir("trainer_nomine");
    trainer::pretrain(synth.corpus, cfg, dir_plain);
    CHECK_FALSE(std::filesystem::exists(dir_plain / "mining_log.csv"));

    auto dir_mine = testsupport::fresh_dir("trainer_mine");
    trainer::pretrain(synth.corpus, cfg, dir_mine, std::nullopt, true);
    auto log = testsupport::read_file(dir_mine / "mining_log.csv");
    CHECK(log.rfind("epoch,step,video_id,entry_ids,alphas,zhat_norm", 0) == 0);
    CHECK(std::count(log.begin(), log.end(), '\n') > 1);
}

TEST_CASE("invalid configurations are rejected up front") {
    auto synth = testsupport::tiny_corpus(28);
    auto cfg = tiny_cfg(1);
    cfg.delta_low = 1;  // below delta: windows would overlap
    auto dir = testsupport::fresh_dir("trainer_bad");
    CHECK_THROWS_AS(trainer::pretrain(synth.corpus, cfg, dir), std::exception);

    auto cfg2 = tiny_cfg(1);
    cfg2.encoder.backbone.in_h = 32;  // corpus frames are 16x16
    CHECK_THROWS_AS(trainer::pretrain(synth.corpus, cfg2, dir), std::exception);
}

}  // TEST_SUITE
