#include "uvcl/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "uvcl/loss.hpp"

namespace uvcl::trainer {

namespace {

std::vector<double> tensor_row(const nn::Tensor& t, int i) {
    const int d = t.dim(1);
    const auto off = static_cast<std::size_t>(i) * d;
    return std::vector<double>(t.data.begin() + static_cast<std::ptrdiff_t>(off),
                               t.data.begin() + static_cast<std::ptrdiff_t>(off + d));
}

// One tuple drawn and decoded for a video. Consumes rng in a fixed order:
// curriculum radius (control mode only), tuple indices, anchor augmentation,
// positive augmentation.
TupleImages draw_tuple_images(TrainState& st, const dataset::VideoCorpus& corpus,
                              const dataset::Video& v, int epoch) {
    const curriculum::CurriculumConfig ccfg = curriculum_config(st.cfg);
    const int radius = curriculum::delta_at(epoch, v.frames, ccfg, &st.rng);
    TupleImages ti;
    ti.tuple = sampler::sample_tuple(v.id, v.frames, st.cfg.delta, st.cfg.k, radius, st.rng);
    ti.anchor = dataset::augment(dataset::decode_frame(corpus, v, ti.tuple.anchor), st.cfg.augment, st.rng);
    ti.positive =
        dataset::augment(dataset::decode_frame(corpus, v, ti.tuple.positive), st.cfg.augment, st.rng);
    ti.negatives.reserve(ti.tuple.negatives.size());
    for (int j : ti.tuple.negatives) {
        ti.negatives.push_back(dataset::decode_frame(corpus, v, j));
    }
    return ti;
}

checkpoint::PretrainState snapshot(const TrainState& st, const std::string& hash) {
    checkpoint::PretrainState cp;
    cp.query = st.query;
    cp.key = st.key;
    cp.opt_buffers = st.opt.buffers();
    cp.queue = st.queue;
    cp.rng_state = st.rng.serialize();
    cp.next_epoch = st.epoch;
    cp.step_counter = st.step_counter;
    cp.config_hash = hash;
    return cp;
}

std::string fingerprint_with_corpus(const PretrainConfig& cfg, const dataset::VideoCorpus& corpus) {
    std::ostringstream ss;
    ss << config_fingerprint(cfg) << "|corpus:" << corpus.image_h << "x" << corpus.image_w << "x"
       << corpus.image_c;
    for (const auto& v : corpus.videos) ss << "|" << v.id << ":" << v.frames;
    return to_hex(fnv1a64(ss.str()));
}

}  // namespace

NegativesMode negatives_mode_from_string(const std::string& s) {
    if (s == "joint") return NegativesMode::Joint;
    if (s == "cross_only") return NegativesMode::CrossOnly;
    if (s == "intra_only") return NegativesMode::IntraOnly;
    throw std::invalid_argument("trainer: unknown negatives mode '" + s +
                                "' (expected joint, cross_only or intra_only)");
}

std::string to_string(NegativesMode m) {
    switch (m) {
        case NegativesMode::Joint: return "joint";
        case NegativesMode::CrossOnly: return "cross_only";
        case NegativesMode::IntraOnly: return "intra_only";
    }
    return "?";
}

curriculum::CurriculumConfig curriculum_config(const PretrainConfig& cfg) {
    curriculum::CurriculumConfig c;
    c.mode = cfg.curriculum_mode;
    c.total_epochs = cfg.epochs;
    c.warmup_fraction = cfg.warmup_fraction;
    c.delta_low = cfg.delta_low;
    return c;
}

std::string config_fingerprint(const PretrainConfig& cfg) {
    // Everything that changes the numbers. Exec mode and checkpoint cadence
    // are deliberately absent: the parallel kernels are bitwise-equal to the
    // serial ones, and cadence only changes which files appear.
    std::ostringstream ss;
    ss << "enc:" << cfg.encoder.backbone.in_ch << "," << cfg.encoder.backbone.in_h << ","
       << cfg.encoder.backbone.in_w << "," << cfg.encoder.backbone.width << ","
       << cfg.encoder.backbone.blocks << "," << cfg.encoder.backbone.global_pool << ","
       << cfg.encoder.head_hidden << "," << cfg.encoder.embed_dim;
    ss << "|train:" << cfg.epochs << "," << cfg.batch_size << "," << format_double(cfg.optimizer.lr)
       << "," << format_double(cfg.optimizer.momentum) << ","
       << format_double(cfg.optimizer.weight_decay) << ","
       << format_double(cfg.momentum_coefficient) << "," << format_double(cfg.tau);
    ss << "|sampler:" << cfg.delta << "," << cfg.k << "," << cfg.delta_low;
    ss << "|curriculum:" << curriculum::to_string(cfg.curriculum_mode) << ","
       << format_double(cfg.warmup_fraction) << "," << to_string(cfg.negatives);
    ss << "|mining:" << cfg.queue_capacity << "," << cfg.top_n;
    ss << "|augment:" << format_double(cfg.augment.crop_min_scale) << ","
       << format_double(cfg.augment.hflip_prob) << "," << format_double(cfg.augment.brightness)
       << "," << format_double(cfg.augment.contrast) << ","
       << format_double(cfg.augment.noise_stddev);
    ss << "|seed:" << cfg.seed;
    return to_hex(fnv1a64(ss.str()));
}

TrainState make_train_state(const PretrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("trainer: epochs must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("trainer: batch_size must be positive");
    if (cfg.momentum_coefficient <= 0.0 || cfg.momentum_coefficient >= 1.0) {
        throw std::invalid_argument("trainer: momentum_coefficient must lie strictly in (0, 1)");
    }
    if (cfg.tau <= 0.0) throw std::invalid_argument("trainer: tau must be positive");
    if (cfg.delta_low < cfg.delta) {
        throw std::invalid_argument("trainer: delta_low must be at least delta, otherwise the "
                                    "positive window and the negative exclusion zone overlap");
    }

    TrainState st;
    st.cfg = cfg;
    st.query = encoder::make_encoder(cfg.encoder, cfg.seed);
    st.key = st.query;  // twins start identical
    st.opt = nn::Sgd(st.query.params());
    st.queue = mining::NegativeQueue(cfg.queue_capacity);
    st.rng = Rng(mix_seed(cfg.seed, 0x747261696eULL));  // training stream
    return st;
}

TrainState restore_train_state(const PretrainConfig& cfg, const std::filesystem::path& ckpt) {
    checkpoint::PretrainState cp = checkpoint::load_pretrain(ckpt);
    TrainState st;
    st.cfg = cfg;
    if (!(cp.query.cfg == cfg.encoder)) {
        throw std::runtime_error("trainer: checkpoint " + ckpt.string() +
                                 " holds a different encoder architecture");
    }
    st.query = std::move(cp.query);
    st.key = std::move(cp.key);
    st.opt = nn::Sgd(st.query.params());
    st.opt.buffers() = std::move(cp.opt_buffers);
    st.queue = std::move(cp.queue);
    st.rng.deserialize(cp.rng_state);
    st.epoch = cp.next_epoch;
    st.step_counter = cp.step_counter;
    // The fingerprint check lives in pretrain(), which also knows the corpus.
    return st;
}

void begin_epoch(TrainState& st, int epoch) {
    if (epoch < 0 || epoch >= st.cfg.epochs) {
        throw std::invalid_argument("trainer: epoch " + std::to_string(epoch) + " outside [0, " +
                                    std::to_string(st.cfg.epochs) + ")");
    }
    st.epoch = epoch;
    st.lr = nn::cosine_lr(st.cfg.optimizer.lr, epoch, st.cfg.epochs);
    switch (st.cfg.negatives) {
        case NegativesMode::Joint:
            st.phase = curriculum::phase(epoch, curriculum_config(st.cfg));
            break;
        case NegativesMode::CrossOnly:
            st.phase = curriculum::Phase::CrossOnly;
            break;
        case NegativesMode::IntraOnly:
            st.phase = curriculum::Phase::Full;
            break;
    }
}

StepResult train_step(TrainState& st, const std::vector<TupleImages>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const kernels::Exec mode = st.cfg.exec;
    const int B = static_cast<int>(batch.size());
    const int k = st.cfg.k;

    std::vector<Image> anchors;
    anchors.reserve(batch.size());
    for (const auto& item : batch) anchors.push_back(item.anchor);
    const nn::Tensor qbatch = encoder::images_to_batch(anchors, st.query.f.cfg);
    encoder::EncoderTrace trace;
    const nn::Tensor q = encoder::forward_train(st.query, qbatch, mode, trace);

    // Positives first, then each tuple's negatives, through the key encoder.
    std::vector<Image> keys;
    keys.reserve(batch.size() * static_cast<std::size_t>(1 + k));
    for (const auto& item : batch) keys.push_back(item.positive);
    for (const auto& item : batch) {
        if (static_cast<int>(item.negatives.size()) != k) {
            throw std::invalid_argument("train_step: tuple for video '" + item.tuple.video_id +
                                        "' carries " + std::to_string(item.negatives.size()) +
                                        " negatives, config says " + std::to_string(k));
        }
        for (const auto& im : item.negatives) keys.push_back(im);
    }
    const nn::Tensor kout = encoder::embed(st.key, keys, mode);

    const bool with_intra = st.phase == curriculum::Phase::Full;
    const bool with_mined = st.cfg.negatives != NegativesMode::IntraOnly;

    nn::Tensor dq = nn::Tensor::zeros(q.shape);
    const int dim = q.dim(1);
    double loss_sum = 0.0;
    for (int i = 0; i < B; ++i) {
        loss::LossInputs in;
        in.tau = st.cfg.tau;
        in.q = tensor_row(q, i);
        in.z_plus = tensor_row(kout, i);
        if (with_intra) {
            for (int j = 0; j < k; ++j) in.z_minus.push_back(tensor_row(kout, B + i * k + j));
        }
        if (with_mined) {
            const auto hn = mining::hard_negative_aggregate(in.q, st.queue, st.cfg.top_n,
                                                            st.cfg.tau, batch[static_cast<std::size_t>(i)].tuple.video_id);
            in.z_hat_minus = hn.z_hat;
            if (st.mining_sink) {
                double nrm = 0.0;
                for (double v : hn.z_hat) nrm += v * v;
                std::ostringstream row;
                row << st.epoch << "," << st.step_counter << ","
                    << batch[static_cast<std::size_t>(i)].tuple.video_id << ",";
                for (std::size_t r = 0; r < hn.entry_ids.size(); ++r) {
                    row << (r ? ";" : "") << hn.entry_ids[r];
                }
                row << ",";
                for (std::size_t r = 0; r < hn.alphas.size(); ++r) {
                    row << (r ? ";" : "") << format_double(hn.alphas[r]);
                }
                row << "," << format_double(std::sqrt(nrm));
                st.mining_sink(row.str());
            }
        }
        loss_sum += loss::loss_full(in);
        const loss::LossGradients g = loss::loss_gradients(in);
        for (int d = 0; d < dim; ++d) {
            dq.data[static_cast<std::size_t>(i) * dim + d] = g.dq[static_cast<std::size_t>(d)] / B;
        }
    }

    nn::ParamRefs params = st.query.params();
    nn::zero_grads(params);
    encoder::backward_train(st.query, trace, dq, mode);

    nn::SgdConfig oc = st.cfg.optimizer;
    oc.lr = st.lr;
    st.opt.step(params, oc);

    encoder::momentum_update(st.key, st.query, st.cfg.momentum_coefficient);

    for (int i = 0; i < B; ++i) {
        st.queue.enqueue(tensor_row(kout, i), batch[static_cast<std::size_t>(i)].tuple.video_id);
    }

    ++st.step_counter;
    return {loss_sum / B, batch.front().tuple.big_delta};
}

PretrainResult pretrain(const dataset::VideoCorpus& corpus, const PretrainConfig& cfg,
                        const std::filesystem::path& run_dir,
                        const std::optional<std::filesystem::path>& resume, bool log_mining) {
    if (corpus.videos.size() < 2) {
        throw std::runtime_error("pretrain: cross-video negatives need at least two videos, corpus has " +
                                 std::to_string(corpus.videos.size()));
    }
    for (const auto& v : corpus.videos) {
        if (v.frames < 2) {
            throw std::runtime_error("pretrain: video '" + v.id + "' has " +
                                     std::to_string(v.frames) + " frame(s), need at least 2");
        }
    }
    if (cfg.encoder.backbone.in_h != corpus.image_h || cfg.encoder.backbone.in_w != corpus.image_w) {
        throw std::runtime_error("pretrain: encoder expects " +
                                 std::to_string(cfg.encoder.backbone.in_h) + "x" +
                                 std::to_string(cfg.encoder.backbone.in_w) + " input, corpus frames are " +
                                 std::to_string(corpus.image_h) + "x" + std::to_string(corpus.image_w));
    }

    std::filesystem::create_directories(run_dir);
    const std::string hash = fingerprint_with_corpus(cfg, corpus);

    TrainState st = resume ? restore_train_state(cfg, *resume) : make_train_state(cfg);
    if (resume) {
        const checkpoint::PretrainState probe = checkpoint::load_pretrain(*resume);
        if (probe.config_hash != hash) {
            throw std::runtime_error("pretrain: checkpoint " + resume->string() +
                                     " was produced under a different configuration or corpus "
                                     "(fingerprint " + probe.config_hash + ", expected " + hash + ")");
        }
    }

    std::ofstream mining_log;
    if (log_mining) {
        mining_log.open(run_dir / "mining_log.csv", std::ios::binary);
        if (!mining_log) throw std::runtime_error("pretrain: cannot create mining_log.csv in " + run_dir.string());
        mining_log << "epoch,step,video_id,entry_ids,alphas,zhat_norm\n";
        st.mining_sink = [&mining_log](const std::string& row) { mining_log << row << "\n"; };
    }

    std::ofstream log(run_dir / "step_log.csv", std::ios::binary);
    if (!log) throw std::runtime_error("pretrain: cannot create step_log.csv in " + run_dir.string());
    log << "epoch,step,phase,delta,loss,lr\n";

    const curriculum::CurriculumConfig ccfg = curriculum_config(cfg);
    for (const auto& v : corpus.videos) {
        if (curriculum::schedule_degenerate(v.frames, ccfg)) {
            std::cerr << "pretrain: video '" << v.id << "' (" << v.frames
                      << " frames) is too short for the radius schedule; pinning it to delta_low="
                      << cfg.delta_low << "\n";
        }
        if (cfg.delta > v.frames / 4) {
            std::cerr << "pretrain: positive radius delta=" << cfg.delta
                      << " is large relative to video '" << v.id << "' (" << v.frames
                      << " frames); positives may span most of it\n";
        }
    }

    // Fill the queue with key embeddings before any optimizer step, so mining
    // is available from the very first step.
    if (!resume) {
        while (!st.queue.warmed_up(cfg.top_n)) {
            std::vector<std::size_t> order(corpus.videos.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            st.rng.shuffle(order);
            for (std::size_t idx : order) {
                const dataset::Video& v = corpus.videos[idx];
                const TupleImages ti = draw_tuple_images(st, corpus, v, 0);
                const nn::Tensor z = encoder::embed(st.key, std::vector<Image>{ti.positive}, cfg.exec);
                st.queue.enqueue(tensor_row(z, 0), v.id);
                if (st.queue.warmed_up(cfg.top_n)) break;
            }
        }
    }

    PretrainResult result;
    for (int e = st.epoch; e < cfg.epochs; ++e) {
        begin_epoch(st, e);
        std::vector<std::size_t> order(corpus.videos.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        st.rng.shuffle(order);

        double esum = 0.0;
        int esteps = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TupleImages> batch;
            batch.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                batch.push_back(draw_tuple_images(st, corpus, corpus.videos[order[i]], e));
            }
            const std::uint64_t seq = st.step_counter;
            const StepResult res = train_step(st, batch);

            StepLogRow row;
            row.epoch = e;
            row.step = seq;
            row.phase = curriculum::to_string(st.phase);
            row.delta = res.delta;
            row.loss = res.loss;
            row.lr = st.lr;
            log << row.epoch << "," << row.step << "," << row.phase << "," << row.delta << ","
                << format_double(row.loss) << "," << format_double(row.lr) << "\n";
            result.rows.push_back(std::move(row));
            esum += res.loss;
            ++esteps;
        }
        log.flush();
        result.epoch_mean_loss.push_back(esum / esteps);
        st.epoch = e + 1;

        if (cfg.checkpoint_every > 0 && (e + 1) % cfg.checkpoint_every == 0 && e + 1 < cfg.epochs) {
            char name[40];
            std::snprintf(name, sizeof(name), "checkpoint_epoch%04d.bin", e + 1);
            checkpoint::PretrainState cp = snapshot(st, hash);
            checkpoint::save_pretrain(cp, run_dir / name);
        }
    }

    result.checkpoint = run_dir / "checkpoint_final.bin";
    checkpoint::PretrainState cp = snapshot(st, hash);
    checkpoint::save_pretrain(cp, result.checkpoint);
    return result;
}

}  // namespace uvcl::trainer
