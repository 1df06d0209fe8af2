#include "uvcl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "uvcl/checkpoint.hpp"
#include "uvcl/config.hpp"
#include "uvcl/core.hpp"
#include "uvcl/curriculum.hpp"
#include "uvcl/dataset.hpp"
#include "uvcl/downstream.hpp"
#include "uvcl/sampler.hpp"
#include "uvcl/trainer.hpp"

namespace fs = std::filesystem;

namespace uvcl::cli {

namespace {

std::string timestamp_utc() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    return buf;
}

fs::path resolve_run_dir(const std::string& explicit_dir, const std::string& root,
                         const std::string& hash, const std::string& kind) {
    fs::path dir = explicit_dir.empty()
                       ? fs::path(root) / (kind + "-" + timestamp_utc() + "-" + hash.substr(0, 8))
                       : fs::path(explicit_dir);
    fs::create_directories(dir);
    return dir;
}

config::RunConfig load_run_config(const std::string& path) {
    return path.empty() ? config::RunConfig{} : config::load_config(path);
}

int parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("cannot parse '" + s + "' as an integer for " + what);
    }
}

double parse_real(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("cannot parse '" + s + "' as a number for " + what);
    }
}

// Applies one sweep value to the pretraining config.
void apply_sweep_param(trainer::PretrainConfig& cfg, const std::string& name,
                       const std::string& value) {
    if (name == "k")
        cfg.k = parse_int(value, name);
    else if (name == "delta")
        cfg.delta = parse_int(value, name);
    else if (name == "delta_low")
        cfg.delta_low = parse_int(value, name);
    else if (name == "tau")
        cfg.tau = parse_real(value, name);
    else if (name == "top_n")
        cfg.top_n = parse_int(value, name);
    else if (name == "queue_capacity")
        cfg.queue_capacity = static_cast<std::size_t>(parse_int(value, name));
    else if (name == "epochs")
        cfg.epochs = parse_int(value, name);
    else if (name == "batch_size")
        cfg.batch_size = parse_int(value, name);
    else if (name == "lr")
        cfg.optimizer.lr = parse_real(value, name);
    else if (name == "warmup_fraction")
        cfg.warmup_fraction = parse_real(value, name);
    else if (name == "momentum_coefficient")
        cfg.momentum_coefficient = parse_real(value, name);
    else if (name == "seed")
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else if (name == "curriculum")
        cfg.curriculum_mode = curriculum::mode_from_string(value);
    else if (name == "negatives")
        cfg.negatives = trainer::negatives_mode_from_string(value);
    else
        throw std::runtime_error(
            "unknown sweep parameter '" + name +
            "'; valid: k, delta, delta_low, tau, top_n, queue_capacity, epochs, batch_size, lr, "
            "warmup_fraction, momentum_coefficient, seed, curriculum, negatives");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    if (out.empty()) throw std::runtime_error("--values needs a comma-separated list");
    return out;
}

void print_confusion(std::ostream& os, const downstream::Metrics& m) {
    std::size_t w = 8;
    for (const auto& c : m.classes) w = std::max(w, c.size() + 6);
    os << std::setw(static_cast<int>(w)) << "";
    for (const auto& c : m.classes) os << std::setw(static_cast<int>(w)) << ("pred:" + c);
    os << "\n";
    for (std::size_t i = 0; i < m.classes.size(); ++i) {
        os << std::setw(static_cast<int>(w)) << ("true:" + m.classes[i]);
        for (std::size_t j = 0; j < m.classes.size(); ++j)
            os << std::setw(static_cast<int>(w)) << m.confusion[i][j];
        os << "\n";
    }
}

struct PretrainOpts {
    std::string data, config_path, run_dir, runs_root = "runs", resume;
    bool serial = false, log_mining = false;
    std::uint64_t seed = 0;
    int epochs = 0, batch_size = 0, delta = 0, k = 0, delta_low = 0, top_n = 0, queue = 0,
        checkpoint_every = 0;
    double lr = 0, tau = 0, warmup = 0;
    std::string curriculum, negatives;
};

struct FinetuneOpts {
    std::string data, config_path, run_dir, runs_root = "runs", checkpoint, positive;
    bool serial = false, random_init = false, freeze = false, no_cv = false;
    std::uint64_t seed = 0;
    int epochs = 0, batch_size = 0, folds = 0;
    double lr = 0;
};

struct EvaluateOpts {
    std::string data, classifier, positive, out;
    bool serial = false;
};

struct GenOpts {
    std::string out, config_path;
    std::uint64_t seed = 0;
    int videos = 0, frames_min = 0, frames_max = 0;
    double noise = -1.0;
};

struct SamplerOpts {
    int frames = 0, delta = 3, big_delta = 7, anchor = 0, draws = 0, k = 3;
    std::uint64_t seed = 0;
};

struct CurriculumOpts {
    int frames = 0, epochs = 60, delta_low = 7;
    double warmup = 0.2;
    std::string mode = "proposed";
    std::uint64_t seed = 0;
};

struct SweepOpts {
    std::string data, config_path, run_dir, runs_root = "runs", param, values;
    bool serial = false;
};

int cmd_gen_synthetic(const GenOpts& o, const CLI::App& sc) {
    config::RunConfig rc = load_run_config(o.config_path);
    if (sc.count("--seed")) rc.synthetic.seed = o.seed;
    if (sc.count("--videos")) rc.synthetic.num_videos = o.videos;
    if (sc.count("--frames-min")) rc.synthetic.frames_min = o.frames_min;
    if (sc.count("--frames-max")) rc.synthetic.frames_max = o.frames_max;
    if (sc.count("--noise")) rc.synthetic.noise_level = o.noise;

    dataset::SyntheticCorpus synth = dataset::generate_synthetic(rc.synthetic);
    fs::create_directories(o.out);
    fs::path manifest = dataset::write_corpus(synth.corpus, o.out);
    dataset::write_ground_truth_csv(synth.windows, fs::path(o.out) / "ground_truth.csv");
    dataset::write_labeled_manifest(synth.windows, synth.corpus, rc.labeling,
                                    fs::path(o.out) / "labeled.json");
    config::write_config(rc, fs::path(o.out) / "config.json");

    int total_frames = 0;
    for (const auto& v : synth.corpus.videos) total_frames += v.frames;
    dataset::LabeledImageSet labeled = dataset::label_frames(synth, rc.labeling);
    std::cout << "wrote " << synth.corpus.videos.size() << " videos, " << total_frames
              << " frames of " << synth.corpus.image_h << "x" << synth.corpus.image_w << " to "
              << o.out << "\n";
    std::cout << "corpus manifest:  " << manifest.string() << "\n";
    std::cout << "labeled manifest: " << (fs::path(o.out) / "labeled.json").string() << " ("
              << labeled.items.size() << " items)\n";
    std::cout << "ground truth:     " << (fs::path(o.out) / "ground_truth.csv").string() << "\n";
    return 0;
}

int cmd_pretrain(const PretrainOpts& o, const CLI::App& sc) {
    config::RunConfig rc = load_run_config(o.config_path);
    trainer::PretrainConfig& p = rc.pretrain;
    if (sc.count("--seed")) p.seed = o.seed;
    if (sc.count("--epochs")) p.epochs = o.epochs;
    if (sc.count("--batch-size")) p.batch_size = o.batch_size;
    if (sc.count("--lr")) p.optimizer.lr = o.lr;
    if (sc.count("--tau")) p.tau = o.tau;
    if (sc.count("--delta")) p.delta = o.delta;
    if (sc.count("--k")) p.k = o.k;
    if (sc.count("--delta-low")) p.delta_low = o.delta_low;
    if (sc.count("--warmup-fraction")) p.warmup_fraction = o.warmup;
    if (sc.count("--queue-capacity")) p.queue_capacity = static_cast<std::size_t>(o.queue);
    if (sc.count("--top-n")) p.top_n = o.top_n;
    if (sc.count("--checkpoint-every")) p.checkpoint_every = o.checkpoint_every;
    if (sc.count("--curriculum")) p.curriculum_mode = curriculum::mode_from_string(o.curriculum);
    if (sc.count("--negatives")) p.negatives = trainer::negatives_mode_from_string(o.negatives);
    p.exec = o.serial ? kernels::Exec::Serial : kernels::Exec::Parallel;

    dataset::VideoCorpus corpus = dataset::load_corpus(o.data);
    dataset::preload(corpus);

    fs::path run_dir = resolve_run_dir(o.run_dir, o.runs_root, config::config_hash(rc), "pretrain");
    config::write_config(rc, run_dir / "config.json");

    std::optional<fs::path> resume;
    if (!o.resume.empty()) resume = fs::path(o.resume);
    trainer::PretrainResult res = trainer::pretrain(corpus, p, run_dir, resume, o.log_mining);

    std::cout << "run dir:    " << run_dir.string() << "\n";
    std::cout << "checkpoint: " << res.checkpoint.string() << "\n";
    std::cout << "steps:      " << res.rows.size() << "\n";
    if (!res.epoch_mean_loss.empty())
        std::cout << "final epoch mean loss: " << format_double(res.epoch_mean_loss.back())
                  << "\n";
    return 0;
}

int cmd_finetune(const FinetuneOpts& o, const CLI::App& sc) {
    config::RunConfig rc = load_run_config(o.config_path);
    downstream::FinetuneConfig& f = rc.finetune;
    if (sc.count("--seed")) f.seed = o.seed;
    if (sc.count("--epochs")) f.epochs = o.epochs;
    if (sc.count("--batch-size")) f.batch_size = o.batch_size;
    if (sc.count("--lr")) f.optimizer.lr = o.lr;
    if (sc.count("--folds")) f.folds = o.folds;
    if (sc.count("--freeze")) f.freeze_backbone = o.freeze;
    if (sc.count("--positive")) rc.positive_class = o.positive;
    f.exec = o.serial ? kernels::Exec::Serial : kernels::Exec::Parallel;

    dataset::LabeledImageSet data = dataset::load_labeled(o.data);
    nn::Backbone init =
        o.random_init ? downstream::random_backbone(rc.pretrain.encoder.backbone, f.seed)
                      : downstream::backbone_from_checkpoint(o.checkpoint);

    fs::path run_dir = resolve_run_dir(o.run_dir, o.runs_root, config::config_hash(rc), "finetune");
    config::write_config(rc, run_dir / "config.json");

    if (!o.no_cv) {
        downstream::CrossValidateResult cv =
            downstream::cross_validate(init, data, f, rc.positive_class);
        std::ofstream csv(run_dir / "results.csv", std::ios::binary);
        csv << downstream::results_csv(cv);
        std::ofstream txt(run_dir / "results.txt", std::ios::binary);
        std::string table = downstream::results_table(cv);
        txt << table;
        std::cout << table;
    }

    downstream::Classifier clf = downstream::finetune(init, data, f);
    checkpoint::save_classifier(clf, run_dir / "classifier.bin");
    std::cout << "run dir:    " << run_dir.string() << "\n";
    std::cout << "classifier: " << (run_dir / "classifier.bin").string() << "\n";
    return 0;
}

int cmd_evaluate(const EvaluateOpts& o) {
    downstream::Classifier clf = checkpoint::load_classifier(o.classifier);
    dataset::LabeledImageSet data = dataset::load_labeled(o.data);
    kernels::Exec exec = o.serial ? kernels::Exec::Serial : kernels::Exec::Parallel;
    downstream::Metrics m = downstream::evaluate(clf, data, o.positive, exec);

    print_confusion(std::cout, m);
    std::string csv = downstream::metrics_csv(m);
    std::cout << csv;
    if (!o.out.empty()) {
        std::ofstream out(o.out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write metrics file " + o.out);
        out << csv;
    }
    return 0;
}

int cmd_inspect_sampler(const SamplerOpts& o, const CLI::App& sc) {
    if (sc.count("--anchor")) {
        std::vector<int> pos = sampler::positive_support(o.anchor, o.delta, o.frames);
        std::vector<int> neg = sampler::negative_support(o.anchor, o.big_delta, o.frames);
        auto print_list = [](const char* name, const std::vector<int>& v) {
            std::cout << name << " (" << v.size() << "):";
            for (int x : v) std::cout << " " << x;
            std::cout << "\n";
        };
        std::cout << "frames 1.." << o.frames << ", anchor " << o.anchor << ", delta " << o.delta
                  << ", exclusion radius " << o.big_delta << "\n";
        print_list("positive support", pos);
        print_list("negative support", neg);
    }
    if (o.draws > 0) {
        Rng rng(o.seed);
        std::cout << "anchor positive negatives\n";
        for (int i = 0; i < o.draws; ++i) {
            sampler::SampleTuple t =
                sampler::sample_tuple("video", o.frames, o.delta, o.k, o.big_delta, rng);
            std::cout << t.anchor << " " << t.positive << " ";
            for (std::size_t j = 0; j < t.negatives.size(); ++j)
                std::cout << (j ? "," : "") << t.negatives[j];
            std::cout << "\n";
        }
    }
    if (!sc.count("--anchor") && o.draws == 0)
        throw std::runtime_error("nothing to inspect; pass --anchor and/or --draws");
    return 0;
}

int cmd_inspect_curriculum(const CurriculumOpts& o) {
    curriculum::CurriculumConfig cc;
    cc.mode = curriculum::mode_from_string(o.mode);
    cc.total_epochs = o.epochs;
    cc.warmup_fraction = o.warmup;
    cc.delta_low = o.delta_low;

    Rng rng(o.seed);
    std::cout << "video frames: " << o.frames << ", widest radius "
              << curriculum::delta_high(o.frames) << ", final radius " << cc.delta_low << "\n";
    std::cout << "epoch  phase  lambda  delta\n";
    char line[96];
    for (int e = 0; e < cc.total_epochs; ++e) {
        curriculum::CurriculumState st = curriculum::state_at(e, cc);
        int d = curriculum::delta_at(e, o.frames, cc, &rng);
        char lam[32];
        if (st.lambda)
            std::snprintf(lam, sizeof lam, "%6.4f", *st.lambda);
        else
            std::snprintf(lam, sizeof lam, "%6s", "-");
        std::snprintf(line, sizeof line, "%5d  %-5s  %s  %5d\n", e,
                      curriculum::to_string(st.phase).c_str(), lam, d);
        std::cout << line;
    }
    return 0;
}

int cmd_sweep(const SweepOpts& o) {
    config::RunConfig rc = load_run_config(o.config_path);
    rc.pretrain.exec = o.serial ? kernels::Exec::Serial : kernels::Exec::Parallel;

    dataset::VideoCorpus corpus = dataset::load_corpus(o.data);
    dataset::preload(corpus);

    fs::path root = resolve_run_dir(o.run_dir, o.runs_root, config::config_hash(rc), "sweep");
    std::vector<std::string> values = split_csv(o.values);

    std::ostringstream csv;
    csv << "param,value,final_mean_loss,checkpoint\n";
    for (const std::string& value : values) {
        config::RunConfig rv = rc;
        apply_sweep_param(rv.pretrain, o.param, value);
        fs::path dir = root / (o.param + "-" + value);
        fs::create_directories(dir);
        config::write_config(rv, dir / "config.json");
        trainer::PretrainResult res =
            trainer::pretrain(corpus, rv.pretrain, dir, std::nullopt, false);
        double final_loss = res.epoch_mean_loss.empty() ? 0.0 : res.epoch_mean_loss.back();
        csv << o.param << "," << value << "," << format_double(final_loss) << ","
            << res.checkpoint.string() << "\n";
        std::cout << o.param << "=" << value
                  << "  final mean loss: " << format_double(final_loss) << "\n";
    }
    std::ofstream out(root / "sweep.csv", std::ios::binary);
    out << csv.str();
    std::cout << "sweep results: " << (root / "sweep.csv").string() << "\n";
    return 0;
}

}  // namespace

int run(std::vector<std::string> args) {
    CLI::App app{"contrastive pretraining on scan videos with hard negative mining"};
    app.require_subcommand(1);

    GenOpts gen;
    CLI::App* gen_sc = app.add_subcommand("gen-synthetic", "generate a synthetic PGM corpus");
    gen_sc->add_option("--out", gen.out, "output directory")->required();
    gen_sc->add_option("--config", gen.config_path, "JSON config file");
    gen_sc->add_option("--seed", gen.seed, "generator seed");
    gen_sc->add_option("--videos", gen.videos, "number of videos");
    gen_sc->add_option("--frames-min", gen.frames_min, "shortest video length");
    gen_sc->add_option("--frames-max", gen.frames_max, "longest video length");
    gen_sc->add_option("--noise", gen.noise, "per-pixel noise stddev");

    PretrainOpts pre;
    CLI::App* pre_sc = app.add_subcommand("pretrain", "self-supervised pretraining on a corpus");
    pre_sc->add_option("--data", pre.data, "corpus manifest.json")->required();
    pre_sc->add_option("--config", pre.config_path, "JSON config file");
    pre_sc->add_option("--run-dir", pre.run_dir, "exact run directory (default: generated)");
    pre_sc->add_option("--runs-root", pre.runs_root, "parent for generated run directories");
    pre_sc->add_option("--resume", pre.resume, "checkpoint to continue from");
    pre_sc->add_flag("--serial", pre.serial, "single-threaded kernels");
    pre_sc->add_flag("--log-mining", pre.log_mining, "write mining_log.csv");
    pre_sc->add_option("--seed", pre.seed, "training seed");
    pre_sc->add_option("--epochs", pre.epochs, "training epochs");
    pre_sc->add_option("--batch-size", pre.batch_size, "tuples per optimizer step");
    pre_sc->add_option("--lr", pre.lr, "base learning rate");
    pre_sc->add_option("--tau", pre.tau, "softmax temperature");
    pre_sc->add_option("--delta", pre.delta, "positive window radius");
    pre_sc->add_option("--k", pre.k, "within-video negatives per tuple");
    pre_sc->add_option("--delta-low", pre.delta_low, "hardest exclusion radius");
    pre_sc->add_option("--warmup-fraction", pre.warmup, "share of cross-video-only epochs");
    pre_sc->add_option("--queue-capacity", pre.queue, "negative queue size");
    pre_sc->add_option("--top-n", pre.top_n, "queue entries blended per synthesized negative");
    pre_sc->add_option("--checkpoint-every", pre.checkpoint_every,
                       "periodic checkpoint interval in epochs (0 = final only)");
    pre_sc->add_option("--curriculum", pre.curriculum, "proposed | anti | control");
    pre_sc->add_option("--negatives", pre.negatives, "joint | cross_only | intra_only");

    FinetuneOpts fin;
    CLI::App* fin_sc =
        app.add_subcommand("finetune", "cross-validated fine-tuning on a labeled set");
    fin_sc->add_option("--data", fin.data, "labeled manifest (labeled.json)")->required();
    fin_sc->add_option("--checkpoint", fin.checkpoint, "pretraining checkpoint");
    fin_sc->add_flag("--random-init", fin.random_init, "skip pretraining; random backbone");
    fin_sc->add_option("--config", fin.config_path, "JSON config file");
    fin_sc->add_option("--run-dir", fin.run_dir, "exact run directory (default: generated)");
    fin_sc->add_option("--runs-root", fin.runs_root, "parent for generated run directories");
    fin_sc->add_flag("--serial", fin.serial, "single-threaded kernels");
    fin_sc->add_option("--seed", fin.seed, "fine-tuning seed");
    fin_sc->add_option("--epochs", fin.epochs, "fine-tuning epochs");
    fin_sc->add_option("--batch-size", fin.batch_size, "images per optimizer step");
    fin_sc->add_option("--lr", fin.lr, "base learning rate");
    fin_sc->add_option("--folds", fin.folds, "cross-validation folds");
    fin_sc->add_flag("--freeze", fin.freeze, "train only the classification head");
    fin_sc->add_option("--positive", fin.positive, "positive class for sensitivity/specificity");
    fin_sc->add_flag("--no-cv", fin.no_cv, "skip cross-validation, train on everything");

    EvaluateOpts ev;
    CLI::App* ev_sc = app.add_subcommand("evaluate", "evaluate a saved classifier");
    ev_sc->add_option("--data", ev.data, "labeled manifest (labeled.json)")->required();
    ev_sc->add_option("--classifier", ev.classifier, "classifier checkpoint")->required();
    ev_sc->add_option("--positive", ev.positive, "positive class for sensitivity/specificity");
    ev_sc->add_option("--out", ev.out, "also write metrics CSV here");
    ev_sc->add_flag("--serial", ev.serial, "single-threaded kernels");

    SamplerOpts sam;
    CLI::App* sam_sc = app.add_subcommand("inspect-sampler", "show supports and sample tuples");
    sam_sc->add_option("--frames", sam.frames, "video length M")->required();
    sam_sc->add_option("--delta", sam.delta, "positive window radius");
    sam_sc->add_option("--big-delta", sam.big_delta, "exclusion radius");
    sam_sc->add_option("--anchor", sam.anchor, "print supports for this anchor");
    sam_sc->add_option("--draws", sam.draws, "number of tuples to sample");
    sam_sc->add_option("--k", sam.k, "negatives per tuple");
    sam_sc->add_option("--seed", sam.seed, "sampling seed");

    CurriculumOpts cur;
    CLI::App* cur_sc =
        app.add_subcommand("inspect-curriculum", "print the hardness schedule epoch by epoch");
    cur_sc->add_option("--frames", cur.frames, "video length M")->required();
    cur_sc->add_option("--mode", cur.mode, "proposed | anti | control");
    cur_sc->add_option("--epochs", cur.epochs, "total epochs");
    cur_sc->add_option("--warmup", cur.warmup, "cross-video-only share");
    cur_sc->add_option("--delta-low", cur.delta_low, "hardest exclusion radius");
    cur_sc->add_option("--seed", cur.seed, "control-mode draw seed");

    SweepOpts sw;
    CLI::App* sw_sc = app.add_subcommand("sweep", "pretrain across values of one parameter");
    sw_sc->add_option("--data", sw.data, "corpus manifest.json")->required();
    sw_sc->add_option("--config", sw.config_path, "JSON config file");
    sw_sc->add_option("--param", sw.param, "parameter to vary")->required();
    sw_sc->add_option("--values", sw.values, "comma-separated values")->required();
    sw_sc->add_option("--run-dir", sw.run_dir, "exact sweep directory (default: generated)");
    sw_sc->add_option("--runs-root", sw.runs_root, "parent for generated run directories");
    sw_sc->add_flag("--serial", sw.serial, "single-threaded kernels");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen_sc->parsed()) return cmd_gen_synthetic(gen, *gen_sc);
        if (pre_sc->parsed()) return cmd_pretrain(pre, *pre_sc);
        if (fin_sc->parsed()) {
            if (fin.random_init != fin.checkpoint.empty())
                throw std::runtime_error(
                    "pass exactly one of --checkpoint or --random-init to pick the backbone");
            return cmd_finetune(fin, *fin_sc);
        }
        if (ev_sc->parsed()) return cmd_evaluate(ev);
        if (sam_sc->parsed()) return cmd_inspect_sampler(sam, *sam_sc);
        if (cur_sc->parsed()) return cmd_inspect_curriculum(cur);
        if (sw_sc->parsed()) return cmd_sweep(sw);
        throw std::runtime_error("no subcommand given");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace uvcl::cli
