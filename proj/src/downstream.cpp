#include "uvcl/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "uvcl/core.hpp"
#include "uvcl/encoder.hpp"

namespace uvcl::downstream {

namespace {

struct CeResult {
    double loss = 0.0;
    nn::Tensor dlogits;
};

// Mean softmax cross-entropy over the batch, with the gradient already
// divided by the batch size.
CeResult softmax_cross_entropy(const nn::Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0);
    const int c = logits.dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw std::runtime_error("label count does not match the logit batch");
    CeResult out;
    out.dlogits = nn::Tensor::zeros({n, c});
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = &logits.data[static_cast<std::size_t>(i) * c];
        double m = row[0];
        for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) sum += std::exp(row[j] - m);
        total += m + std::log(sum) - row[labels[i]];
        for (int j = 0; j < c; ++j) {
            double p = std::exp(row[j] - m) / sum;
            out.dlogits.data[static_cast<std::size_t>(i) * c + j] =
                (p - (j == labels[i] ? 1.0 : 0.0)) / n;
        }
    }
    out.loss = total / n;
    return out;
}

std::vector<int> label_indices(const dataset::LabeledImageSet& set) {
    std::vector<int> out;
    out.reserve(set.items.size());
    for (const auto& item : set.items) {
        auto it = std::find(set.classes.begin(), set.classes.end(), item.label);
        if (it == set.classes.end())
            throw std::runtime_error("label '" + item.label + "' is not in the class list");
        out.push_back(static_cast<int>(it - set.classes.begin()));
    }
    return out;
}

int argmax_row(const double* row, int c) {
    int best = 0;
    for (int j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
    return best;
}

Aggregate aggregate_of(const std::vector<double>& vals) {
    Aggregate a;
    a.folds = static_cast<int>(vals.size());
    if (vals.empty()) return a;
    a.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    if (vals.size() >= 2) {
        double ss = 0.0;
        for (double v : vals) ss += (v - a.mean) * (v - a.mean);
        a.stddev = std::sqrt(ss / (vals.size() - 1));
    }
    return a;
}

std::string opt_str(const std::optional<double>& v) {
    return v ? format_double(*v) : "undefined";
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "    -    ";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%9.6f", *v);
    return buf;
}

}  // namespace

nn::Backbone backbone_from_checkpoint(const std::filesystem::path& ckpt) {
    return checkpoint::load_pretrain(ckpt).query.f;
}

nn::Backbone random_backbone(const nn::BackboneConfig& cfg, std::uint64_t seed) {
    nn::Backbone b(cfg, "f");
    Rng rng(mix_seed(seed, 0x6261636bULL));
    b.init(rng);
    return b;
}

Classifier finetune(const nn::Backbone& init, const dataset::LabeledImageSet& train,
                    const FinetuneConfig& cfg) {
    if (train.items.empty()) throw std::runtime_error("cannot fine-tune on an empty label set");
    if (train.classes.size() < 2) throw std::runtime_error("fine-tuning needs at least two classes");
    if (cfg.epochs < 1) throw std::runtime_error("fine-tune epochs must be positive");
    if (cfg.batch_size < 1) throw std::runtime_error("fine-tune batch size must be positive");

    const auto labels = label_indices(train);

    Classifier clf;
    clf.backbone_cfg = init.cfg;
    clf.f = init;
    clf.classes = train.classes;
    clf.head = nn::Dense("head", clf.f.feature_dim(), static_cast<int>(train.classes.size()));
    Rng head_rng(mix_seed(cfg.seed, 0x68656164ULL));
    clf.head.init(head_rng);

    nn::ParamRefs params;
    clf.head.collect(params);
    if (!cfg.freeze_backbone) clf.f.collect(params);
    nn::Sgd opt(params);

    Rng order_rng(mix_seed(cfg.seed, 0x6f726465ULL));
    std::vector<int> order(train.items.size());
    std::iota(order.begin(), order.end(), 0);

    const int n = static_cast<int>(train.items.size());
    for (int e = 0; e < cfg.epochs; ++e) {
        nn::SgdConfig sc = cfg.optimizer;
        sc.lr = nn::cosine_lr(cfg.optimizer.lr, e, cfg.epochs);
        order_rng.shuffle(order);
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, n - start);
            std::vector<Image> imgs;
            std::vector<int> batch_labels;
            imgs.reserve(b);
            batch_labels.reserve(b);
            for (int i = 0; i < b; ++i) {
                imgs.push_back(train.items[order[start + i]].image);
                batch_labels.push_back(labels[order[start + i]]);
            }
            nn::Tensor x = encoder::images_to_batch(imgs, clf.backbone_cfg);
            nn::Backbone::Trace tr;
            nn::Tensor feat = clf.f.forward(x, cfg.exec, cfg.freeze_backbone ? nullptr : &tr);
            nn::Tensor logits = clf.head.forward(feat, cfg.exec);
            CeResult ce = softmax_cross_entropy(logits, batch_labels);

            nn::zero_grads(params);
            nn::Tensor dfeat = clf.head.backward(feat, ce.dlogits, cfg.exec);
            if (!cfg.freeze_backbone) clf.f.backward(tr, dfeat, cfg.exec);
            opt.step(params, sc);
        }
    }
    return clf;
}

Metrics metrics_from_predictions(const std::vector<std::string>& classes,
                                 const std::vector<int>& true_idx, const std::vector<int>& pred_idx,
                                 const std::string& positive_class) {
    const int c = static_cast<int>(classes.size());
    if (c < 2) throw std::runtime_error("metrics need at least two classes");
    if (true_idx.size() != pred_idx.size())
        throw std::runtime_error("prediction and label counts differ");
    if (true_idx.empty()) throw std::runtime_error("metrics need at least one prediction");

    int pos_idx = c - 1;
    if (!positive_class.empty()) {
        auto it = std::find(classes.begin(), classes.end(), positive_class);
        if (it == classes.end())
            throw std::runtime_error("positive class '" + positive_class +
                                     "' is not in the class list");
        pos_idx = static_cast<int>(it - classes.begin());
    }

    Metrics m;
    m.classes = classes;
    m.confusion.assign(c, std::vector<std::int64_t>(c, 0));
    for (std::size_t i = 0; i < true_idx.size(); ++i) {
        if (true_idx[i] < 0 || true_idx[i] >= c || pred_idx[i] < 0 || pred_idx[i] >= c)
            throw std::runtime_error("class index out of range in predictions");
        ++m.confusion[true_idx[i]][pred_idx[i]];
    }
    m.total = static_cast<std::int64_t>(true_idx.size());

    std::int64_t correct = 0;
    for (int k = 0; k < c; ++k) correct += m.confusion[k][k];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);

    m.per_class_recall.resize(c);
    for (int k = 0; k < c; ++k) {
        std::int64_t row = 0;
        for (int j = 0; j < c; ++j) row += m.confusion[k][j];
        if (row > 0)
            m.per_class_recall[k] = static_cast<double>(m.confusion[k][k]) / static_cast<double>(row);
    }

    if (c == 2) {
        m.sensitivity = m.per_class_recall[pos_idx];
        m.specificity = m.per_class_recall[1 - pos_idx];
    }
    return m;
}

Metrics evaluate(const Classifier& clf, const dataset::LabeledImageSet& test,
                 const std::string& positive_class, kernels::Exec exec) {
    if (clf.classes != test.classes)
        throw std::runtime_error("classifier and test set disagree on the class list");
    if (test.items.empty()) throw std::runtime_error("cannot evaluate on an empty label set");

    const auto labels = label_indices(test);
    const int c = static_cast<int>(clf.classes.size());
    std::vector<int> preds;
    preds.reserve(test.items.size());

    const int chunk = 64;
    const int n = static_cast<int>(test.items.size());
    for (int start = 0; start < n; start += chunk) {
        const int b = std::min(chunk, n - start);
        std::vector<Image> imgs;
        imgs.reserve(b);
        for (int i = 0; i < b; ++i) imgs.push_back(test.items[start + i].image);
        nn::Tensor x = encoder::images_to_batch(imgs, clf.backbone_cfg);
        nn::Tensor feat = clf.f.forward(x, exec);
        nn::Tensor logits = clf.head.forward(feat, exec);
        for (int i = 0; i < b; ++i)
            preds.push_back(argmax_row(&logits.data[static_cast<std::size_t>(i) * c], c));
    }
    return metrics_from_predictions(clf.classes, labels, preds, positive_class);
}

CrossValidateResult cross_validate(const nn::Backbone& init, const dataset::LabeledImageSet& data,
                                   const FinetuneConfig& cfg, const std::string& positive_class) {
    if (cfg.folds < 2) throw std::runtime_error("cross-validation needs at least two folds");
    if (data.items.empty()) throw std::runtime_error("cannot cross-validate an empty label set");

    const auto labels = label_indices(data);
    const int c = static_cast<int>(data.classes.size());

    // Patients in lexicographic order so fold membership does not depend on
    // item order in the manifest.
    std::map<std::string, std::vector<int>> by_patient;
    for (std::size_t i = 0; i < data.items.size(); ++i)
        by_patient[data.items[i].patient_id].push_back(static_cast<int>(i));
    if (static_cast<int>(by_patient.size()) < cfg.folds)
        throw std::runtime_error("not enough patients (" + std::to_string(by_patient.size()) +
                                 ") for " + std::to_string(cfg.folds) + " folds");

    // Stratify by each patient's majority class, ties to the earlier class.
    std::vector<std::vector<std::string>> buckets(c);
    for (const auto& [pid, idxs] : by_patient) {
        std::vector<int> counts(c, 0);
        for (int i : idxs) ++counts[labels[i]];
        int best = 0;
        for (int k = 1; k < c; ++k)
            if (counts[k] > counts[best]) best = k;
        buckets[best].push_back(pid);
    }

    Rng fold_rng(mix_seed(cfg.seed, 0x666f6c64ULL));
    CrossValidateResult result;
    result.fold_patients.assign(cfg.folds, {});
    for (int k = 0; k < c; ++k) {
        fold_rng.shuffle(buckets[k]);
        for (std::size_t i = 0; i < buckets[k].size(); ++i)
            result.fold_patients[i % cfg.folds].push_back(buckets[k][i]);
    }
    for (auto& fp : result.fold_patients) std::sort(fp.begin(), fp.end());

    std::vector<double> accs;
    std::vector<double> sens, spec;
    for (int f = 0; f < cfg.folds; ++f) {
        dataset::LabeledImageSet train{data.classes, {}};
        dataset::LabeledImageSet test{data.classes, {}};
        const auto& held = result.fold_patients[f];
        for (std::size_t i = 0; i < data.items.size(); ++i) {
            bool held_out = std::binary_search(held.begin(), held.end(), data.items[i].patient_id);
            (held_out ? test : train).items.push_back(data.items[i]);
        }
        std::vector<int> train_counts(c, 0);
        for (const auto& item : train.items) {
            auto it = std::find(data.classes.begin(), data.classes.end(), item.label);
            ++train_counts[it - data.classes.begin()];
        }
        for (int k = 0; k < c; ++k)
            if (train_counts[k] == 0)
                throw std::runtime_error("class '" + data.classes[k] +
                                         "' has no training samples in fold " + std::to_string(f) +
                                         "; use fewer folds or more data");
        if (test.items.empty())
            throw std::runtime_error("fold " + std::to_string(f) + " has no test samples");

        Classifier clf = finetune(init, train, cfg);
        Metrics m = evaluate(clf, test, positive_class, cfg.exec);
        accs.push_back(m.accuracy);
        if (m.sensitivity) sens.push_back(*m.sensitivity);
        if (m.specificity) spec.push_back(*m.specificity);
        result.fold_metrics.push_back(std::move(m));
    }

    result.accuracy = aggregate_of(accs);
    if (!sens.empty()) result.sensitivity = aggregate_of(sens);
    if (!spec.empty()) result.specificity = aggregate_of(spec);
    return result;
}

std::string metrics_csv(const Metrics& m) {
    std::ostringstream os;
    os << "metric,value\n";
    os << "accuracy," << format_double(m.accuracy) << "\n";
    for (std::size_t k = 0; k < m.classes.size(); ++k)
        os << "recall_" << m.classes[k] << "," << opt_str(m.per_class_recall[k]) << "\n";
    if (m.classes.size() == 2) {
        os << "sensitivity," << opt_str(m.sensitivity) << "\n";
        os << "specificity," << opt_str(m.specificity) << "\n";
    }
    return os.str();
}

std::string results_csv(const CrossValidateResult& r) {
    std::ostringstream os;
    os << "fold,accuracy,sensitivity,specificity\n";
    for (std::size_t f = 0; f < r.fold_metrics.size(); ++f) {
        const auto& m = r.fold_metrics[f];
        os << f << "," << format_double(m.accuracy) << "," << opt_str(m.sensitivity) << ","
           << opt_str(m.specificity) << "\n";
    }
    os << "mean," << format_double(r.accuracy.mean) << ","
       << (r.sensitivity ? format_double(r.sensitivity->mean) : "undefined") << ","
       << (r.specificity ? format_double(r.specificity->mean) : "undefined") << "\n";
    os << "std," << format_double(r.accuracy.stddev) << ","
       << (r.sensitivity ? format_double(r.sensitivity->stddev) : "undefined") << ","
       << (r.specificity ? format_double(r.specificity->stddev) : "undefined") << "\n";
    return os.str();
}

std::string results_table(const CrossValidateResult& r) {
    std::ostringstream os;
    os << "fold   accuracy  sensitivity  specificity\n";
    char buf[128];
    for (std::size_t f = 0; f < r.fold_metrics.size(); ++f) {
        const auto& m = r.fold_metrics[f];
        std::snprintf(buf, sizeof buf, "%4zu  %9.6f  %s  %s\n", f, m.accuracy,
                      cell(m.sensitivity).c_str(), cell(m.specificity).c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "mean  %9.6f  %s  %s\n", r.accuracy.mean,
                  cell(r.sensitivity ? std::optional<double>(r.sensitivity->mean) : std::nullopt)
                      .c_str(),
                  cell(r.specificity ? std::optional<double>(r.specificity->mean) : std::nullopt)
                      .c_str());
    os << buf;
    std::snprintf(buf, sizeof buf, " std  %9.6f  %s  %s\n", r.accuracy.stddev,
                  cell(r.sensitivity ? std::optional<double>(r.sensitivity->stddev) : std::nullopt)
                      .c_str(),
                  cell(r.specificity ? std::optional<double>(r.specificity->stddev) : std::nullopt)
                      .c_str());
    os << buf;
    return os.str();
}

}  // namespace uvcl::downstream
