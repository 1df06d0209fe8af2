#include <cmath>

#include "doctest.h"
#include "support/helpers.hpp"
#include "uvcl/downstream.hpp"

using namespace uvcl;

namespace {

Image flat_image(int h, int w, double level) {
    auto im = Image::zeros(h, w);
    for (auto& p : im.px) p = level;
    return im;
}

// Two trivially separable classes: near-black vs near-white frames with a
// touch of per-pixel jitter so nothing degenerates to exact duplicates.
dataset::LabeledImageSet brightness_set(int per_patient, const std::vector<std::string>& patients,
                                        std::uint64_t seed) {
    dataset::LabeledImageSet set;
    set.classes = {"dim", "lit"};
    Rng rng(seed);
    for (const auto& p : patients)
        for (int i = 0; i < per_patient; ++i)
            for (int c = 0; c < 2; ++c) {
                dataset::LabeledImage item;
                item.image = flat_image(8, 8, c == 0 ? 0.15 : 0.85);
                for (auto& v : item.image.px) v += rng.uniform_real(-0.05, 0.05);
                item.label = set.classes[c];
                item.patient_id = p;
                set.items.push_back(std::move(item));
            }
    return set;
}

nn::BackboneConfig probe_backbone() {
    nn::BackboneConfig cfg;
    cfg.in_ch = 1;
    cfg.in_h = 8;
    cfg.in_w = 8;
    cfg.width = 2;
    cfg.blocks = 1;
    return cfg;
}

downstream::FinetuneConfig quick_cfg(int folds = 2) {
    downstream::FinetuneConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.optimizer.lr = 0.05;
    cfg.folds = folds;
    cfg.seed = 5;
    cfg.exec = kernels::Exec::Serial;
    return cfg;
}

// A classifier whose head ignores its input and always votes for one class.
downstream::Classifier rigged_classifier(const std::vector<std::string>& classes, int winner) {
    downstream::Classifier clf;
    clf.backbone_cfg = probe_backbone();
    clf.f = downstream::random_backbone(clf.backbone_cfg, 99);
    clf.classes = classes;
    clf.head = nn::Dense("head", clf.f.feature_dim(), static_cast<int>(classes.size()));
    clf.head.w.value = nn::Tensor::zeros({static_cast<int>(classes.size()), clf.f.feature_dim()});
    clf.head.b.value = nn::Tensor::zeros({static_cast<int>(classes.size())});
    clf.head.b.value.data[static_cast<std::size_t>(winner)] = 1.0;
    return clf;
}

}  // namespace

TEST_SUITE("downstream") {

TEST_CASE("binary metrics match a hand-computed confusion matrix") {
    std::vector<std::string> classes{"normal", "lesion"};
    std::vector<int> truth, pred;
    auto add = [&](int t, int p, int count) {
        for (int i = 0; i < count; ++i) {
            truth.push_back(t);
            pred.push_back(p);
        }
    };
    add(1, 1, 9);  // true positives
    add(1, 0, 1);  // false negatives
    add(0, 0, 8);  // true negatives
    add(0, 1, 2);  // false positives

    auto m = downstream::metrics_from_predictions(classes, truth, pred);
    CHECK(m.total == 20);
    CHECK(m.confusion[1][1] == 9);
    CHECK(m.confusion[1][0] == 1);
    CHECK(m.confusion[0][0] == 8);
    CHECK(m.confusion[0][1] == 2);
    CHECK(m.accuracy == doctest::Approx(0.85).epsilon(1e-15));
    REQUIRE(m.sensitivity.has_value());
    REQUIRE(m.specificity.has_value());
    CHECK(*m.sensitivity == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(*m.specificity == doctest::Approx(0.8).epsilon(1e-15));
    REQUIRE(m.per_class_recall.size() == 2);
    CHECK(*m.per_class_recall[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(*m.per_class_recall[1] == doctest::Approx(0.9).epsilon(1e-15));

    SUBCASE("naming the other class as positive swaps the two rates") {
        auto swapped = downstream::metrics_from_predictions(classes, truth, pred, "normal");
        CHECK(*swapped.sensitivity == doctest::Approx(0.8).epsilon(1e-15));
        CHECK(*swapped.specificity == doctest::Approx(0.9).epsilon(1e-15));
    }

    SUBCASE("an unknown positive class is rejected") {
        CHECK_THROWS_AS(downstream::metrics_from_predictions(classes, truth, pred, "cyst"),
                        std::runtime_error);
    }
}

TEST_CASE("rates with an empty denominator come back undefined, not zero") {
    std::vector<std::string> classes{"normal", "lesion"};
    // no lesion rows at all
    std::vector<int> truth{0, 0, 0};
    std::vector<int> pred{0, 1, 0};
    auto m = downstream::metrics_from_predictions(classes, truth, pred);
    CHECK_FALSE(m.sensitivity.has_value());
    REQUIRE(m.specificity.has_value());
    CHECK(*m.specificity == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(m.per_class_recall[1].has_value());
    CHECK(m.accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("three-class metrics report recalls but no sensitivity pair") {
    std::vector<std::string> classes{"a", "b", "c"};
    std::vector<int> truth{0, 0, 1, 1, 2, 2, 2};
    std::vector<int> pred{0, 1, 1, 1, 2, 0, 2};
    auto m = downstream::metrics_from_predictions(classes, truth, pred);
    CHECK(m.total == 7);
    CHECK(m.accuracy == doctest::Approx(5.0 / 7.0));
    CHECK(*m.per_class_recall[0] == doctest::Approx(0.5));
    CHECK(*m.per_class_recall[1] == doctest::Approx(1.0));
    CHECK(*m.per_class_recall[2] == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(m.sensitivity.has_value());
    CHECK_FALSE(m.specificity.has_value());
}

TEST_CASE("evaluate pipes images through the network into the same counting") {
    auto set = brightness_set(3, {"p1", "p2"}, 31);
    // always predicts class 1 ("lit"): every dim frame is a miss
    auto clf = rigged_classifier(set.classes, 1);
    auto m = downstream::evaluate(clf, set, "", kernels::Exec::Serial);
    CHECK(m.total == 12);
    CHECK(m.confusion[0][1] == 6);
    CHECK(m.confusion[1][1] == 6);
    CHECK(m.confusion[0][0] == 0);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(*m.sensitivity == doctest::Approx(1.0));
    CHECK(*m.specificity == doctest::Approx(0.0));
}

TEST_CASE("fine-tuning separates brightness classes to perfect train accuracy") {
    auto set = brightness_set(4, {"p1", "p2", "p3"}, 41);
    auto init = downstream::random_backbone(probe_backbone(), 7);
    auto clf = downstream::finetune(init, set, quick_cfg());
    auto m = downstream::evaluate(clf, set, "", kernels::Exec::Serial);
    CHECK(m.accuracy == doctest::Approx(1.0));

    SUBCASE("the head sees backbone features, so a frozen backbone still works here") {
        auto cfg = quick_cfg();
        cfg.freeze_backbone = true;
        // random features here are tiny, so the head alone needs a bigger budget
        cfg.epochs = 150;
        cfg.optimizer.lr = 0.2;
        auto probe = downstream::finetune(init, set, cfg);
        auto pm = downstream::evaluate(probe, set, "", kernels::Exec::Serial);
        // two random features per image leave a little class overlap
        CHECK(pm.accuracy >= 0.9);
        // frozen mode must leave the backbone untouched
        auto a = init;
        auto b = probe.f;
        nn::ParamRefs ap, bp;
        a.collect(ap);
        b.collect(bp);
        for (std::size_t i = 0; i < ap.size(); ++i) CHECK(ap[i]->value.data == bp[i]->value.data);
    }
}

TEST_CASE("cross-validation keeps every patient inside a single fold") {
    auto set = brightness_set(3, {"p1", "p2", "p3", "p4", "p5", "p6"}, 51);
    auto init = downstream::random_backbone(probe_backbone(), 7);
    auto cfg = quick_cfg(3);
    cfg.epochs = 4;
    auto res = downstream::cross_validate(init, set, cfg);

    REQUIRE(res.fold_metrics.size() == 3);
    REQUIRE(res.fold_patients.size() == 3);

    // folds partition the patient set
    std::vector<std::string> seen;
    for (const auto& fold : res.fold_patients) seen.insert(seen.end(), fold.begin(), fold.end());
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<std::string>{"p1", "p2", "p3", "p4", "p5", "p6"});

    // each fold's evaluation count equals the item count of its own patients
    for (std::size_t f = 0; f < res.fold_patients.size(); ++f) {
        std::int64_t expect = 0;
        for (const auto& item : set.items)
            for (const auto& p : res.fold_patients[f])
                if (item.patient_id == p) ++expect;
        CHECK(res.fold_metrics[f].total == expect);
    }

    CHECK(res.accuracy.folds == 3);
    CHECK(res.accuracy.mean >= 0.0);
    CHECK(res.accuracy.mean <= 1.0);

    SUBCASE("the aggregate csv is reproducible byte for byte") {
        auto res2 = downstream::cross_validate(init, set, cfg);
        CHECK(downstream::results_csv(res) == downstream::results_csv(res2));
        for (std::size_t f = 0; f < 3; ++f) CHECK(res.fold_patients[f] == res2.fold_patients[f]);
    }
}

TEST_CASE("a training split missing a class is an error, not a silent skip") {
    // two single-class patients: any 2-fold split leaves one class out of training
    dataset::LabeledImageSet set;
    set.classes = {"dim", "lit"};
    for (int i = 0; i < 4; ++i) {
        dataset::LabeledImage a;
        a.image = flat_image(8, 8, 0.2);
        a.label = "dim";
        a.patient_id = "only_dim";
        set.items.push_back(std::move(a));
        dataset::LabeledImage b;
        b.image = flat_image(8, 8, 0.8);
        b.label = "lit";
        b.patient_id = "only_lit";
        set.items.push_back(std::move(b));
    }
    auto init = downstream::random_backbone(probe_backbone(), 7);
    CHECK_THROWS_WITH_AS(downstream::cross_validate(init, set, quick_cfg(2)),
                         doctest::Contains("no training samples"), std::runtime_error);
}

TEST_CASE("more folds than patients is rejected") {
    auto set = brightness_set(2, {"p1", "p2"}, 61);
    auto init = downstream::random_backbone(probe_backbone(), 7);
    CHECK_THROWS_AS(downstream::cross_validate(init, set, quick_cfg(5)), std::runtime_error);
}

TEST_CASE("metrics csv spells out undefined entries") {
    std::vector<std::string> classes{"normal", "lesion"};
    std::vector<int> truth{0, 0};
    std::vector<int> pred{0, 0};
    auto m = downstream::metrics_from_predictions(classes, truth, pred);
    auto csv = downstream::metrics_csv(m);
    CHECK(csv.find("undefined") != std::string::npos);
    CHECK(csv.find("accuracy") != std::string::npos);
}

}  // TEST_SUITE
