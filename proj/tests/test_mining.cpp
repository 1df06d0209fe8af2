#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "uvcl/core.hpp"
#include "uvcl/mining.hpp"

using namespace uvcl;
using mining::NegativeQueue;

namespace {

std::vector<double> unit2(double x, double y) {
    double n = std::sqrt(x * x + y * y);
    return {x / n, y / n};
}

std::vector<double> random_unit(int dim, Rng& rng) {
    std::vector<double> v(dim);
    double n = 0;
    for (double& x : v) {
        x = rng.normal();
        n += x * x;
    }
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

}  // namespace

TEST_SUITE("mining") {

TEST_CASE("queue is FIFO and bounded by its capacity") {
    NegativeQueue q(3);
    q.enqueue({1, 0}, "a");
    q.enqueue({0, 1}, "b");
    q.enqueue({-1, 0}, "c");
    CHECK(q.size() == 3);
    q.enqueue({0, -1}, "d");  // evicts the oldest
    CHECK(q.size() == 3);
    CHECK(q.entries()[0].video_id == "b");
    CHECK(q.entries()[2].video_id == "d");
    // insert ids keep counting across evictions
    CHECK(q.entries()[2].insert_id == 3);
}

TEST_CASE("entries must be unit norm and consistently sized") {
    NegativeQueue q(4);
    q.enqueue({1, 0}, "a");
    CHECK_THROWS_AS(q.enqueue({0.5, 0}, "a"), std::exception);
    CHECK_THROWS_AS(q.enqueue({1, 0, 0}, "a"), std::exception);
    CHECK_THROWS_AS(q.enqueue({0, 1}, ""), std::exception);
    CHECK_THROWS_AS(NegativeQueue(0), std::exception);
}

TEST_CASE("warm-up needs half the capacity or the mining width") {
    NegativeQueue q(8);
    for (int i = 0; i < 3; ++i) q.enqueue({1, 0}, "v" + std::to_string(i));
    CHECK_FALSE(q.warmed_up(3));  // 3 < max(3, 4)
    q.enqueue({1, 0}, "v3");
    CHECK(q.warmed_up(3));
    CHECK_FALSE(q.warmed_up(6));  // top_n dominates
}

TEST_CASE("eligibility filters the anchor's own video, keeping order") {
    NegativeQueue q(8);
    q.enqueue({1, 0}, "a");
    q.enqueue({0, 1}, "b");
    q.enqueue({-1, 0}, "a");
    q.enqueue({0, -1}, "c");
    auto keep_all = q.eligible("");
    CHECK(keep_all.size() == 4);
    auto no_a = q.eligible("a");
    REQUIRE(no_a.size() == 2);
    CHECK(no_a[0]->video_id == "b");
    CHECK(no_a[1]->video_id == "c");
}

TEST_CASE("alpha weights are a softmax over scaled similarities") {
    NegativeQueue q(4);
    std::vector<double> query = {1, 0};
    q.enqueue(unit2(0.9, std::sqrt(1 - 0.81)), "a");  // cosine 0.9
    q.enqueue(unit2(0.1, std::sqrt(1 - 0.01)), "b");  // cosine 0.1
    auto w = mining::alpha_weights(query, q, 0.07);
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(0.99998911997815421).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.0880021845800031e-05).epsilon(1e-9));
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("temperature rescales the weights but not their ranking") {
    Rng rng(44);
    NegativeQueue q(16);
    std::vector<double> query = random_unit(8, rng);
    for (int i = 0; i < 10; ++i) q.enqueue(random_unit(8, rng), "v" + std::to_string(i));

    auto rank_of_max = [](const std::vector<double>& w) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (w[i] > w[best]) best = i;
        return best;
    };
    auto w1 = mining::alpha_weights(query, q, 0.07);
    auto w2 = mining::alpha_weights(query, q, 1.0);
    auto w3 = mining::alpha_weights(query, q, 10.0);
    CHECK(rank_of_max(w1) == rank_of_max(w2));
    CHECK(rank_of_max(w2) == rank_of_max(w3));
}

TEST_CASE("the synthesized negative never exceeds unit norm") {
    Rng rng(91);
    for (int trial = 0; trial < 30; ++trial) {
        NegativeQueue q(24);
        int n = 5 + static_cast<int>(rng.uniform_int(0, 15));
        for (int i = 0; i < n; ++i) q.enqueue(random_unit(16, rng), "v" + std::to_string(i));
        auto query = random_unit(16, rng);
        auto hn = mining::hard_negative_aggregate(query, q, 4, 0.07, "");
        double norm = 0;
        for (double x : hn.z_hat) norm += x * x;
        CHECK(std::sqrt(norm) <= 1.0 + 1e-12);
        CHECK(hn.entry_ids.size() == 4);
        CHECK(hn.alphas.size() == 4);
        // hardest first
        for (std::size_t i = 1; i < hn.alphas.size(); ++i) CHECK(hn.alphas[i - 1] >= hn.alphas[i]);
    }
}

TEST_CASE("identical entries blend to their weighted mean and tie-break by age") {
    NegativeQueue q(8);
    std::vector<double> z = {0, 1};
    for (int i = 0; i < 5; ++i) q.enqueue(z, "v" + std::to_string(i));
    auto hn = mining::hard_negative_aggregate({1, 0}, q, 5, 0.07, "");
    // five equal weights of 1/5 summing over identical vectors: the blend is z
    CHECK(hn.z_hat[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(hn.z_hat[1] == doctest::Approx(1.0).epsilon(1e-12));
    // equal weights resolve by insertion order, oldest first
    for (std::size_t i = 0; i < hn.entry_ids.size(); ++i) CHECK(hn.entry_ids[i] == i);

    // selecting fewer than all shrinks the norm below 1
    auto hn3 = mining::hard_negative_aggregate({1, 0}, q, 3, 0.07, "");
    double norm = std::sqrt(hn3.z_hat[0] * hn3.z_hat[0] + hn3.z_hat[1] * hn3.z_hat[1]);
    CHECK(norm == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("mining refuses impossible requests") {
    NegativeQueue q(8);
    CHECK_THROWS_AS(mining::hard_negative_aggregate({1, 0}, q, 1, 0.07, ""), std::exception);

    q.enqueue({0, 1}, "a");
    q.enqueue({1, 0}, "a");
    CHECK_THROWS_AS(mining::hard_negative_aggregate({1, 0}, q, 1, 0.07, "a"), std::exception);
    CHECK_THROWS_AS(mining::hard_negative_aggregate({1, 0}, q, 3, 0.07, ""), std::exception);
    CHECK_THROWS_AS(mining::hard_negative_aggregate({1, 0}, q, 0, 0.07, ""), std::exception);
    CHECK_THROWS_AS(mining::alpha_weights({0, 0}, q, 0.07), std::exception);
    CHECK_THROWS_AS(mining::alpha_weights({1, 0}, q, 0.0), std::exception);
}

TEST_CASE("save and load round-trip the queue exactly") {
    Rng rng(7);
    NegativeQueue q(6);
    for (int i = 0; i < 9; ++i) q.enqueue(random_unit(4, rng), "v" + std::to_string(i % 3));

    std::stringstream ss;
    q.save(ss);
    NegativeQueue r = NegativeQueue::load(ss);

    REQUIRE(r.size() == q.size());
    CHECK(r.capacity() == q.capacity());
    for (std::size_t i = 0; i < q.size(); ++i) {
        CHECK(r.entries()[i].z == q.entries()[i].z);
        CHECK(r.entries()[i].video_id == q.entries()[i].video_id);
        CHECK(r.entries()[i].insert_id == q.entries()[i].insert_id);
    }
    // insertion counter continues where it left off
    r.enqueue(random_unit(4, rng), "w");
    CHECK(r.entries().back().insert_id == 9);
}

}  // TEST_SUITE
