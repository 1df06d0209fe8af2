#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "support/stats.hpp"
#include "uvcl/core.hpp"

using uvcl::Rng;

TEST_SUITE("core") {

TEST_CASE("same seed gives the same stream, different seeds differ") {
    Rng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
        all_equal = all_equal && (x == y);
        any_diff = any_diff || (x != z);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("serialize and restore continue the stream exactly") {
    Rng a(7);
    for (int i = 0; i < 37; ++i) a.next_u64();
    std::string state = a.serialize();
    std::vector<std::uint64_t> expected;
    for (int i = 0; i < 50; ++i) expected.push_back(a.next_u64());

    Rng b(0);
    b.deserialize(state);
    for (int i = 0; i < 50; ++i) CHECK(b.next_u64() == expected[i]);
}

TEST_CASE("uniform_int stays in bounds and reaches every value") {
    Rng rng(5);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        auto v = rng.uniform_int(3, 9);
        REQUIRE(v >= 3);
        REQUIRE(v <= 9);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK(rng.uniform_int(4, 4) == 4);
}

TEST_CASE("uniform_real lies in [0,1) and the range overload respects bounds") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        double u = rng.uniform_real();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        double r = rng.uniform_real(2.5, 3.5);
        REQUIRE(r >= 2.5);
        REQUIRE(r < 3.5);
    }
}

TEST_CASE("normal draws have roughly the right moments") {
    Rng rng(13);
    const int n = 20000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
    double y = rng.normal(10.0, 0.0);
    CHECK(y == 10.0);
}

TEST_CASE("shuffle permutes without losing elements") {
    Rng rng(21);
    std::vector<int> v(40);
    for (int i = 0; i < 40; ++i) v[i] = i;
    auto orig = v;
    rng.shuffle(v);
    CHECK(v != orig);  // 40! permutations; identity is effectively impossible
    std::sort(v.begin(), v.end());
    CHECK(v == orig);
}

TEST_CASE("mix_seed separates streams") {
    CHECK(uvcl::mix_seed(1, 0) != uvcl::mix_seed(1, 1));
    CHECK(uvcl::mix_seed(1, 0) != uvcl::mix_seed(2, 0));
    CHECK(uvcl::mix_seed(42, 7) == uvcl::mix_seed(42, 7));
}

TEST_CASE("fnv1a64 matches the reference constants") {
    CHECK(uvcl::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(uvcl::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("format_double survives a round trip") {
    double vals[] = {0.1, 1.0 / 3.0, 1e-300, 12345.6789, -0.0};
    for (double v : vals) CHECK(std::stod(uvcl::format_double(v)) == v);
}

TEST_CASE("chi-square helper reproduces table values") {
    // Classic 5% critical points.
    CHECK(teststats::chi_square_p_value(3.841459, 1) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(teststats::chi_square_p_value(18.307038, 10) == doctest::Approx(0.05).epsilon(0.01));
    CHECK(teststats::chi_square_p_value(0.0, 5) == doctest::Approx(1.0));
}

}  // TEST_SUITE
