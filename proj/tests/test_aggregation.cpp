#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dovf/aggregation.hpp"
#include "dovf/errors.hpp"
#include "test_util.hpp"

using namespace dovf;
using doctest::Approx;

namespace {

const auto kToy = FeatureMatrix::from_rows({{1.f, 5.f}, {3.f, 2.f}, {2.f, 4.f}});

FeatureMatrix permuted(const FeatureMatrix& m, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(m.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    return m.select_rows(idx);
}

FeatureMatrix scaled(const FeatureMatrix& m, float a) {
    auto data = m.data();
    for (auto& x : data) x *= a;
    return {m.rows(), m.cols(), data};
}

}  // namespace

TEST_CASE("pooling on the worked example") {
    const auto mean = pool_mean(kToy);
    CHECK(mean[0] == Approx(2.0));
    CHECK(mean[1] == Approx(11.0 / 3.0));

    const auto mx = pool_max(kToy);
    CHECK(mx[0] == 3.0);
    CHECK(mx[1] == 5.0);

    const auto ms = pool_mean_std(kToy);
    REQUIRE(ms.size() == 4);
    CHECK(ms[0] == Approx(2.0));
    CHECK(ms[1] == Approx(11.0 / 3.0));
    CHECK(ms[2] == Approx(std::sqrt(2.0 / 3.0)));
    CHECK(ms[3] == Approx(std::sqrt(14.0 / 9.0)));
}

TEST_CASE("pooling degenerate inputs") {
    const auto one = FeatureMatrix::from_rows({{4.f, -1.f}});
    CHECK(pool_mean(one) == Vector(Eigen::Vector2d(4, -1)));
    CHECK(pool_max(one) == Vector(Eigen::Vector2d(4, -1)));
    const auto ms = pool_mean_std(one);
    CHECK(ms[2] == 0.0);
    CHECK(ms[3] == 0.0);

    const auto zeros = FeatureMatrix(3, 2, std::vector<float>(6, 0.f));
    CHECK(pool_mean(zeros).isZero());

    const auto constant = FeatureMatrix(4, 2, std::vector<float>(8, 2.5f));
    const auto cs = pool_mean_std(constant);
    CHECK(cs[0] == 2.5);
    CHECK(cs[2] == 0.0);

    CHECK_THROWS_AS(pool_mean(FeatureMatrix{}), ArgumentError);
    CHECK_THROWS_AS(pool_max(FeatureMatrix{}), ArgumentError);
    CHECK_THROWS_AS(pool_mean_std(FeatureMatrix{}), ArgumentError);
}

TEST_CASE("segment bounds") {
    CHECK(segment_bounds(25, 3) == std::vector<Span>{{0, 8}, {8, 9}, {17, 8}});
    CHECK(segment_bounds(9, 3) == std::vector<Span>{{0, 3}, {3, 3}, {6, 3}});
    CHECK(segment_bounds(5, 1) == std::vector<Span>{{0, 5}});
    CHECK(segment_bounds(26, 3) == std::vector<Span>{{0, 8}, {8, 10}, {18, 8}});
    CHECK_THROWS_AS(segment_bounds(2, 3), ArgumentError);
    CHECK_THROWS_AS(segment_bounds(2, 0), ArgumentError);

    for (std::size_t s = 1; s <= 8; ++s) {
        for (std::size_t n = s; n <= 60; ++n) {
            const auto spans = segment_bounds(n, s);
            REQUIRE(spans.size() == s);
            std::size_t at = 0;
            for (const auto& sp : spans) {
                REQUIRE(sp.start == at);
                REQUIRE(sp.length >= 1);
                at += sp.length;
            }
            REQUIRE(at == n);
            if (s >= 3) {
                CHECK(spans.front().length == n / s);
                CHECK(spans.back().length == n / s);
            }
        }
    }
}

TEST_CASE("segmented aggregation") {
    std::mt19937_64 rng(21);
    const auto seq = testutil::random_matrix(25, 4, rng);
    const auto out = aggregate_segmented(seq, 3, pool_max);
    REQUIRE(out.size() == 12);
    CHECK(out.segment(0, 4) == pool_max(seq.slice_rows(0, 8)));
    CHECK(out.segment(4, 4) == pool_max(seq.slice_rows(8, 9)));
    CHECK(out.segment(8, 4) == pool_max(seq.slice_rows(17, 8)));

    for (const Pooler& p : {Pooler(pool_mean), Pooler(pool_max), Pooler(pool_mean_std)}) {
        CHECK(aggregate_segmented(seq, 1, p) == p(seq));
    }

    const auto constant = FeatureMatrix(10, 2, std::vector<float>(20, 1.5f));
    for (const Pooler& p : {Pooler(pool_mean), Pooler(pool_max)}) {
        const auto v = aggregate_segmented(constant, 3, p);
        CHECK(v.size() == 6);
        CHECK((v.array() == 1.5).all());
    }
    CHECK_THROWS_AS(aggregate_segmented(seq.slice_rows(0, 2), 3, pool_max), ArgumentError);
}

TEST_CASE("pooling properties over random sequences") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<std::size_t> rows(1, 40);
    std::uniform_int_distribution<std::size_t> cols(1, 16);
    std::uniform_real_distribution<float> alpha(0.1f, 8.f);
    for (int trial = 0; trial < 200; ++trial) {
        const auto seq = testutil::random_matrix(rows(rng), cols(rng), rng);
        const auto perm = permuted(seq, rng);
        CHECK(pool_max(perm) == pool_max(seq));
        CHECK((pool_mean(perm) - pool_mean(seq)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((pool_mean_std(perm) - pool_mean_std(seq)).cwiseAbs().maxCoeff() < 1e-9);

        CHECK((pool_max(seq).array() >= pool_mean(seq).array() - 1e-12).all());

        // scale by a power of two so the float inputs scale exactly
        const float a = std::exp2(std::round(std::log2(alpha(rng))));
        const auto s = scaled(seq, a);
        CHECK((pool_max(s) - a * pool_max(seq)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((pool_mean(s) - a * pool_mean(seq)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((pool_mean_std(s) - a * pool_mean_std(seq)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("method names") {
    for (auto m : {AggregationMethod::mean, AggregationMethod::max, AggregationMethod::mean_std, AggregationMethod::bow,
                   AggregationMethod::vlad, AggregationMethod::fv}) {
        CHECK(parse_method(to_string(m)) == m);
    }
    CHECK(is_encoder(AggregationMethod::fv));
    CHECK_FALSE(is_encoder(AggregationMethod::mean_std));
    CHECK_THROWS_AS(parse_method("median"), ArgumentError);
}
