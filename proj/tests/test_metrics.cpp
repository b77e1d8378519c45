#include <doctest.h>

#include <cmath>
#include <limits>

#include "metric_refs.hpp"
#include "slac/error.hpp"
#include "slac/metrics.hpp"
#include "slac/rng.hpp"

using namespace slac;
using namespace slac::metrics;

namespace {

using metric_refs::chi_square_tail;

double ref_silhouette(const Points& p, const Labels& l) { return metric_refs::silhouette(p, l); }
double ref_dunn(const Points& p, const Labels& l) { return metric_refs::dunn(p, l); }
double ref_davies_bouldin(const Points& p, const Labels& l) {
    return metric_refs::davies_bouldin(p, l);
}
double ref_calinski_harabasz(const Points& p, const Labels& l) {
    return metric_refs::calinski_harabasz(p, l);
}
double simpson_chi_square_tail(double x, std::size_t df) { return chi_square_tail(x, df); }

Points fixture_points() { return {{0.0}, {0.1}, {10.0}, {10.1}}; }
Labels fixture_labels() { return {0, 0, 1, 1}; }

}  // namespace

TEST_CASE("silhouette on the two-pair fixture") {
    const double s = silhouette(fixture_points(), fixture_labels());
    // point 0: a = 0.1, b = 10.05, s = 9.95/10.05; symmetric partners
    const double expected = (9.95 / 10.05 + 9.85 / 9.95) / 2.0;
    CHECK(s == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
    CHECK(s == doctest::Approx(ref_silhouette(fixture_points(), fixture_labels())).epsilon(1e-12));
}

TEST_CASE("identical points in one cluster score 1 when separated from the rest") {
    Points pts = {{0.0}, {0.0}, {5.0}};
    Labels lab = {0, 0, 1};
    // a = 0 for the duplicates, b > 0, so s = 1; the singleton scores 0
    CHECK(silhouette(pts, lab) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("silhouette requires at least two clusters") {
    CHECK_THROWS_AS(silhouette({{0.0}, {1.0}}, {0, 0}), PreconditionError);
}

TEST_CASE("dunn on the two-pair fixture is 99") {
    CHECK(dunn(fixture_points(), fixture_labels()) == doctest::Approx(99.0).epsilon(1e-12));
}

TEST_CASE("dunn is scale invariant") {
    Rng rng(5);
    Points pts(12, std::vector<double>(3));
    for (auto& p : pts)
        for (double& v : p) v = rng.uniform(-2.0, 2.0);
    Labels lab(12);
    for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = i % 3;
    const double base = dunn(pts, lab);
    Points scaled = pts;
    for (auto& p : scaled)
        for (double& v : p) v *= 7.3;
    CHECK(dunn(scaled, lab) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("dunn with zero diameter everywhere is an error") {
    Points pts = {{0.0}, {1.0}};
    Labels lab = {0, 1};
    CHECK_THROWS_AS(dunn(pts, lab), PreconditionError);
}

TEST_CASE("davies-bouldin on the two-pair fixture is 0.01") {
    CHECK(davies_bouldin(fixture_points(), fixture_labels()) ==
          doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("two singleton clusters give DB = 0") {
    CHECK(davies_bouldin({{0.0}, {4.0}}, {0, 1}) == 0.0);
}

TEST_CASE("coincident centroids are an error for DB") {
    Points pts = {{0.0}, {2.0}, {1.0 - 1.0}, {2.0}};
    Labels lab = {0, 0, 1, 1};
    CHECK_THROWS_AS(davies_bouldin(pts, lab), PreconditionError);
}

TEST_CASE("calinski-harabasz on the two-pair fixture is 20000") {
    CHECK(calinski_harabasz(fixture_points(), fixture_labels()) ==
          doctest::Approx(20000.0).epsilon(1e-12));
}

TEST_CASE("calinski-harabasz is translation invariant") {
    Rng rng(6);
    Points pts(15, std::vector<double>(2));
    for (auto& p : pts)
        for (double& v : p) v = rng.uniform(-2.0, 2.0);
    Labels lab(15);
    for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = i % 3;
    const double base = calinski_harabasz(pts, lab);
    for (auto& p : pts) {
        p[0] += 100.0;
        p[1] -= 42.0;
    }
    CHECK(calinski_harabasz(pts, lab) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("zero within-cluster scatter is an error for CH") {
    Points pts = {{0.0}, {0.0}, {5.0}};
    Labels lab = {0, 0, 1};
    CHECK_THROWS_AS(calinski_harabasz(pts, lab), PreconditionError);
}

TEST_CASE("silhouette and dunn are invariant under a global isometry") {
    Rng rng(8);
    Points pts(20, std::vector<double>(2));
    for (auto& p : pts)
        for (double& v : p) v = rng.uniform(-3.0, 3.0);
    Labels lab(20);
    for (std::size_t i = 0; i < lab.size(); ++i) lab[i] = i % 4;
    const double s0 = silhouette(pts, lab);
    const double d0 = dunn(pts, lab);
    const double db0 = davies_bouldin(pts, lab);
    const double ch0 = calinski_harabasz(pts, lab);
    const double theta = 0.83;
    Points moved = pts;
    for (auto& p : moved) {
        const double x = p[0], y = p[1];
        p[0] = std::cos(theta) * x - std::sin(theta) * y + 12.0;
        p[1] = std::sin(theta) * x + std::cos(theta) * y - 5.0;
    }
    CHECK(silhouette(moved, lab) == doctest::Approx(s0).epsilon(1e-9));
    CHECK(dunn(moved, lab) == doctest::Approx(d0).epsilon(1e-9));
    CHECK(davies_bouldin(moved, lab) == doctest::Approx(db0).epsilon(1e-9));
    CHECK(calinski_harabasz(moved, lab) == doctest::Approx(ch0).epsilon(1e-9));
}

TEST_CASE("all four indices match the nested-loop references on random instances") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.uniform_int(3);       // 2..4
        const std::size_t n = k + 2 + rng.uniform_int(58);  // up to 60ish
        const std::size_t d = 1 + rng.uniform_int(5);
        Points pts(n, std::vector<double>(d));
        for (auto& p : pts)
            for (double& v : p) v = rng.uniform(-5.0, 5.0);
        Labels lab(n);
        for (std::size_t i = 0; i < k; ++i) lab[i] = i;  // every cluster non-empty
        for (std::size_t i = k; i < n; ++i) lab[i] = rng.uniform_int(k);

        CHECK(silhouette(pts, lab) == doctest::Approx(ref_silhouette(pts, lab)).epsilon(1e-9));
        CHECK(dunn(pts, lab) == doctest::Approx(ref_dunn(pts, lab)).epsilon(1e-9));
        CHECK(davies_bouldin(pts, lab) ==
              doctest::Approx(ref_davies_bouldin(pts, lab)).epsilon(1e-9));
        CHECK(calinski_harabasz(pts, lab) ==
              doctest::Approx(ref_calinski_harabasz(pts, lab)).epsilon(1e-9));
    }
}

TEST_CASE("kruskal-wallis hand example: [1,2,3] vs [4,5,6]") {
    auto res = kruskal_wallis({{1, 2, 3}, {4, 5, 6}});
    CHECK(res.h == doctest::Approx(27.0 / 7.0).epsilon(1e-12));  // 3.857142857...
    CHECK(res.degrees_of_freedom == 1);
    CHECK(res.tie_correction == 1.0);
    CHECK(res.p_value == doctest::Approx(simpson_chi_square_tail(27.0 / 7.0, 1)).epsilon(1e-6));
}

TEST_CASE("identical groups give H = 0, p = 1") {
    auto res = kruskal_wallis({{1, 2, 3}, {1, 2, 3}});
    CHECK(res.h == 0.0);
    CHECK(res.p_value == 1.0);
}

TEST_CASE("all values identical across groups is not an error") {
    auto res = kruskal_wallis({{5, 5, 5}, {5, 5}});
    CHECK(res.h == 0.0);
    CHECK(res.p_value == 1.0);
    CHECK(res.tie_correction == 1.0);
}

TEST_CASE("kruskal-wallis is invariant under strictly monotone transforms") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::vector<double>> groups(3);
        for (auto& g : groups) {
            const std::size_t m = 3 + rng.uniform_int(6);
            for (std::size_t i = 0; i < m; ++i) g.push_back(rng.uniform(0.1, 4.0));
        }
        auto base = kruskal_wallis(groups);
        auto transformed = groups;
        for (auto& g : transformed)
            for (double& v : g) v = std::exp(v);
        auto res = kruskal_wallis(transformed);
        CHECK(res.h == base.h);
        CHECK(res.p_value == base.p_value);
    }
}

TEST_CASE("chi-square tail matches the quadrature oracle") {
    for (std::size_t df = 1; df <= 6; ++df) {
        CHECK(chi_square_upper_tail(0.0, df) == 1.0);
        for (double x = 0.5; x <= 30.0; x += 1.7) {
            const double mine = chi_square_upper_tail(x, df);
            const double oracle = simpson_chi_square_tail(x, df);
            CHECK(std::fabs(mine - oracle) < 1e-6);
        }
    }
}

TEST_CASE("p decreases as H grows at fixed df") {
    for (std::size_t df = 1; df <= 4; ++df) {
        double prev = 1.0;
        for (double x = 0.5; x <= 25.0; x += 0.5) {
            const double p = chi_square_upper_tail(x, df);
            CHECK(p < prev);
            prev = p;
        }
    }
}

TEST_CASE("k_sweep tabulates one row per k, reproducibly") {
    Rng rng(21);
    Points pts;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 12; ++i)
            pts.push_back({5.0 * c + rng.uniform(-0.4, 0.4), 3.0 * c + rng.uniform(-0.4, 0.4)});
    auto a = k_sweep(pts, {3, 4, 5}, 5, 11);
    auto b = k_sweep(pts, {3, 4, 5}, 5, 11);
    REQUIRE(a.rows.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.rows[i].k == 3 + i);
        CHECK(a.rows[i].silhouette == b.rows[i].silhouette);
        CHECK(a.rows[i].calinski_harabasz == b.rows[i].calinski_harabasz);
    }
    // three clean blobs: k=3 should win everything
    CHECK(a.best_silhouette_k == 3);
    CHECK(a.best_davies_bouldin_k == 3);
}

TEST_CASE("k_sweep rejects k >= N") {
    Points pts = {{0.0}, {1.0}, {2.0}};
    CHECK_THROWS_AS(k_sweep(pts, {3}, 2, 1), PreconditionError);
}
