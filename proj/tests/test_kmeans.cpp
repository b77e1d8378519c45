#include <doctest.h>

#include <cmath>
#include <limits>

#include "metric_refs.hpp"
#include "slac/error.hpp"
#include "slac/kmeans.hpp"

using namespace slac;
using namespace slac::cluster;
using metric_refs::brute_force_two_means;

TEST_CASE("two well-separated 1-D pairs split exactly") {
    std::vector<std::vector<double>> points = {{0.0}, {0.1}, {10.0}, {10.1}};
    Rng rng(1);
    auto model = kmeans(points, 2, 10, rng);
    CHECK(model.assignment[0] == model.assignment[1]);
    CHECK(model.assignment[2] == model.assignment[3]);
    CHECK(model.assignment[0] != model.assignment[2]);
    const double lo = std::min(model.centroids[0][0], model.centroids[1][0]);
    const double hi = std::max(model.centroids[0][0], model.centroids[1][0]);
    CHECK(lo == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(hi == doctest::Approx(10.05).epsilon(1e-12));
    CHECK(model.inertia == doctest::Approx(0.0025).epsilon(1e-12));
    CHECK(model.inertia == doctest::Approx(brute_force_two_means(points)).epsilon(1e-12));
}

TEST_CASE("k=1 returns the mean") {
    std::vector<std::vector<double>> points = {{1.0, 2.0}, {3.0, 4.0}, {5.0, 0.0}};
    Rng rng(2);
    auto model = kmeans(points, 1, 3, rng);
    CHECK(model.centroids[0][0] == doctest::Approx(3.0));
    CHECK(model.centroids[0][1] == doctest::Approx(2.0));
}

TEST_CASE("N = k gives singletons with zero inertia") {
    std::vector<std::vector<double>> points = {{0.0}, {5.0}, {9.0}};
    Rng rng(3);
    auto model = kmeans(points, 3, 5, rng);
    CHECK(model.inertia == 0.0);
    std::vector<bool> used(3, false);
    for (std::size_t a : model.assignment) used[a] = true;
    for (bool u : used) CHECK(u);
}

TEST_CASE("N < k is an error") {
    std::vector<std::vector<double>> points = {{0.0}, {1.0}};
    Rng rng(4);
    CHECK_THROWS_AS(kmeans(points, 3, 1, rng), PreconditionError);
}

TEST_CASE("micro-scale optimality against brute force") {
    Rng gen(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 4 + gen.uniform_int(5);  // 4..8
        const std::size_t d = 1 + gen.uniform_int(3);  // 1..3
        std::vector<std::vector<double>> points(n, std::vector<double>(d));
        for (auto& p : points)
            for (double& v : p) v = gen.uniform(-3.0, 3.0);
        Rng rng(1000 + trial);
        auto model = kmeans(points, 2, 20, rng);
        const double optimum = brute_force_two_means(points);
        CHECK(model.inertia <= optimum + 1e-9);
        CHECK(model.inertia == doctest::Approx(inertia_of(points, model)).epsilon(1e-9));
    }
}

TEST_CASE("identical points terminate with every cluster non-empty") {
    std::vector<std::vector<double>> points(5, {2.0, 2.0});
    Rng rng(9);
    auto model = kmeans(points, 2, 3, rng);
    CHECK(model.inertia == 0.0);
    std::vector<std::size_t> sizes(2, 0);
    for (std::size_t a : model.assignment) ++sizes[a];
    CHECK(sizes[0] > 0);
    CHECK(sizes[1] > 0);
}

TEST_CASE("same seed reproduces the same model") {
    Rng gen(5);
    std::vector<std::vector<double>> points(30, std::vector<double>(4));
    for (auto& p : points)
        for (double& v : p) v = gen.uniform(-1.0, 1.0);
    Rng r1(42), r2(42);
    auto a = kmeans(points, 3, 10, r1);
    auto b = kmeans(points, 3, 10, r2);
    CHECK(a.assignment == b.assignment);
    CHECK(a.inertia == b.inertia);
    CHECK(a.centroids == b.centroids);
}
