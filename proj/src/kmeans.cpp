#include "slac/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slac/error.hpp"

namespace slac::cluster {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double inertia_of(const std::vector<std::vector<double>>& points, const ClusterModel& model) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        total += squared_distance(points[i], model.centroids[model.assignment[i]]);
    return total / static_cast<double>(points.size());
}

namespace {

constexpr std::size_t kMaxLloydIterations = 300;

// k-means++ seeding. Greedy mode draws several D^2-weighted candidates per
// step and keeps the one with the lowest resulting potential; plain mode is
// classic single-draw D^2 sampling, which keeps restart diversity high.
std::vector<std::vector<double>> seed_plus_plus(const std::vector<std::vector<double>>& points,
                                                std::size_t k, Rng& rng, bool greedy) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    std::vector<bool> used(n, false);

    std::size_t first = static_cast<std::size_t>(rng.uniform_int(n));
    centroids.push_back(points[first]);
    used[first] = true;

    const std::size_t n_candidates =
        greedy ? 2 + static_cast<std::size_t>(std::log2(static_cast<double>(k) + 1.0)) : 1;
    std::vector<double> dist2(n);
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, squared_distance(points[i], c));
            dist2[i] = best;
            total += best;
        }
        std::size_t chosen = n;
        if (total > 0.0) {
            double best_potential = std::numeric_limits<double>::infinity();
            for (std::size_t cand = 0; cand < n_candidates; ++cand) {
                double r = rng.uniform() * total;
                double acc = 0.0;
                std::size_t pick = n - 1;  // float roundoff lands on the right edge
                for (std::size_t i = 0; i < n; ++i) {
                    acc += dist2[i];
                    if (r < acc) {
                        pick = i;
                        break;
                    }
                }
                double potential = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    potential += std::min(dist2[i], squared_distance(points[i], points[pick]));
                if (potential < best_potential) {
                    best_potential = potential;
                    chosen = pick;
                }
            }
        } else {
            // All remaining mass is zero (duplicate points): fall back to the
            // first unused index so k distinct seeds still come out.
            for (std::size_t i = 0; i < n; ++i) {
                if (!used[i]) {
                    chosen = i;
                    break;
                }
            }
            if (chosen == n) chosen = static_cast<std::size_t>(rng.uniform_int(n));
        }
        used[chosen] = true;
        centroids.push_back(points[chosen]);
    }
    return centroids;
}

// Hartigan-style polish: single-point moves with exact size-corrected
// objective deltas, applied until no move improves. Escapes Lloyd fixpoints
// that are not single-move stable (the optimum always is).
bool refine_single_moves(const std::vector<std::vector<double>>& points, ClusterModel& model) {
    const std::size_t n = points.size();
    const std::size_t k = model.k;
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : model.assignment) ++sizes[a];

    bool any_move = false;
    const std::size_t max_passes = 100;
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        bool improved = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t from = model.assignment[i];
            if (sizes[from] <= 1) continue;
            const double a = static_cast<double>(sizes[from]);
            const double cost_out =
                a / (a - 1.0) * squared_distance(points[i], model.centroids[from]);
            double best_delta = -1e-12;
            std::size_t best_to = from;
            for (std::size_t to = 0; to < k; ++to) {
                if (to == from) continue;
                const double b = static_cast<double>(sizes[to]);
                const double delta =
                    b / (b + 1.0) * squared_distance(points[i], model.centroids[to]) - cost_out;
                if (delta < best_delta) {
                    best_delta = delta;
                    best_to = to;
                }
            }
            if (best_to == from) continue;
            const double a_new = a - 1.0;
            const double b_old = static_cast<double>(sizes[best_to]);
            for (std::size_t j = 0; j < points[i].size(); ++j) {
                model.centroids[from][j] =
                    (model.centroids[from][j] * a - points[i][j]) / a_new;
                model.centroids[best_to][j] =
                    (model.centroids[best_to][j] * b_old + points[i][j]) / (b_old + 1.0);
            }
            --sizes[from];
            ++sizes[best_to];
            model.assignment[i] = best_to;
            improved = true;
            any_move = true;
        }
        if (!improved) break;
    }
    return any_move;
}

// One run of Lloyd iterations from the model's current centroids to an
// assignment fixpoint (cap 300 passes), with empty-cluster repair and the
// monotonicity invariant checked on every pass.
void lloyd_to_fixpoint(const std::vector<std::vector<double>>& points, ClusterModel& model,
                       double& prev_objective) {
    const std::size_t n = points.size();
    const std::size_t k = model.k;
    std::vector<std::size_t> prev_assignment;

    for (std::size_t iter = 0; iter < kMaxLloydIterations; ++iter) {
        // Assign: nearest centroid, ties to the lowest index.
        for (std::size_t i = 0; i < n; ++i) {
            double best = squared_distance(points[i], model.centroids[0]);
            std::size_t best_c = 0;
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squared_distance(points[i], model.centroids[c]);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            model.assignment[i] = best_c;
        }

        // Repair empty clusters: reseed on the point farthest from its centroid.
        std::vector<std::size_t> sizes(k, 0);
        for (std::size_t a : model.assignment) ++sizes[a];
        std::vector<bool> moved(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] > 0) continue;
            double worst = -1.0;
            std::size_t worst_i = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (moved[i]) continue;
                if (sizes[model.assignment[i]] <= 1) continue;  // keep donors non-empty
                const double d = squared_distance(points[i], model.centroids[model.assignment[i]]);
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            if (worst_i == n) throw PreconditionError("kmeans: cannot repair empty cluster");
            --sizes[model.assignment[worst_i]];
            model.assignment[worst_i] = c;
            sizes[c] = 1;
            moved[worst_i] = true;
            model.centroids[c] = points[worst_i];
        }

        // Update centroids as member means.
        for (std::size_t c = 0; c < k; ++c)
            std::fill(model.centroids[c].begin(), model.centroids[c].end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = model.assignment[i];
            for (std::size_t j = 0; j < points[i].size(); ++j)
                model.centroids[c][j] += points[i][j];
        }
        for (std::size_t c = 0; c < k; ++c)
            for (double& v : model.centroids[c]) v /= static_cast<double>(sizes[c]);

        const double objective = inertia_of(points, model);
        if (objective > prev_objective + 1e-9)
            throw Error("kmeans: objective increased within a Lloyd run");
        prev_objective = objective;

        if (model.assignment == prev_assignment) break;
        prev_assignment = model.assignment;
    }
}

// Pair-move polish for modest N: moving two same-cluster points together can
// lower the objective where no single move does. The within-pair scatter
// cancels in the delta, leaving the set-move form of the single-move formula
// (size m = 2). Worth its O(N^2 k) only below the size cutoff.
bool refine_pair_moves(const std::vector<std::vector<double>>& points, ClusterModel& model) {
    const std::size_t n = points.size();
    const std::size_t k = model.k;
    if (n > 256 || k < 2) return false;
    const std::size_t d = points[0].size();
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t a : model.assignment) ++sizes[a];

    bool any_move = false;
    std::vector<double> mid(d);
    for (std::size_t pass = 0; pass < 20; ++pass) {
        bool improved = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const std::size_t from = model.assignment[i];
                if (model.assignment[j] != from) continue;
                if (sizes[from] <= 2) continue;
                for (std::size_t c = 0; c < d; ++c) mid[c] = 0.5 * (points[i][c] + points[j][c]);
                const double a = static_cast<double>(sizes[from]);
                const double cost_out =
                    2.0 * a / (a - 2.0) * squared_distance(mid, model.centroids[from]);
                double best_delta = -1e-12;
                std::size_t best_to = from;
                for (std::size_t to = 0; to < k; ++to) {
                    if (to == from) continue;
                    const double b = static_cast<double>(sizes[to]);
                    const double delta =
                        2.0 * b / (b + 2.0) * squared_distance(mid, model.centroids[to]) -
                        cost_out;
                    if (delta < best_delta) {
                        best_delta = delta;
                        best_to = to;
                    }
                }
                if (best_to == from) continue;
                const double a_new = a - 2.0;
                const double b_old = static_cast<double>(sizes[best_to]);
                for (std::size_t c = 0; c < d; ++c) {
                    model.centroids[from][c] =
                        (model.centroids[from][c] * a - 2.0 * mid[c]) / a_new;
                    model.centroids[best_to][c] =
                        (model.centroids[best_to][c] * b_old + 2.0 * mid[c]) / (b_old + 2.0);
                }
                sizes[from] -= 2;
                sizes[best_to] += 2;
                model.assignment[i] = best_to;
                model.assignment[j] = best_to;
                improved = true;
                any_move = true;
            }
        }
        if (!improved) break;
    }
    return any_move;
}

ClusterModel lloyd(const std::vector<std::vector<double>>& points, std::size_t k, Rng& rng,
                   bool greedy_seed) {
    ClusterModel model;
    model.k = k;
    model.centroids = seed_plus_plus(points, k, rng, greedy_seed);
    model.assignment.assign(points.size(), 0);

    // Alternate Lloyd fixpoints with single-move refinement until neither
    // phase changes anything.
    double prev_objective = std::numeric_limits<double>::infinity();
    for (std::size_t round = 0; round < 50; ++round) {
        lloyd_to_fixpoint(points, model, prev_objective);
        bool refined = refine_single_moves(points, model);
        refined = refine_pair_moves(points, model) || refined;
        const double objective = inertia_of(points, model);
        if (objective > prev_objective + 1e-9)
            throw Error("kmeans: refinement increased the objective");
        prev_objective = objective;
        if (!refined) break;
    }

    model.inertia = inertia_of(points, model);
    return model;
}

}  // namespace

ClusterModel kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                    std::size_t restarts, Rng& rng) {
    if (k == 0) throw PreconditionError("kmeans: k must be >= 1");
    if (points.size() < k)
        throw PreconditionError("kmeans: need at least k=" + std::to_string(k) + " points, got " +
                                std::to_string(points.size()));
    if (restarts == 0) restarts = 1;
    for (const auto& p : points) {
        if (p.size() != points[0].size()) throw ShapeError("kmeans: inconsistent point dimensions");
        for (double v : p)
            if (!std::isfinite(v)) throw NumericError("kmeans: non-finite point coordinate");
    }

    ClusterModel best;
    bool have = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        // Greedy seeding concentrates on strong starts; plain D^2 restarts
        // keep exploring, since greedy picks collapse onto few seed sets.
        ClusterModel m = lloyd(points, k, rng, r % 2 == 0);
        if (!have || m.inertia < best.inertia) {
            best = std::move(m);
            have = true;
        }
    }
    return best;
}

}  // namespace slac::cluster
