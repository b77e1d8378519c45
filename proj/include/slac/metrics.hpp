#pragma once

#include <cstdint>
#include <vector>

#include "slac/kmeans.hpp"

namespace slac::metrics {

// Labels must be dense 0..k-1 with every cluster non-empty and k >= 2.
using Points = std::vector<std::vector<double>>;
using Labels = std::vector<std::size_t>;

// Mean over points of (b-a)/max(a,b); singleton-cluster points score 0.
// Throws PreconditionError when all points share one cluster.
double silhouette(const Points& points, const Labels& labels);

// Smallest inter-cluster distance (single linkage) over largest intra-cluster
// diameter. Throws PreconditionError when every diameter is zero.
double dunn(const Points& points, const Labels& labels);

// Mean over clusters of the worst (S_i + S_j) / ||c_i - c_j||.
// Throws PreconditionError on coincident centroids.
double davies_bouldin(const Points& points, const Labels& labels);

// [BSS/(k-1)] / [WSS/(N-k)]. Throws PreconditionError when WSS is 0.
double calinski_harabasz(const Points& points, const Labels& labels);

struct KruskalResult {
    double h = 0.0;
    std::size_t degrees_of_freedom = 0;
    double p_value = 1.0;
    double tie_correction = 1.0;
};

// Rank-based test over >= 2 non-empty groups with mid-ranks for ties and the
// standard tie correction; p from the chi-square upper tail. All values
// identical across all groups gives H = 0, p = 1 (not an error).
KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// P(X >= x) for a chi-square variable with df degrees of freedom, via the
// regularized incomplete gamma function (series / continued-fraction split).
double chi_square_upper_tail(double x, std::size_t df);

struct KSweepRow {
    std::size_t k = 0;
    double silhouette = 0.0;
    double dunn = 0.0;
    double davies_bouldin = 0.0;
    double calinski_harabasz = 0.0;
};

struct KSweepResult {
    std::vector<KSweepRow> rows;
    // Per-metric winner (max for silhouette/dunn/CH, min for DB).
    std::size_t best_silhouette_k = 0;
    std::size_t best_dunn_k = 0;
    std::size_t best_davies_bouldin_k = 0;
    std::size_t best_calinski_harabasz_k = 0;
};

// Runs kmeans per k on the same points and tabulates all four indices.
KSweepResult k_sweep(const Points& points, const std::vector<std::size_t>& k_values,
                     std::size_t restarts, std::uint64_t seed);

void write_k_sweep_csv(const std::string& path, const KSweepResult& result);

}  // namespace slac::metrics
