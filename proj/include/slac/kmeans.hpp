#pragma once

#include <cstdint>
#include <vector>

#include "slac/rng.hpp"

namespace slac::cluster {

// K-means output: centroids, per-point assignments and the objective value
// (mean squared distance of each point to its assigned centroid).
struct ClusterModel {
    std::size_t k = 0;
    std::vector<std::vector<double>> centroids;  // k x d
    std::vector<std::size_t> assignment;         // N, in 0..k-1
    double inertia = 0.0;
};

// k-means++ seeding, Lloyd iterations to an assignment fixpoint (cap 300)
// followed by a Hartigan-style single-point-move refinement, best of
// `restarts` runs by inertia. Empty clusters are repaired by reseeding on the
// point farthest from its centroid; nearest-centroid ties break to the lowest
// centroid index. Throws PreconditionError when N < k.
ClusterModel kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                    std::size_t restarts, Rng& rng);

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

// Mean squared distance of points to their assigned centroids.
double inertia_of(const std::vector<std::vector<double>>& points, const ClusterModel& model);

}  // namespace slac::cluster
