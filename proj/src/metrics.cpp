#include "slac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "slac/csv.hpp"
#include "slac/error.hpp"

namespace slac::metrics {

namespace {

std::size_t validate_labels(const Points& points, const Labels& labels) {
    if (points.size() != labels.size())
        throw PreconditionError("metrics: points/labels length mismatch");
    if (points.empty()) throw PreconditionError("metrics: no points");
    std::size_t k = 0;
    for (std::size_t l : labels) k = std::max(k, l + 1);
    if (k < 2) throw PreconditionError("metrics: all points in one cluster");
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t l : labels) ++sizes[l];
    for (std::size_t c = 0; c < k; ++c)
        if (sizes[c] == 0)
            throw PreconditionError("metrics: cluster " + std::to_string(c) + " is empty");
    return k;
}

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
    return std::sqrt(cluster::squared_distance(a, b));
}

std::vector<std::vector<double>> cluster_centroids(const Points& points, const Labels& labels,
                                                   std::size_t k) {
    const std::size_t d = points[0].size();
    std::vector<std::vector<double>> centroids(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        ++sizes[labels[i]];
        for (std::size_t j = 0; j < d; ++j) centroids[labels[i]][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (double& v : centroids[c]) v /= static_cast<double>(sizes[c]);
    return centroids;
}

}  // namespace

double silhouette(const Points& points, const Labels& labels) {
    const std::size_t k = validate_labels(points, labels);
    const std::size_t n = points.size();
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t l : labels) ++sizes[l];

    double total = 0.0;
    std::vector<double> mean_dist(k);
    for (std::size_t i = 0; i < n; ++i) {
        if (sizes[labels[i]] == 1) continue;  // singleton scores 0
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            mean_dist[labels[j]] += euclid(points[i], points[j]);
        }
        for (std::size_t c = 0; c < k; ++c) {
            const double denom =
                static_cast<double>(c == labels[i] ? sizes[c] - 1 : sizes[c]);
            mean_dist[c] /= denom;
        }
        const double a = mean_dist[labels[i]];
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != labels[i]) b = std::min(b, mean_dist[c]);
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

double dunn(const Points& points, const Labels& labels) {
    validate_labels(points, labels);
    const std::size_t n = points.size();

    double max_diameter = 0.0;
    double min_inter = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = euclid(points[i], points[j]);
            if (labels[i] == labels[j])
                max_diameter = std::max(max_diameter, d);
            else
                min_inter = std::min(min_inter, d);
        }
    }
    if (max_diameter <= 0.0)
        throw PreconditionError("dunn: every intra-cluster diameter is zero; ratio undefined");
    return min_inter / max_diameter;
}

double davies_bouldin(const Points& points, const Labels& labels) {
    const std::size_t k = validate_labels(points, labels);
    const std::size_t n = points.size();
    auto centroids = cluster_centroids(points, labels, k);

    std::vector<double> scatter(k, 0.0);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        scatter[labels[i]] += euclid(points[i], centroids[labels[i]]);
        ++sizes[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) scatter[c] /= static_cast<double>(sizes[c]);

    double db = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == i) continue;
            const double sep = euclid(centroids[i], centroids[j]);
            if (sep == 0.0)
                throw PreconditionError("davies_bouldin: coincident centroids for clusters " +
                                        std::to_string(i) + " and " + std::to_string(j));
            worst = std::max(worst, (scatter[i] + scatter[j]) / sep);
        }
        db += worst;
    }
    return db / static_cast<double>(k);
}

double calinski_harabasz(const Points& points, const Labels& labels) {
    const std::size_t k = validate_labels(points, labels);
    const std::size_t n = points.size();
    if (n <= k) throw PreconditionError("calinski_harabasz: needs N > k");
    const std::size_t d = points[0].size();
    auto centroids = cluster_centroids(points, labels, k);

    std::vector<double> overall(d, 0.0);
    for (const auto& p : points)
        for (std::size_t j = 0; j < d; ++j) overall[j] += p[j];
    for (double& v : overall) v /= static_cast<double>(n);

    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t l : labels) ++sizes[l];

    double bss = 0.0;
    for (std::size_t c = 0; c < k; ++c)
        bss += static_cast<double>(sizes[c]) * cluster::squared_distance(centroids[c], overall);
    double wss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        wss += cluster::squared_distance(points[i], centroids[labels[i]]);
    if (wss <= 0.0)
        throw PreconditionError("calinski_harabasz: within-cluster scatter is zero");
    return (bss / static_cast<double>(k - 1)) / (wss / static_cast<double>(n - k));
}

namespace {

// Regularized lower incomplete gamma P(a,x) by series expansion (x < a+1).
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction
// (x >= a+1).
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double chi_square_upper_tail(double x, std::size_t df) {
    if (df == 0) throw PreconditionError("chi_square_upper_tail: df must be >= 1");
    if (x < 0.0) throw PreconditionError("chi_square_upper_tail: x must be >= 0");
    if (x == 0.0) return 1.0;
    const double a = static_cast<double>(df) / 2.0;
    const double xx = x / 2.0;
    if (xx < a + 1.0) return 1.0 - gamma_p_series(a, xx);
    return gamma_q_cf(a, xx);
}

KruskalResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) throw PreconditionError("kruskal_wallis: needs >= 2 groups");
    std::size_t n_total = 0;
    for (const auto& g : groups) {
        if (g.empty()) throw PreconditionError("kruskal_wallis: empty group");
        n_total += g.size();
        for (double v : g)
            if (!std::isfinite(v)) throw NumericError("kruskal_wallis: non-finite value");
    }
    if (n_total < 3) throw PreconditionError("kruskal_wallis: needs total N >= 3");

    struct Entry {
        double value;
        std::size_t group;
    };
    std::vector<Entry> pooled;
    pooled.reserve(n_total);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (double v : groups[g]) pooled.push_back({v, g});
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const Entry& a, const Entry& b) { return a.value < b.value; });

    // Mid-ranks over tied runs; tie correction 1 - sum(t^3 - t)/(N^3 - N).
    std::vector<double> rank_sum(groups.size(), 0.0);
    const double nd = static_cast<double>(n_total);
    double tie_sum = 0.0;
    std::size_t i = 0;
    while (i < pooled.size()) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].value == pooled[i].value) ++j;
        const double t = static_cast<double>(j - i);
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t r = i; r < j; ++r) rank_sum[pooled[r].group] += mid_rank;
        tie_sum += t * t * t - t;
        i = j;
    }

    KruskalResult res;
    res.degrees_of_freedom = groups.size() - 1;
    const double correction = 1.0 - tie_sum / (nd * nd * nd - nd);
    if (correction <= 0.0) {
        // Every pooled value identical: no evidence of any difference.
        res.h = 0.0;
        res.p_value = 1.0;
        res.tie_correction = 1.0;
        return res;
    }
    double h = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g)
        h += rank_sum[g] * rank_sum[g] / static_cast<double>(groups[g].size());
    h = 12.0 / (nd * (nd + 1.0)) * h - 3.0 * (nd + 1.0);
    h /= correction;
    if (h < 0.0) h = 0.0;  // roundoff guard near zero

    res.h = h;
    res.tie_correction = correction;
    res.p_value = chi_square_upper_tail(h, res.degrees_of_freedom);
    return res;
}

KSweepResult k_sweep(const Points& points, const std::vector<std::size_t>& k_values,
                     std::size_t restarts, std::uint64_t seed) {
    if (k_values.empty()) throw PreconditionError("k_sweep: no k values");
    KSweepResult result;
    for (std::size_t k : k_values) {
        if (k >= points.size())
            throw PreconditionError("k_sweep: k=" + std::to_string(k) +
                                    " must be smaller than N=" + std::to_string(points.size()));
        Rng rng = Rng::substream(seed, "kmeans", k);
        cluster::ClusterModel model = cluster::kmeans(points, k, restarts, rng);
        KSweepRow row;
        row.k = k;
        row.silhouette = silhouette(points, model.assignment);
        row.dunn = dunn(points, model.assignment);
        row.davies_bouldin = davies_bouldin(points, model.assignment);
        row.calinski_harabasz = calinski_harabasz(points, model.assignment);
        result.rows.push_back(row);
    }
    const auto& rows = result.rows;
    auto best = [&](auto key, bool maximize) {
        std::size_t best_k = rows[0].k;
        double best_v = key(rows[0]);
        for (const auto& r : rows) {
            const double v = key(r);
            if ((maximize && v > best_v) || (!maximize && v < best_v)) {
                best_v = v;
                best_k = r.k;
            }
        }
        return best_k;
    };
    result.best_silhouette_k = best([](const KSweepRow& r) { return r.silhouette; }, true);
    result.best_dunn_k = best([](const KSweepRow& r) { return r.dunn; }, true);
    result.best_davies_bouldin_k = best([](const KSweepRow& r) { return r.davies_bouldin; }, false);
    result.best_calinski_harabasz_k =
        best([](const KSweepRow& r) { return r.calinski_harabasz; }, true);
    return result;
}

void write_k_sweep_csv(const std::string& path, const KSweepResult& result) {
    csv::Writer w(path);
    w.raw_line("k,silhouette,dunn,davies_bouldin,calinski_harabasz");
    for (const KSweepRow& r : result.rows) {
        w.row({std::to_string(r.k), csv::format_double(r.silhouette), csv::format_double(r.dunn),
               csv::format_double(r.davies_bouldin), csv::format_double(r.calinski_harabasz)});
    }
    w.close();
}

}  // namespace slac::metrics
