#include "slac/slac_loop.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "slac/csv.hpp"
#include "slac/error.hpp"
#include "slac/metrics.hpp"

namespace slac::train {

using model::EncoderConfig;
using model::EncoderParams;
using model::RunMode;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void SlacConfig::validate() const {
    if (k < 2) throw ConfigError("slac: k must be >= 2");
    if (outer_iterations == 0 || epochs_per_iteration == 0 || patience == 0 || batch_size == 0)
        throw ConfigError("slac: all counts must be >= 1");
    if (split <= 0.0 || split >= 1.0) throw ConfigError("slac: split fraction must be in (0,1)");
    if (learning_rate <= 0.0) throw ConfigError("slac: learning_rate must be > 0");
}

PseudoLabels extract_pseudo_labels(const cluster::ClusterModel& model) {
    return PseudoLabels{model.k, model.assignment};
}

ClassifierHead init_classifier_head(std::size_t rep_dim, std::size_t k, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, "classifier-head-init");
    const double limit = std::sqrt(6.0 / static_cast<double>(rep_dim + k));
    Tensor w = Tensor::zeros({rep_dim, k});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
    ClassifierHead head;
    head.w = nn::Parameter("classifier_head.w", std::move(w));
    head.b = nn::Parameter("classifier_head.b", Tensor::zeros({1, k}));
    return head;
}

std::vector<std::vector<double>> encode_all(std::span<const data::Sample> samples,
                                            EncoderParams& encoder, const EncoderConfig& config) {
    std::vector<std::vector<double>> reps;
    reps.reserve(samples.size());
    for (const data::Sample& s : samples) reps.push_back(model::encode(s, encoder, config));
    return reps;
}

namespace {

Var batch_logits(Tape& tape, std::span<const std::size_t> batch,
                 std::span<const data::Sample> samples, EncoderParams& encoder,
                 ClassifierHead& head, const EncoderConfig& config, RunMode mode,
                 Rng* dropout_rng) {
    std::vector<Var> reps;
    reps.reserve(batch.size());
    for (std::size_t idx : batch) {
        auto trips = model::sample_triplets(samples[idx]);
        reps.push_back(model::encode_on_tape(tape, trips, encoder, config, mode, dropout_rng));
    }
    Var rep_matrix = tape.stack_rows(reps);
    return tape.add_rowvec(tape.matmul(rep_matrix, tape.param(head.w)), tape.param(head.b));
}

Tensor batch_onehot(const PseudoLabels& labels, std::span<const std::size_t> batch) {
    Tensor out = Tensor::zeros({batch.size(), labels.k});
    for (std::size_t i = 0; i < batch.size(); ++i)
        out[i * labels.k + labels.assignment[batch[i]]] = 1.0;
    return out;
}

}  // namespace

PhaseLog train_classification_phase(std::span<const data::Sample> samples,
                                    const PseudoLabels& labels, EncoderParams& encoder,
                                    ClassifierHead& head, const EncoderConfig& encoder_config,
                                    const SlacConfig& cfg, std::uint64_t iteration) {
    if (labels.assignment.size() != samples.size())
        throw PreconditionError("classification: labels must cover all samples");

    Rng split_rng = Rng::substream(cfg.seed, "slac-split", iteration);
    auto [train_idx, val_idx] = split_indices(samples.size(), cfg.split, split_rng);

    PhaseLog phase;
    std::vector<bool> present(labels.k, false);
    for (std::size_t i : train_idx) present[labels.assignment[i]] = true;
    for (std::size_t c = 0; c < labels.k; ++c) {
        if (!present[c]) {
            phase.missing_classes.push_back(c);
            std::cerr << "[warn] pseudo-class " << c
                      << " absent from the training split; training proceeds\n";
        }
    }

    Rng shuffle_rng = Rng::substream(cfg.seed, "slac-shuffle", iteration);
    Rng dropout_rng = Rng::substream(cfg.seed, "slac-dropout", iteration);

    TrainConfig tc;
    tc.batch_size = cfg.batch_size;
    tc.patience = cfg.patience;
    tc.split = cfg.split;
    tc.max_epochs = cfg.epochs_per_iteration;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = cfg.seed;

    FitProblem problem;
    problem.n_instances = samples.size();
    problem.params = encoder.all();
    for (nn::Parameter* p : head.all()) problem.params.push_back(p);
    problem.batch_loss = [&](Tape& tape, std::span<const std::size_t> batch, Rng* drop) -> Var {
        Var logits = batch_logits(tape, batch, samples, encoder, head, encoder_config,
                                  RunMode::train, drop);
        return tape.cross_entropy(logits, batch_onehot(labels, batch));
    };
    problem.eval_loss = [&](std::span<const std::size_t> which) -> double {
        Tape tape;
        std::vector<std::size_t> idx(which.begin(), which.end());
        Var logits = batch_logits(tape, idx, samples, encoder, head, encoder_config,
                                  RunMode::infer, nullptr);
        Var loss = tape.cross_entropy(logits, batch_onehot(labels, idx));
        return tape.value(loss)[0];
    };

    phase.train_log = fit(problem, std::move(train_idx), std::move(val_idx), tc,
                          cfg.epochs_per_iteration, shuffle_rng, &dropout_rng);
    return phase;
}

double label_change_fraction(const std::vector<std::size_t>& previous,
                             const std::vector<std::size_t>& current, std::size_t k) {
    if (previous.size() != current.size())
        throw PreconditionError("label_change_fraction: length mismatch");
    const std::size_t n = previous.size();
    if (n == 0) return 0.0;

    std::vector<std::vector<std::size_t>> agree(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < n; ++i) ++agree[previous[i]][current[i]];

    std::size_t best_agreement = 0;
    if (k <= 8) {
        // Exact maximum-agreement matching over label permutations.
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        do {
            std::size_t total = 0;
            for (std::size_t c = 0; c < k; ++c) total += agree[c][perm[c]];
            best_agreement = std::max(best_agreement, total);
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        // Greedy fallback for large k.
        std::vector<bool> used(k, false);
        for (std::size_t c = 0; c < k; ++c) {
            std::size_t best_j = 0, best_v = 0;
            bool found = false;
            for (std::size_t j = 0; j < k; ++j) {
                if (used[j]) continue;
                if (!found || agree[c][j] > best_v) {
                    best_v = agree[c][j];
                    best_j = j;
                    found = true;
                }
            }
            used[best_j] = true;
            best_agreement += best_v;
        }
    }
    return 1.0 - static_cast<double>(best_agreement) / static_cast<double>(n);
}

SlacResult run_slac(std::span<const data::Sample> samples, const SlacConfig& cfg,
                    EncoderParams encoder, const EncoderConfig& encoder_config) {
    cfg.validate();
    encoder_config.validate();
    if (samples.size() < cfg.k)
        throw PreconditionError("run_slac: fewer samples than clusters");

    SlacResult result;
    result.encoder = std::move(encoder);
    result.head = init_classifier_head(encoder_config.representation_dim(), cfg.k, cfg.seed);

    std::vector<std::size_t> previous_assignment;
    for (std::size_t iter = 1; iter <= cfg.outer_iterations; ++iter) {
        auto reps = encode_all(samples, result.encoder, encoder_config);

        Rng kmeans_rng = Rng::substream(cfg.seed, "kmeans", iter);
        cluster::ClusterModel model =
            cluster::kmeans(reps, cfg.k, cfg.kmeans_restarts, kmeans_rng);

        IterationEntry entry;
        entry.iteration = iter;
        entry.inertia = model.inertia;
        entry.label_change_fraction =
            previous_assignment.empty()
                ? 1.0
                : label_change_fraction(previous_assignment, model.assignment, cfg.k);
        const auto nan = std::numeric_limits<double>::quiet_NaN();
        try {
            entry.silhouette = metrics::silhouette(reps, model.assignment);
        } catch (const Error&) {
            entry.silhouette = nan;
        }
        try {
            entry.dunn = metrics::dunn(reps, model.assignment);
        } catch (const Error&) {
            entry.dunn = nan;
        }
        try {
            entry.davies_bouldin = metrics::davies_bouldin(reps, model.assignment);
        } catch (const Error&) {
            entry.davies_bouldin = nan;
        }
        try {
            entry.calinski_harabasz = metrics::calinski_harabasz(reps, model.assignment);
        } catch (const Error&) {
            entry.calinski_harabasz = nan;
        }
        result.log.push_back(entry);

        previous_assignment = model.assignment;
        PseudoLabels labels = extract_pseudo_labels(model);

        // Cluster ids permute across K-means runs; stale output weights would
        // be meaningless, so the output layer restarts each iteration.
        result.head = init_classifier_head(
            encoder_config.representation_dim(), cfg.k,
            Rng::substream(cfg.seed, "head-reinit", iter).next_u64());

        train_classification_phase(samples, labels, result.encoder, result.head,
                                   encoder_config, cfg, iter);

        if (iter == cfg.outer_iterations) {
            result.final_model = std::move(model);
            result.final_representations = std::move(reps);
        }
    }
    return result;
}

void write_iteration_log_csv(const std::string& path, std::span<const IterationEntry> log) {
    csv::Writer w(path);
    w.raw_line("iteration,inertia,label_change_fraction,silhouette,dunn,davies_bouldin,calinski_harabasz");
    for (const IterationEntry& e : log) {
        w.row({std::to_string(e.iteration), csv::format_double(e.inertia),
               csv::format_double(e.label_change_fraction), csv::format_double(e.silhouette),
               csv::format_double(e.dunn), csv::format_double(e.davies_bouldin),
               csv::format_double(e.calinski_harabasz)});
    }
    w.close();
}

}  // namespace slac::train
