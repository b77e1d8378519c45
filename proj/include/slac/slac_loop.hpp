#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "slac/encoder.hpp"
#include "slac/kmeans.hpp"
#include "slac/train.hpp"
#include "slac/triplets.hpp"

namespace slac::train {

// One-hot pseudo-labels derived from cluster assignments: exactly one 1 per
// sample.
struct PseudoLabels {
    std::size_t k = 0;
    std::vector<std::size_t> assignment;

    std::vector<double> onehot(std::size_t i) const {
        std::vector<double> row(k, 0.0);
        row[assignment[i]] = 1.0;
        return row;
    }
};

PseudoLabels extract_pseudo_labels(const cluster::ClusterModel& model);

// Linear map rep_dim -> k; softmax lives in the loss / predict_proba.
struct ClassifierHead {
    nn::Parameter w;
    nn::Parameter b;
    std::vector<nn::Parameter*> all() { return {&w, &b}; }
};

ClassifierHead init_classifier_head(std::size_t rep_dim, std::size_t k, std::uint64_t seed);

struct SlacConfig {
    std::size_t k = 3;
    std::size_t outer_iterations = 50;  // paper-scale runs use 500
    std::size_t epochs_per_iteration = 200;
    std::size_t patience = 10;
    std::size_t batch_size = 8;
    double split = 0.8;
    std::size_t kmeans_restarts = 10;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PhaseLog {
    TrainLog train_log;
    std::vector<std::size_t> missing_classes;  // pseudo-classes absent from the train split
};

// Supervised phase against pseudo-labels: both the encoder and the classifier
// head are updated. A pseudo-class missing from the training split is logged
// as a warning and training proceeds.
PhaseLog train_classification_phase(std::span<const data::Sample> samples,
                                    const PseudoLabels& labels,
                                    model::EncoderParams& encoder, ClassifierHead& head,
                                    const model::EncoderConfig& encoder_config,
                                    const SlacConfig& cfg, std::uint64_t iteration);

struct IterationEntry {
    std::size_t iteration = 0;  // 1-based
    double inertia = 0.0;
    double label_change_fraction = 1.0;
    double silhouette = 0.0;
    double dunn = 0.0;
    double davies_bouldin = 0.0;
    double calinski_harabasz = 0.0;
};

struct SlacResult {
    model::EncoderParams encoder;
    ClassifierHead head;
    cluster::ClusterModel final_model;
    std::vector<IterationEntry> log;
    // The representations the final clustering was computed on.
    std::vector<std::vector<double>> final_representations;
};

// The alternating procedure: encode (inference mode), K-means, pseudo-labels,
// reinitialize the classifier output layer, classification phase; repeated
// outer_iterations times.
SlacResult run_slac(std::span<const data::Sample> samples, const SlacConfig& cfg,
                    model::EncoderParams encoder, const model::EncoderConfig& encoder_config);

// Fraction of samples whose label changed between two labelings, measured
// after optimal label matching (cluster ids are arbitrary across runs).
double label_change_fraction(const std::vector<std::size_t>& previous,
                             const std::vector<std::size_t>& current, std::size_t k);

// Inference-mode representations of every sample.
std::vector<std::vector<double>> encode_all(std::span<const data::Sample> samples,
                                            model::EncoderParams& encoder,
                                            const model::EncoderConfig& config);

void write_iteration_log_csv(const std::string& path, std::span<const IterationEntry> log);

}  // namespace slac::train
