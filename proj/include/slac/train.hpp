#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "slac/adam.hpp"
#include "slac/rng.hpp"
#include "slac/tape.hpp"

namespace slac::train {

struct TrainConfig {
    std::size_t batch_size = 8;
    std::size_t patience = 10;       // epochs without validation improvement
    double split = 0.8;              // train fraction of the 80:20 split
    std::size_t max_epochs = 200;
    bool split_by_sample = false;    // instance-level split by default
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochEntry {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainLog {
    std::vector<EpochEntry> epochs;
    std::size_t best_epoch = 0;  // 1-based; the returned parameters' epoch
    std::size_t stop_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
};

// Strictly-less-than improvement; ties count as non-improving.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    // Returns true when this epoch improved on the best so far.
    bool observe(double val_loss) {
        ++epoch_;
        if (val_loss < best_) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            since_best_ = 0;
            return true;
        }
        ++since_best_;
        return false;
    }

    bool should_stop() const { return since_best_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t since_best_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

// One optimization problem viewed through index sets. batch_loss builds the
// per-batch mean loss graph in training mode; eval_loss computes the
// inference-mode loss of an index set under the full-set normalizer (so the
// logged values follow the dataset-level definition of the loss).
struct FitProblem {
    std::size_t n_instances = 0;
    std::function<nn::Var(nn::Tape&, std::span<const std::size_t>, Rng*)> batch_loss;
    std::function<double(std::span<const std::size_t>)> eval_loss;
    std::vector<nn::Parameter*> params;
};

// Adam over shuffled batches with early stopping; returns the log and leaves
// the parameters at the best-validation-epoch values (never the last ones).
TrainLog fit(const FitProblem& problem, std::vector<std::size_t> train_idx,
             std::vector<std::size_t> val_idx, const TrainConfig& cfg,
             std::size_t max_epochs, Rng& shuffle_rng, Rng* dropout_rng);

// Seeded shuffle + split into (train, val) by fraction; at least one
// instance on each side when n >= 2.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, Rng& rng);

void write_train_log_csv(const std::string& path, const TrainLog& log);

}  // namespace slac::train
