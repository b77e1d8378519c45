#include "slac/train.hpp"

#include <algorithm>

#include "slac/csv.hpp"
#include "slac/error.hpp"

namespace slac::train {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    if (patience == 0) throw ConfigError("train: patience must be >= 1");
    if (split <= 0.0 || split >= 1.0) throw ConfigError("train: split fraction must be in (0,1)");
    if (max_epochs == 0) throw ConfigError("train: max_epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(static_cast<double>(n) * train_fraction);
    if (n >= 2) {
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    }
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return {std::move(train), std::move(val)};
}

TrainLog fit(const FitProblem& problem, std::vector<std::size_t> train_idx,
             std::vector<std::size_t> val_idx, const TrainConfig& cfg,
             std::size_t max_epochs, Rng& shuffle_rng, Rng* dropout_rng) {
    cfg.validate();
    if (train_idx.empty() || val_idx.empty())
        throw PreconditionError("fit: both train and validation splits must be non-empty");

    nn::Adam adam(problem.params, nn::AdamConfig{cfg.learning_rate});
    EarlyStopper stopper(cfg.patience);
    TrainLog log;

    // Snapshot of the best-so-far parameter values.
    std::vector<nn::Tensor> best_values;
    auto snapshot = [&] {
        best_values.clear();
        best_values.reserve(problem.params.size());
        for (nn::Parameter* p : problem.params) best_values.push_back(p->value);
    };
    snapshot();

    for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
        shuffle_rng.shuffle(train_idx);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, train_idx.size());
            std::span<const std::size_t> batch(train_idx.data() + start, end - start);
            nn::Tape tape;
            nn::Var loss = problem.batch_loss(tape, batch, dropout_rng);
            loss_sum += tape.value(loss)[0] * static_cast<double>(batch.size());
            tape.backward(loss);
            adam.step();
        }
        EpochEntry entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(train_idx.size());
        entry.val_loss = problem.eval_loss(val_idx);
        log.epochs.push_back(entry);

        if (stopper.observe(entry.val_loss)) snapshot();
        if (stopper.should_stop()) break;
    }

    for (std::size_t i = 0; i < problem.params.size(); ++i)
        problem.params[i]->value = best_values[i];
    log.best_epoch = stopper.best_epoch();
    log.stop_epoch = log.epochs.empty() ? 0 : log.epochs.back().epoch;
    log.best_val_loss = stopper.best_loss();
    return log;
}

void write_train_log_csv(const std::string& path, const TrainLog& log) {
    csv::Writer w(path);
    w.raw_line("epoch,train_loss,val_loss");
    for (const EpochEntry& e : log.epochs) {
        w.row({std::to_string(e.epoch), csv::format_double(e.train_loss),
               csv::format_double(e.val_loss)});
    }
    w.close();
}

}  // namespace slac::train
