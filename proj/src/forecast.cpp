#include "slac/forecast.hpp"

#include <algorithm>
#include <cmath>

#include "slac/error.hpp"

namespace slac::train {

using model::EncoderConfig;
using model::EncoderParams;
using model::EncTriplet;
using model::RunMode;
using nn::Tape;
using nn::Tensor;
using nn::Var;

ForecastHead init_forecast_head(std::size_t rep_dim, std::size_t n_variables, std::uint64_t seed) {
    Rng rng = Rng::substream(seed, "forecast-head-init");
    const double limit = std::sqrt(6.0 / static_cast<double>(rep_dim + n_variables));
    Tensor w = Tensor::zeros({rep_dim, n_variables});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
    ForecastHead head;
    head.w = nn::Parameter("forecast_head.w", std::move(w));
    head.b = nn::Parameter("forecast_head.b", Tensor::zeros({1, n_variables}));
    return head;
}

std::vector<ForecastInstance> build_forecast_instances(std::span<const data::Sample> samples,
                                                       std::size_t n_variables) {
    std::vector<ForecastInstance> instances;
    for (std::size_t si = 0; si < samples.size(); ++si) {
        const data::Sample& s = samples[si];
        for (std::size_t w : kObservationWindows) {
            if (w + kPredictionBins > s.n_bins) continue;
            bool has_input = false;
            std::vector<double> sum(n_variables, 0.0);
            std::vector<std::size_t> count(n_variables, 0);
            for (const data::BinValue& bv : s.bins) {
                if (bv.bin < w) {
                    has_input = true;
                } else if (bv.bin < w + kPredictionBins) {
                    sum[bv.variable] += bv.value;
                    ++count[bv.variable];
                }
            }
            if (!has_input) continue;
            ForecastInstance inst;
            inst.sample_index = si;
            inst.obs_window = w;
            inst.target.assign(n_variables, 0.0);
            inst.mask.assign(n_variables, 0.0);
            bool any_target = false;
            for (std::size_t f = 0; f < n_variables; ++f) {
                if (count[f] == 0) continue;
                inst.mask[f] = 1.0;
                inst.target[f] = sum[f] / static_cast<double>(count[f]);
                any_target = true;
            }
            if (!any_target) continue;  // all-zero mask: zero loss, zero gradient, only cost
            instances.push_back(std::move(inst));
        }
    }
    return instances;
}

namespace {

// Stacked forecast outputs for a batch of instances (one encoder pass each).
Var batch_forecast(Tape& tape, std::span<const ForecastInstance> instances,
                   std::span<const std::size_t> which, std::span<const data::Sample> samples,
                   EncoderParams& encoder, ForecastHead& head, const EncoderConfig& config,
                   RunMode mode, Rng* dropout_rng) {
    std::vector<Var> reps;
    reps.reserve(which.size());
    for (std::size_t idx : which) {
        const ForecastInstance& inst = instances[idx];
        auto trips = model::sample_triplets(samples[inst.sample_index], inst.obs_window);
        reps.push_back(
            model::encode_on_tape(tape, trips, encoder, config, mode, dropout_rng));
    }
    Var rep_matrix = tape.stack_rows(reps);
    return tape.add_rowvec(tape.matmul(rep_matrix, tape.param(head.w)), tape.param(head.b));
}

void batch_targets(std::span<const ForecastInstance> instances,
                   std::span<const std::size_t> which, std::size_t n_variables,
                   Tensor& target, Tensor& mask) {
    target = Tensor::zeros({which.size(), n_variables});
    mask = Tensor::zeros({which.size(), n_variables});
    for (std::size_t i = 0; i < which.size(); ++i) {
        const ForecastInstance& inst = instances[which[i]];
        for (std::size_t f = 0; f < n_variables; ++f) {
            target[i * n_variables + f] = inst.target[f];
            mask[i * n_variables + f] = inst.mask[f];
        }
    }
}

}  // namespace

std::vector<double> forecast_forward(const ForecastInstance& instance,
                                     std::span<const data::Sample> samples,
                                     EncoderParams& encoder, ForecastHead& head,
                                     const EncoderConfig& config) {
    Tape tape;
    std::size_t idx[] = {0};
    std::span<const ForecastInstance> one(&instance, 1);
    Var pred = batch_forecast(tape, one, idx, samples, encoder, head, config,
                              RunMode::infer, nullptr);
    return tape.value(pred).data();
}

double dataset_forecast_loss(std::span<const ForecastInstance> instances,
                             std::span<const std::size_t> which,
                             std::span<const data::Sample> samples, EncoderParams& encoder,
                             ForecastHead& head, const EncoderConfig& config) {
    if (which.empty()) throw PreconditionError("dataset_forecast_loss: empty instance set");
    double total = 0.0;
    for (std::size_t idx : which) {
        const ForecastInstance& inst = instances[idx];
        std::vector<double> pred = forecast_forward(inst, samples, encoder, head, config);
        for (std::size_t f = 0; f < pred.size(); ++f) {
            if (inst.mask[f] == 0.0) continue;
            const double diff = pred[f] - inst.target[f];
            total += diff * diff;
        }
    }
    return total / static_cast<double>(which.size());
}

PretrainResult pretrain(std::span<const data::Sample> samples,
                        const EncoderConfig& encoder_config, const TrainConfig& cfg) {
    cfg.validate();
    encoder_config.validate();
    const std::size_t n_vars = encoder_config.n_variables;

    std::vector<ForecastInstance> instances = build_forecast_instances(samples, n_vars);
    if (instances.size() < 10)
        throw PreconditionError("pretrain: only " + std::to_string(instances.size()) +
                                " usable forecast instances; provide more data");

    PretrainResult result;
    result.n_instances = instances.size();
    result.encoder = model::init_params(encoder_config, cfg.seed);
    result.head = init_forecast_head(encoder_config.representation_dim(), n_vars, cfg.seed);

    Rng split_rng = Rng::substream(cfg.seed, "pretrain-split");
    std::vector<std::size_t> train_idx, val_idx;
    if (cfg.split_by_sample) {
        // Group instances by source sample so no sample straddles the split.
        std::vector<std::size_t> sample_ids;
        for (const auto& inst : instances)
            if (sample_ids.empty() || sample_ids.back() != inst.sample_index)
                sample_ids.push_back(inst.sample_index);
        std::sort(sample_ids.begin(), sample_ids.end());
        sample_ids.erase(std::unique(sample_ids.begin(), sample_ids.end()), sample_ids.end());
        auto [train_s, val_s] = split_indices(sample_ids.size(), cfg.split, split_rng);
        std::vector<bool> in_train(samples.size(), false);
        for (std::size_t i : train_s) in_train[sample_ids[i]] = true;
        for (std::size_t i = 0; i < instances.size(); ++i)
            (in_train[instances[i].sample_index] ? train_idx : val_idx).push_back(i);
        if (train_idx.empty() || val_idx.empty())
            throw PreconditionError("pretrain: sample-level split left one side empty");
    } else {
        std::tie(train_idx, val_idx) = split_indices(instances.size(), cfg.split, split_rng);
    }

    Rng shuffle_rng = Rng::substream(cfg.seed, "pretrain-shuffle");
    Rng dropout_rng = Rng::substream(cfg.seed, "pretrain-dropout");

    FitProblem problem;
    problem.n_instances = instances.size();
    problem.params = result.encoder.all();
    for (nn::Parameter* p : result.head.all()) problem.params.push_back(p);
    problem.batch_loss = [&](Tape& tape, std::span<const std::size_t> batch, Rng* drop) -> Var {
        Var pred = batch_forecast(tape, instances, batch, samples, result.encoder, result.head,
                                  encoder_config, RunMode::train, drop);
        Tensor target, mask;
        batch_targets(instances, batch, n_vars, target, mask);
        // Per-batch mean as the unbiased surrogate of the full-set normalizer.
        return tape.masked_mse(pred, target, mask, static_cast<double>(batch.size()));
    };
    problem.eval_loss = [&](std::span<const std::size_t> which) -> double {
        return dataset_forecast_loss(instances, which, samples, result.encoder, result.head,
                                     encoder_config);
    };

    result.log = fit(problem, std::move(train_idx), std::move(val_idx), cfg, cfg.max_epochs,
                     shuffle_rng, &dropout_rng);
    return result;
}

}  // namespace slac::train
