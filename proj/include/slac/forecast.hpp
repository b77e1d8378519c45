#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "slac/encoder.hpp"
#include "slac/train.hpp"
#include "slac/triplets.hpp"

namespace slac::train {

// Observation-window lengths (in bins); the prediction window is the 5 bins
// immediately after each, so the longest pair exactly spans a 180-bin sample.
inline constexpr std::array<std::size_t, 5> kObservationWindows{20, 40, 80, 160, 175};
inline constexpr std::size_t kPredictionBins = 5;

// One self-supervision example: the sample's triplets before bin W as input,
// the per-variable mean over bins [W, W+5) as target. mask_j = 1 iff variable
// j was observed in the prediction window; masked-out targets are 0 by
// convention and never read.
struct ForecastInstance {
    std::size_t sample_index = 0;
    std::size_t obs_window = 0;  // W
    std::vector<double> target;  // |F|
    std::vector<double> mask;    // |F|, {0,1}
};

struct ForecastHead {
    nn::Parameter w;  // {rep_dim, |F|}
    nn::Parameter b;  // {1, |F|}
    std::vector<nn::Parameter*> all() { return {&w, &b}; }
};

ForecastHead init_forecast_head(std::size_t rep_dim, std::size_t n_variables, std::uint64_t seed);

// Emits an instance per (sample, W) iff the observation part has at least one
// value and the mask has at least one set bit.
std::vector<ForecastInstance> build_forecast_instances(std::span<const data::Sample> samples,
                                                       std::size_t n_variables);

// Inference-mode forecast output for one instance.
std::vector<double> forecast_forward(const ForecastInstance& instance,
                                     std::span<const data::Sample> samples,
                                     model::EncoderParams& encoder, ForecastHead& head,
                                     const model::EncoderConfig& config);

// Masked-MSE over a set of instances with the full-set normalizer
// (1/|set| * sum over instances and variables of mask * squared error).
double dataset_forecast_loss(std::span<const ForecastInstance> instances,
                             std::span<const std::size_t> which,
                             std::span<const data::Sample> samples,
                             model::EncoderParams& encoder, ForecastHead& head,
                             const model::EncoderConfig& config);

struct PretrainResult {
    model::EncoderParams encoder;
    ForecastHead head;
    TrainLog log;
    std::size_t n_instances = 0;
};

// Self-supervised pretraining: builds instances, splits 80:20, minimizes the
// masked MSE with Adam and early stopping, returns the best-epoch parameters.
PretrainResult pretrain(std::span<const data::Sample> samples,
                        const model::EncoderConfig& encoder_config, const TrainConfig& cfg);

}  // namespace slac::train
