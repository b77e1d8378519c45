#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slac/tape.hpp"
#include "slac/triplets.hpp"

namespace slac::model {

struct EncoderConfig {
    std::size_t d = 48;            // embedding width; must divide by n_heads
    std::size_t ffn_units = 100;   // feed-forward hidden width
    std::size_t n_blocks = 2;
    std::size_t n_heads = 4;
    double dropout = 0.2;
    std::size_t max_triplets = 1024;  // per-sample cap; see encode()
    std::size_t n_variables = 8;      // |F|
    std::size_t static_dim = 0;       // optional non-temporal feature width

    void validate() const;
    // d, plus d more when the optional static-feature path is enabled.
    std::size_t representation_dim() const { return d + (static_dim > 0 ? d : 0); }
    std::uint64_t hash() const;
};

// A one-to-many scalar embedder: 1 -> ceil(sqrt(d)) tanh -> d, no output bias.
struct CveNet {
    nn::Parameter w1;  // {1, hidden}
    nn::Parameter b1;  // {1, hidden}
    nn::Parameter w2;  // {hidden, d}
};

struct TransformerBlockParams {
    nn::Parameter wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Parameter ln1_gain, ln1_bias;
    nn::Parameter ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    nn::Parameter ln2_gain, ln2_bias;
};

// The triplet-set encoder parameters (the mapping from a sample's observation
// triplets to one fixed-size representation).
struct EncoderParams {
    CveNet cve_time;
    CveNet cve_value;
    nn::Parameter var_embedding;  // {|F|, d}
    std::vector<TransformerBlockParams> blocks;
    nn::Parameter fusion_w;  // {d, d}
    nn::Parameter fusion_b;  // {1, d}
    nn::Parameter fusion_u;  // {d, 1}
    // Optional static-feature path: static_dim -> hidden tanh -> d.
    nn::Parameter static_w1, static_b1, static_w2;
    bool has_static = false;

    std::vector<nn::Parameter*> all();
};

// Glorot-uniform weights, zero biases, unit layer-norm gains; deterministic
// per seed.
EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed);

enum class RunMode { train, infer };

// A binned observation ready for the encoder: time already scaled to [0,1)
// by the window length, value already normalized.
struct EncTriplet {
    double t_scaled = 0.0;
    std::size_t variable = 0;
    double value = 0.0;
};

// Triplets of a (normalized) sample, bin midpoint times, canonical order.
// bin_limit restricts to bins < bin_limit (used by the forecast task).
std::vector<EncTriplet> sample_triplets(const data::Sample& sample,
                                        std::size_t bin_limit = static_cast<std::size_t>(-1));

struct EncodeDiag {
    std::vector<double> fusion_weights;  // per encoded slot; padding slots are 0
    std::size_t encoded_triplets = 0;    // after the max_triplets cap
};

// Builds the full encoder graph on the tape and returns the {1, rep_dim}
// representation node. pad_slots appends masked padding positions; they never
// change the output. With more than max_triplets observations a deterministic
// even-stride subset is encoded.
nn::Var encode_on_tape(nn::Tape& tape, std::span<const EncTriplet> triplets,
                       EncoderParams& params, const EncoderConfig& config, RunMode mode,
                       Rng* dropout_rng, std::size_t pad_slots = 0,
                       const std::vector<double>* static_features = nullptr,
                       EncodeDiag* diag = nullptr);

// Inference-mode representation of one sample as a plain vector.
std::vector<double> encode(const data::Sample& sample, EncoderParams& params,
                           const EncoderConfig& config);

// Standalone CVE evaluation (the scalar -> d embedding on its own).
std::vector<double> cve_embed(double x, CveNet& net);

// Embedding of a single triplet before any attention: cve_time(t) +
// var_embedding[f] + cve_value(v).
std::vector<double> embed_triplet(double t_scaled, std::size_t variable, double value_norm,
                                  EncoderParams& params, const EncoderConfig& config);

}  // namespace slac::model
