#include "slac/encoder.hpp"

#include <cmath>
#include <string>

#include "slac/error.hpp"

namespace slac::model {

using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

void EncoderConfig::validate() const {
    if (d == 0 || ffn_units == 0 || n_blocks == 0 || n_heads == 0 || max_triplets == 0)
        throw ConfigError("encoder: all sizes must be >= 1");
    if (d % n_heads != 0) throw ConfigError("encoder: d must be divisible by n_heads");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder: dropout must be in [0,1)");
    if (n_variables == 0) throw ConfigError("encoder: n_variables must be >= 1");
}

std::uint64_t EncoderConfig::hash() const {
    std::string s = std::to_string(d) + "|" + std::to_string(ffn_units) + "|" +
                    std::to_string(n_blocks) + "|" + std::to_string(n_heads) + "|" +
                    std::to_string(dropout) + "|" + std::to_string(max_triplets) + "|" +
                    std::to_string(n_variables) + "|" + std::to_string(static_dim);
    return Rng::fnv1a(s);
}

std::vector<Parameter*> EncoderParams::all() {
    std::vector<Parameter*> out = {&cve_time.w1,  &cve_time.b1,  &cve_time.w2,
                                   &cve_value.w1, &cve_value.b1, &cve_value.w2,
                                   &var_embedding};
    for (auto& b : blocks) {
        for (Parameter* p : {&b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo,
                             &b.ln1_gain, &b.ln1_bias, &b.ffn_w1, &b.ffn_b1, &b.ffn_w2,
                             &b.ffn_b2, &b.ln2_gain, &b.ln2_bias})
            out.push_back(p);
    }
    out.push_back(&fusion_w);
    out.push_back(&fusion_b);
    out.push_back(&fusion_u);
    if (has_static) {
        out.push_back(&static_w1);
        out.push_back(&static_b1);
        out.push_back(&static_w2);
    }
    return out;
}

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t = Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
    return t;
}

Parameter make_weight(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
    return Parameter(name, glorot(rows, cols, rng));
}

Parameter make_zeros(const std::string& name, std::size_t rows, std::size_t cols) {
    return Parameter(name, Tensor::zeros({rows, cols}));
}

Parameter make_ones(const std::string& name, std::size_t cols) {
    return Parameter(name, Tensor::full({1, cols}, 1.0));
}

std::size_t cve_hidden(std::size_t d) {
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
}

CveNet make_cve(const std::string& prefix, std::size_t d, Rng& rng) {
    const std::size_t h = cve_hidden(d);
    CveNet net;
    net.w1 = make_weight(prefix + ".w1", 1, h, rng);
    net.b1 = make_zeros(prefix + ".b1", 1, h);
    net.w2 = make_weight(prefix + ".w2", h, d, rng);
    return net;
}

// H = tanh(x * w1 + b1); out = H * w2   (x is {n,1})
Var cve_on_tape(Tape& tape, Var x, CveNet& net) {
    Var h = tape.tanh(tape.add_rowvec(tape.matmul(x, tape.param(net.w1)), tape.param(net.b1)));
    return tape.matmul(h, tape.param(net.w2));
}

}  // namespace

EncoderParams init_params(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng = Rng::substream(seed, "encoder-init");
    const std::size_t d = config.d;

    EncoderParams p;
    p.cve_time = make_cve("cve_time", d, rng);
    p.cve_value = make_cve("cve_value", d, rng);
    p.var_embedding = make_weight("var_embedding", config.n_variables, d, rng);

    p.blocks.resize(config.n_blocks);
    for (std::size_t b = 0; b < config.n_blocks; ++b) {
        const std::string pre = "block" + std::to_string(b) + ".";
        TransformerBlockParams& blk = p.blocks[b];
        blk.wq = make_weight(pre + "wq", d, d, rng);
        blk.bq = make_zeros(pre + "bq", 1, d);
        blk.wk = make_weight(pre + "wk", d, d, rng);
        blk.bk = make_zeros(pre + "bk", 1, d);
        blk.wv = make_weight(pre + "wv", d, d, rng);
        blk.bv = make_zeros(pre + "bv", 1, d);
        blk.wo = make_weight(pre + "wo", d, d, rng);
        blk.bo = make_zeros(pre + "bo", 1, d);
        blk.ln1_gain = make_ones(pre + "ln1_gain", d);
        blk.ln1_bias = make_zeros(pre + "ln1_bias", 1, d);
        blk.ffn_w1 = make_weight(pre + "ffn_w1", d, config.ffn_units, rng);
        blk.ffn_b1 = make_zeros(pre + "ffn_b1", 1, config.ffn_units);
        blk.ffn_w2 = make_weight(pre + "ffn_w2", config.ffn_units, d, rng);
        blk.ffn_b2 = make_zeros(pre + "ffn_b2", 1, d);
        blk.ln2_gain = make_ones(pre + "ln2_gain", d);
        blk.ln2_bias = make_zeros(pre + "ln2_bias", 1, d);
    }

    p.fusion_w = make_weight("fusion.w", d, d, rng);
    p.fusion_b = make_zeros("fusion.b", 1, d);
    p.fusion_u = make_weight("fusion.u", d, 1, rng);

    if (config.static_dim > 0) {
        p.has_static = true;
        const std::size_t h = cve_hidden(d);
        p.static_w1 = make_weight("static.w1", config.static_dim, h, rng);
        p.static_b1 = make_zeros("static.b1", 1, h);
        p.static_w2 = make_weight("static.w2", h, d, rng);
    }
    return p;
}

std::vector<EncTriplet> sample_triplets(const data::Sample& sample, std::size_t bin_limit) {
    std::vector<EncTriplet> out;
    const double window_len = sample.window_len();
    out.reserve(sample.bins.size());
    for (const data::BinValue& bv : sample.bins) {
        if (bv.bin >= bin_limit) continue;
        out.push_back({sample.bin_time(bv.bin) / window_len, bv.variable, bv.value});
    }
    return out;
}

Var encode_on_tape(Tape& tape, std::span<const EncTriplet> triplets, EncoderParams& params,
                   const EncoderConfig& config, RunMode mode, Rng* dropout_rng,
                   std::size_t pad_slots, const std::vector<double>* static_features,
                   EncodeDiag* diag) {
    config.validate();
    if (triplets.empty())
        throw PreconditionError("encode: sample has no observed values (should have been dropped)");

    // Deterministic even-stride subset when over the cap.
    std::vector<std::size_t> pick;
    const std::size_t n_raw = triplets.size();
    const std::size_t n = std::min(n_raw, config.max_triplets);
    pick.reserve(n);
    if (n_raw <= config.max_triplets) {
        for (std::size_t i = 0; i < n_raw; ++i) pick.push_back(i);
    } else {
        for (std::size_t j = 0; j < n; ++j) pick.push_back(j * n_raw / n);
    }

    const std::size_t rows = n + pad_slots;
    std::vector<double> times(rows, 0.0), values(rows, 0.0);
    std::vector<std::size_t> var_ids(rows, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const EncTriplet& tr = triplets[pick[i]];
        if (tr.variable >= config.n_variables)
            throw DataError("encode: variable id " + std::to_string(tr.variable) +
                            " out of range for catalog of " + std::to_string(config.n_variables));
        times[i] = tr.t_scaled;
        values[i] = tr.value;
        var_ids[i] = tr.variable;
    }

    const bool training = mode == RunMode::train;
    Var t_col = tape.constant(Tensor::column(std::move(times)));
    Var v_col = tape.constant(Tensor::column(std::move(values)));

    Var x = tape.add(tape.add(cve_on_tape(tape, t_col, params.cve_time),
                              tape.gather_rows(tape.param(params.var_embedding), var_ids)),
                     cve_on_tape(tape, v_col, params.cve_value));

    for (TransformerBlockParams& blk : params.blocks) {
        Var q = tape.add_rowvec(tape.matmul(x, tape.param(blk.wq)), tape.param(blk.bq));
        Var k = tape.add_rowvec(tape.matmul(x, tape.param(blk.wk)), tape.param(blk.bk));
        Var v = tape.add_rowvec(tape.matmul(x, tape.param(blk.wv)), tape.param(blk.bv));
        Var att = tape.multi_head_attention(q, k, v, config.n_heads, n);
        att = tape.add_rowvec(tape.matmul(att, tape.param(blk.wo)), tape.param(blk.bo));
        att = tape.dropout(att, config.dropout, training, dropout_rng);
        x = tape.layer_norm_rows(tape.add(x, att), tape.param(blk.ln1_gain),
                                 tape.param(blk.ln1_bias));

        Var h = tape.relu(
            tape.add_rowvec(tape.matmul(x, tape.param(blk.ffn_w1)), tape.param(blk.ffn_b1)));
        h = tape.add_rowvec(tape.matmul(h, tape.param(blk.ffn_w2)), tape.param(blk.ffn_b2));
        h = tape.dropout(h, config.dropout, training, dropout_rng);
        x = tape.layer_norm_rows(tape.add(x, h), tape.param(blk.ln2_gain),
                                 tape.param(blk.ln2_bias));
    }

    // Fusion attention: learned scoring network, softmax over real triplets,
    // weighted sum of contextual embeddings.
    Var scores = tape.matmul(
        tape.tanh(tape.add_rowvec(tape.matmul(x, tape.param(params.fusion_w)),
                                  tape.param(params.fusion_b))),
        tape.param(params.fusion_u));
    Var alpha = tape.masked_softmax_vec(scores, n);
    Var rep = tape.transpose(tape.matmul(tape.transpose(x), alpha));  // {1, d}

    if (diag != nullptr) {
        const Tensor& a = tape.value(alpha);
        diag->fusion_weights.assign(a.data().begin(), a.data().end());
        diag->encoded_triplets = n;
    }

    if (params.has_static) {
        if (static_features == nullptr || static_features->size() != config.static_dim)
            throw DataError("encode: static feature vector missing or of wrong length");
        Var s_row = tape.constant(Tensor::row(*static_features));
        Var hs = tape.tanh(tape.add_rowvec(tape.matmul(s_row, tape.param(params.static_w1)),
                                           tape.param(params.static_b1)));
        Var se = tape.matmul(hs, tape.param(params.static_w2));
        rep = tape.concat_cols(rep, se);
    }
    return rep;
}

std::vector<double> encode(const data::Sample& sample, EncoderParams& params,
                           const EncoderConfig& config) {
    Tape tape;
    auto trips = sample_triplets(sample);
    Var rep = encode_on_tape(tape, trips, params, config, RunMode::infer, nullptr);
    return tape.value(rep).data();
}

std::vector<double> cve_embed(double x, CveNet& net) {
    Tape tape;
    Var col = tape.constant(Tensor::column({x}));
    Var out = cve_on_tape(tape, col, net);
    return tape.value(out).data();
}

std::vector<double> embed_triplet(double t_scaled, std::size_t variable, double value_norm,
                                  EncoderParams& params, const EncoderConfig& config) {
    if (variable >= config.n_variables)
        throw DataError("embed_triplet: variable id out of range");
    Tape tape;
    Var t_col = tape.constant(Tensor::column({t_scaled}));
    Var v_col = tape.constant(Tensor::column({value_norm}));
    Var x = tape.add(tape.add(cve_on_tape(tape, t_col, params.cve_time),
                              tape.gather_rows(tape.param(params.var_embedding), {variable})),
                     cve_on_tape(tape, v_col, params.cve_value));
    return tape.value(x).data();
}

}  // namespace slac::model
