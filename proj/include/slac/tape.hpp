#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slac/rng.hpp"
#include "slac/tensor.hpp"

namespace slac::nn {

// A trainable tensor. Gradients are (re)assigned by Tape::backward; they are
// zeroed at the start of each backward pass for every bound parameter.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor::zeros(value.shape());
    }
};

// Handle to a node on a Tape.
struct Var {
    int id = -1;
};

// Define-by-run reverse-mode differentiation over an explicit op record.
// One tape owns one forward pass (typically a batch); backward traverses the
// record in exact reverse execution order from a single scalar loss root.
class Tape {
public:
    Var constant(Tensor v);
    Var param(Parameter& p);  // idempotent per parameter per tape

    Var add(Var a, Var b);          // same shape
    Var add_rowvec(Var a, Var b);   // broadcast {1,n} over {m,n}
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);          // elementwise
    Var scale(Var a, double c);
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var tanh(Var a);
    Var relu(Var a);

    // Row-wise softmax with max-subtraction; entries at column >= valid_cols
    // get probability exactly 0 and receive exactly zero gradient.
    Var softmax_rows(Var a);
    Var masked_softmax_rows(Var a, std::size_t valid_cols);
    // Softmax over the first `valid` entries of a flat vector/column.
    Var masked_softmax_vec(Var a, std::size_t valid);

    Var layer_norm_rows(Var x, Var gain, Var bias);  // eps 1e-5 inside the sqrt

    // Inverted-scaling dropout: identity when !training or rate == 0.
    Var dropout(Var x, double rate, bool training, Rng* rng);

    Var concat_cols(Var a, Var b);
    Var stack_rows(const std::vector<Var>& rows);  // each {1,n}
    Var gather_rows(Var table, std::vector<std::size_t> idx);

    Var mean_all(Var a);
    Var sum_all(Var a);

    // Fused scaled-dot-product multi-head self-attention. q, k, v are {n,d}
    // with d divisible by n_heads; rows/keys at index >= valid_rows are
    // padding and are masked out of every attention softmax (exact zeros).
    // Softmax probabilities are recomputed during backward so no n^2 buffer
    // is ever stored.
    Var multi_head_attention(Var q, Var k, Var v, std::size_t n_heads, std::size_t valid_rows);

    // Mean over rows of -log softmax(logits)[label]; labels one-hot {n,k}.
    Var cross_entropy(Var logits, const Tensor& onehot);

    // (1/n_total) * sum_ij mask_ij (pred_ij - target_ij)^2. Entries with
    // mask 0 are skipped entirely: they contribute exactly 0 to the value
    // and exactly zero gradient, whatever pred/target hold there.
    Var masked_mse(Var pred, const Tensor& target, const Tensor& mask, double n_total);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;
    std::size_t node_count() const { return nodes_.size(); }

    // Propagates from a scalar root. Zeroes the grad of every bound
    // parameter first, then accumulates; unbound/unreached parameters are
    // left untouched by design (callers zero what they own).
    void backward(Var root);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> backprop;  // empty for leaves/constants
        bool requires_grad = false;
        Parameter* bound = nullptr;
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
    Node& node(Var v);
    const Node& node(Var v) const;
    bool needs_grad(Var v) const { return node(v).requires_grad; }

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace slac::nn
