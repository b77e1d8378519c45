#include "slac/tape.hpp"

#include <cmath>
#include <cstddef>

#include "slac/error.hpp"

namespace slac::nn {

namespace {

// C(m,n) += A(m,k) * B(k,n)
void gemm_nn_acc(const double* A, const double* B, double* C,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = a_row[p];
            const double* b_row = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// C(m,n) += A(m,k) * B^T, with B stored (n,k)
void gemm_nt_acc(const double* A, const double* B, double* C,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b_row = B + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a_row[p] * b_row[p];
            c_row[j] += acc;
        }
    }
}

// C(m,n) += A^T * B, with A stored (k,m), B stored (k,n)
void gemm_tn_acc(const double* A, const double* B, double* C,
                 std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* a_row = A + p * m;
        const double* b_row = B + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = a_row[i];
            double* c_row = C + i * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Var v) {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw Error("tape: invalid node handle (backward without forward record?)");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw Error("tape: invalid node handle (backward without forward record?)");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
const Tensor& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::constant(Tensor v) {
    require_finite(v, "constant");
    return push(std::move(v), false, nullptr);
}

Var Tape::param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var{it->second};
    require_finite(p.value, "param");
    Var v = push(p.value, p.trainable, nullptr);
    node(v).bound = &p;
    param_nodes_[&p] = v.id;
    return v;
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "add");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
    require_finite(out, "add");
    bool rg = needs_grad(a) || needs_grad(b);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, ib = b.id, is = self.id;
        node(self).backprop = [ia, ib, is](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.nodes_[ia].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.nodes_[ib].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        };
    }
    return self;
}

Var Tape::add_rowvec(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const std::size_t m = ta.rows(), n = ta.cols();
    if (tb.size() != n)
        throw ShapeError("add_rowvec: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = ta;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += tb[j];
    require_finite(out, "add_rowvec");
    bool rg = needs_grad(a) || needs_grad(b);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, ib = b.id, is = self.id;
        node(self).backprop = [ia, ib, is, m, n](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.nodes_[ia].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.nodes_[ib].grad;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
        };
    }
    return self;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "sub");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
    require_finite(out, "sub");
    bool rg = needs_grad(a) || needs_grad(b);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, ib = b.id, is = self.id;
        node(self).backprop = [ia, ib, is](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.nodes_[ia].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.nodes_[ib].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        };
    }
    return self;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "mul");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
    require_finite(out, "mul");
    bool rg = needs_grad(a) || needs_grad(b);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, ib = b.id, is = self.id;
        node(self).backprop = [ia, ib, is](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& va = t.nodes_[ia].value;
            const Tensor& vb = t.nodes_[ib].value;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.nodes_[ia].grad;
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.nodes_[ib].grad;
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
            }
        };
    }
    return self;
}

Var Tape::scale(Var a, double c) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    require_finite(out, "scale");
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is, c](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        };
    }
    return self;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const std::size_t m = ta.rows(), k = ta.cols(), k2 = tb.rows(), n = tb.cols();
    if (k != k2)
        throw ShapeError("matmul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = Tensor::zeros({m, n});
    gemm_nn_acc(ta.data().data(), tb.data().data(), out.data().data(), m, k, n);
    require_finite(out, "matmul");
    bool rg = needs_grad(a) || needs_grad(b);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, ib = b.id, is = self.id;
        node(self).backprop = [ia, ib, is, m, k, n](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& va = t.nodes_[ia].value;
            const Tensor& vb = t.nodes_[ib].value;
            if (t.nodes_[ia].requires_grad)
                gemm_nt_acc(g.data().data(), vb.data().data(),
                            t.nodes_[ia].grad.data().data(), m, n, k);
            if (t.nodes_[ib].requires_grad)
                gemm_tn_acc(va.data().data(), g.data().data(),
                            t.nodes_[ib].grad.data().data(), k, m, n);
        };
    }
    return self;
}

Var Tape::transpose(Var a) {
    const Tensor& ta = value(a);
    const std::size_t m = ta.rows(), n = ta.cols();
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ta[i * n + j];
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is, m, n](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        };
    }
    return self;
}

Var Tape::tanh(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    require_finite(out, "tanh");
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& y = t.nodes_[is].value;
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        };
    }
    return self;
}

Var Tape::relu(Var a) {
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (out[i] < 0.0) out[i] = 0.0;
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& x = t.nodes_[ia].value;
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) ga[i] += g[i];
        };
    }
    return self;
}

Var Tape::softmax_rows(Var a) { return masked_softmax_rows(a, value(a).cols()); }

Var Tape::masked_softmax_rows(Var a, std::size_t valid_cols) {
    const Tensor& ta = value(a);
    const std::size_t m = ta.rows(), n = ta.cols();
    if (valid_cols == 0 || valid_cols > n)
        throw ShapeError("masked_softmax_rows: valid_cols out of range for " + ta.shape_str());
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = ta.data().data() + i * n;
        double* y = out.data().data() + i * n;
        double mx = x[0];
        for (std::size_t j = 1; j < valid_cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < valid_cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (std::size_t j = 0; j < valid_cols; ++j) y[j] /= sum;
    }
    require_finite(out, "softmax");
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is, m, n, valid_cols](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& y = t.nodes_[is].value;
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < m; ++i) {
                const double* gy = g.data().data() + i * n;
                const double* py = y.data().data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < valid_cols; ++j) dot += gy[j] * py[j];
                double* gx = ga.data().data() + i * n;
                for (std::size_t j = 0; j < valid_cols; ++j) gx[j] += py[j] * (gy[j] - dot);
            }
        };
    }
    return self;
}

Var Tape::masked_softmax_vec(Var a, std::size_t valid) {
    const Tensor& ta = value(a);
    const std::size_t n = ta.size();
    if (valid == 0 || valid > n)
        throw ShapeError("masked_softmax_vec: valid out of range for " + ta.shape_str());
    Tensor out = Tensor::zeros(ta.shape());
    const double* x = ta.data().data();
    double* y = out.data().data();
    double mx = x[0];
    for (std::size_t j = 1; j < valid; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < valid; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
    }
    for (std::size_t j = 0; j < valid; ++j) y[j] /= sum;
    require_finite(out, "softmax");
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is, valid](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& y2 = t.nodes_[is].value;
            Tensor& ga = t.nodes_[ia].grad;
            double dot = 0.0;
            for (std::size_t j = 0; j < valid; ++j) dot += g[j] * y2[j];
            for (std::size_t j = 0; j < valid; ++j) ga[j] += y2[j] * (g[j] - dot);
        };
    }
    return self;
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    const std::size_t m = tx.rows(), n = tx.cols();
    if (tg.size() != n || tb.size() != n)
        throw ShapeError("layer_norm: gain/bias length must match " + tx.shape_str());
    Tensor out = Tensor::zeros({m, n});
    Tensor xhat = Tensor::zeros({m, n});
    Tensor inv_std = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = tx.data().data() + i * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(n);
        const double s = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[i] = s;
        for (std::size_t j = 0; j < n; ++j) {
            const double xh = (xr[j] - mean) * s;
            xhat[i * n + j] = xh;
            out[i * n + j] = tg[j] * xh + tb[j];
        }
    }
    require_finite(out, "layer_norm");
    bool rg = needs_grad(x) || needs_grad(gain) || needs_grad(bias);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ix = x.id, ig = gain.id, ib = bias.id, is = self.id;
        node(self).backprop = [ix, ig, ib, is, m, n, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& tg2 = t.nodes_[ig].value;
            for (std::size_t i = 0; i < m; ++i) {
                const double* gy = g.data().data() + i * n;
                const double* xh = xhat.data().data() + i * n;
                if (t.nodes_[ig].requires_grad) {
                    Tensor& gg = t.nodes_[ig].grad;
                    for (std::size_t j = 0; j < n; ++j) gg[j] += gy[j] * xh[j];
                }
                if (t.nodes_[ib].requires_grad) {
                    Tensor& gb = t.nodes_[ib].grad;
                    for (std::size_t j = 0; j < n; ++j) gb[j] += gy[j];
                }
                if (t.nodes_[ix].requires_grad) {
                    // dx = s * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                    double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dxh = gy[j] * tg2[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[j];
                    }
                    mean_dxh /= static_cast<double>(n);
                    mean_dxh_xh /= static_cast<double>(n);
                    Tensor& gx = t.nodes_[ix].grad;
                    double* gxr = gx.data().data() + i * n;
                    const double s = inv_std[i];
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dxh = gy[j] * tg2[j];
                        gxr[j] += s * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
            }
        };
    }
    return self;
}

Var Tape::dropout(Var x, double rate, bool training, Rng* rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    if (rng == nullptr) throw Error("dropout: training mode requires an rng");
    const Tensor& tx = value(x);
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor mask = Tensor::zeros(tx.shape());
    Tensor out = tx;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (rng->uniform() < rate) {
            out[i] = 0.0;
        } else {
            mask[i] = keep_scale;
            out[i] *= keep_scale;
        }
    }
    bool rg = needs_grad(x);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ix = x.id, is = self.id;
        node(self).backprop = [ix, is, mask = std::move(mask)](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            Tensor& gx = t.nodes_[ix].grad;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
        };
    }
    return self;
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const std::size_t m = ta.rows(), na = ta.cols(), nb = tb.cols();
    if (tb.rows() != m)
        throw ShapeError("concat_cols: row mismatch " + ta.shape_str() + " vs " + tb.shape_str());
    Tensor out = Tensor::zeros({m, na + nb});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = ta[i * na + j];
        for (std::size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = tb[i * nb + j];
    }
    bool rg = needs_grad(a) || needs_grad(b);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, ib = b.id, is = self.id;
        node(self).backprop = [ia, ib, is, m, na, nb](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            if (t.nodes_[ia].requires_grad) {
                Tensor& ga = t.nodes_[ia].grad;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < na; ++j) ga[i * na + j] += g[i * (na + nb) + j];
            }
            if (t.nodes_[ib].requires_grad) {
                Tensor& gb = t.nodes_[ib].grad;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < nb; ++j) gb[i * nb + j] += g[i * (na + nb) + na + j];
            }
        };
    }
    return self;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const std::size_t n = value(rows[0]).size();
    Tensor out = Tensor::zeros({rows.size(), n});
    bool rg = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& r = value(rows[i]);
        if (r.size() != n) throw ShapeError("stack_rows: inconsistent row length " + r.shape_str());
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = r[j];
        rg = rg || needs_grad(rows[i]);
    }
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<int> ids(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) ids[i] = rows[i].id;
        int is = self.id;
        node(self).backprop = [ids = std::move(ids), is, n](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (!t.nodes_[ids[i]].requires_grad) continue;
                Tensor& gr = t.nodes_[ids[i]].grad;
                for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
            }
        };
    }
    return self;
}

Var Tape::gather_rows(Var table, std::vector<std::size_t> idx) {
    const Tensor& tt = value(table);
    const std::size_t rows = tt.rows(), n = tt.cols();
    for (std::size_t r : idx)
        if (r >= rows) throw ShapeError("gather_rows: index out of range for " + tt.shape_str());
    Tensor out = Tensor::zeros({idx.size(), n});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = tt[idx[i] * n + j];
    bool rg = needs_grad(table);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int it = table.id, is = self.id;
        node(self).backprop = [it, is, n, idx = std::move(idx)](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            Tensor& gt = t.nodes_[it].grad;
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < n; ++j) gt[idx[i] * n + j] += g[i * n + j];
        };
    }
    return self;
}

Var Tape::mean_all(Var a) {
    const Tensor& ta = value(a);
    double sum = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) sum += ta[i];
    const double inv = 1.0 / static_cast<double>(ta.size());
    Tensor out = Tensor::scalar(sum * inv);
    require_finite(out, "mean");
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is, inv](Tape& t) {
            const double g = t.nodes_[is].grad[0];
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * inv;
        };
    }
    return self;
}

Var Tape::sum_all(Var a) {
    const Tensor& ta = value(a);
    double sum = 0.0;
    for (std::size_t i = 0; i < ta.size(); ++i) sum += ta[i];
    Tensor out = Tensor::scalar(sum);
    require_finite(out, "sum");
    bool rg = needs_grad(a);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ia = a.id, is = self.id;
        node(self).backprop = [ia, is](Tape& t) {
            const double g = t.nodes_[is].grad[0];
            Tensor& ga = t.nodes_[ia].grad;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        };
    }
    return self;
}

Var Tape::multi_head_attention(Var q, Var k, Var v, std::size_t n_heads, std::size_t valid_rows) {
    const Tensor& tq = value(q);
    const Tensor& tk = value(k);
    const Tensor& tv = value(v);
    const std::size_t n = tq.rows(), d = tq.cols();
    require_same_shape(tq, tk, "multi_head_attention");
    require_same_shape(tq, tv, "multi_head_attention");
    if (n_heads == 0 || d % n_heads != 0)
        throw ShapeError("multi_head_attention: width " + tq.shape_str() + " not divisible by heads");
    if (valid_rows == 0 || valid_rows > n)
        throw ShapeError("multi_head_attention: valid_rows out of range");
    const std::size_t dh = d / n_heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // One probability row at a time; padded keys j >= valid_rows never enter.
    // Captured by value: the backward closure outlives this stack frame.
    auto softmax_row = [d, dh, valid_rows, att_scale](const Tensor& tq_, const Tensor& tk_,
                                                      std::size_t h, std::size_t i,
                                                      std::vector<double>& probs) {
        const std::size_t off = h * dh;
        const double* qi = tq_.data().data() + i * d + off;
        double mx = -1e308;
        for (std::size_t j = 0; j < valid_rows; ++j) {
            const double* kj = tk_.data().data() + j * d + off;
            double s = 0.0;
            for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
            probs[j] = s * att_scale;
            mx = std::max(mx, probs[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < valid_rows; ++j) {
            probs[j] = std::exp(probs[j] - mx);
            sum += probs[j];
        }
        for (std::size_t j = 0; j < valid_rows; ++j) probs[j] /= sum;
    };

    Tensor out = Tensor::zeros({n, d});
    std::vector<double> probs(valid_rows);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
            softmax_row(tq, tk, h, i, probs);
            double* oi = out.data().data() + i * d + off;
            for (std::size_t j = 0; j < valid_rows; ++j) {
                const double p = probs[j];
                const double* vj = tv.data().data() + j * d + off;
                for (std::size_t c = 0; c < dh; ++c) oi[c] += p * vj[c];
            }
        }
    }
    require_finite(out, "multi_head_attention");

    bool rg = needs_grad(q) || needs_grad(k) || needs_grad(v);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int iq = q.id, ik = k.id, iv = v.id, is = self.id;
        node(self).backprop = [iq, ik, iv, is, n, d, dh, n_heads, valid_rows, att_scale,
                               softmax_row](Tape& t) {
            const Tensor& g = t.nodes_[is].grad;
            const Tensor& tq2 = t.nodes_[iq].value;
            const Tensor& tk2 = t.nodes_[ik].value;
            const Tensor& tv2 = t.nodes_[iv].value;
            Tensor& gq = t.nodes_[iq].grad;
            Tensor& gk = t.nodes_[ik].grad;
            Tensor& gv = t.nodes_[iv].grad;
            std::vector<double> probs(valid_rows), dprobs(valid_rows);
            for (std::size_t h = 0; h < n_heads; ++h) {
                const std::size_t off = h * dh;
                for (std::size_t i = 0; i < n; ++i) {
                    softmax_row(tq2, tk2, h, i, probs);
                    const double* go = g.data().data() + i * d + off;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < valid_rows; ++j) {
                        const double* vj = tv2.data().data() + j * d + off;
                        double dp = 0.0;
                        for (std::size_t c = 0; c < dh; ++c) dp += go[c] * vj[c];
                        dprobs[j] = dp;
                        dot += dp * probs[j];
                        // dV_j += p_ij * dOut_i
                        double* gvj = gv.data().data() + j * d + off;
                        const double p = probs[j];
                        for (std::size_t c = 0; c < dh; ++c) gvj[c] += p * go[c];
                    }
                    const double* qi = tq2.data().data() + i * d + off;
                    double* gqi = gq.data().data() + i * d + off;
                    for (std::size_t j = 0; j < valid_rows; ++j) {
                        const double ds = probs[j] * (dprobs[j] - dot) * att_scale;
                        const double* kj = tk2.data().data() + j * d + off;
                        double* gkj = gk.data().data() + j * d + off;
                        for (std::size_t c = 0; c < dh; ++c) {
                            gqi[c] += ds * kj[c];
                            gkj[c] += ds * qi[c];
                        }
                    }
                }
            }
        };
    }
    return self;
}

Var Tape::cross_entropy(Var logits, const Tensor& onehot) {
    const Tensor& tl = value(logits);
    require_same_shape(tl, onehot, "cross_entropy");
    const std::size_t n = tl.rows(), kk = tl.cols();
    if (kk < 2) throw ShapeError("cross_entropy: need >= 2 classes, got " + tl.shape_str());
    // log-softmax per row, accumulate -log p[true]
    Tensor softmax = Tensor::zeros({n, kk});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* x = tl.data().data() + i * kk;
        double mx = x[0];
        for (std::size_t j = 1; j < kk; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < kk; ++j) sum += std::exp(x[j] - mx);
        const double log_z = mx + std::log(sum);
        for (std::size_t j = 0; j < kk; ++j) {
            softmax[i * kk + j] = std::exp(x[j] - log_z);
            if (onehot[i * kk + j] != 0.0) loss -= onehot[i * kk + j] * (x[j] - log_z);
        }
    }
    loss /= static_cast<double>(n);
    Tensor out = Tensor::scalar(loss);
    require_finite(out, "cross_entropy");
    bool rg = needs_grad(logits);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int il = logits.id, is = self.id;
        node(self).backprop = [il, is, n, kk, softmax = std::move(softmax), onehot](Tape& t) {
            const double g = t.nodes_[is].grad[0] / static_cast<double>(n);
            Tensor& gl = t.nodes_[il].grad;
            for (std::size_t i = 0; i < n * kk; ++i) gl[i] += g * (softmax[i] - onehot[i]);
        };
    }
    return self;
}

Var Tape::masked_mse(Var pred, const Tensor& target, const Tensor& mask, double n_total) {
    const Tensor& tp = value(pred);
    require_same_shape(tp, target, "masked_mse");
    require_same_shape(tp, mask, "masked_mse");
    if (n_total < 1.0) throw ShapeError("masked_mse: n_total must be >= 1");
    double loss = 0.0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
        if (mask[i] == 0.0) continue;
        const double diff = tp[i] - target[i];
        loss += mask[i] * diff * diff;
    }
    loss /= n_total;
    Tensor out = Tensor::scalar(loss);
    require_finite(out, "masked_mse");
    bool rg = needs_grad(pred);
    Var self = push(std::move(out), rg, nullptr);
    if (rg) {
        int ip = pred.id, is = self.id;
        node(self).backprop = [ip, is, n_total, target, mask](Tape& t) {
            const double g = t.nodes_[is].grad[0];
            const Tensor& tp2 = t.nodes_[ip].value;
            Tensor& gp = t.nodes_[ip].grad;
            for (std::size_t i = 0; i < tp2.size(); ++i) {
                if (mask[i] == 0.0) continue;
                gp[i] += g * 2.0 * mask[i] * (tp2[i] - target[i]) / n_total;
            }
        };
    }
    return self;
}

void Tape::backward(Var root) {
    Node& r = node(root);
    if (!r.value.is_scalar())
        throw ShapeError("backward: root must be scalar, got " + r.value.shape_str());
    if (!r.requires_grad)
        throw Error("backward: root does not depend on any trainable parameter");
    for (Node& nd : nodes_) {
        if (nd.requires_grad) {
            nd.grad = Tensor::zeros(nd.value.shape());
        }
        if (nd.bound != nullptr) nd.bound->grad = Tensor::zeros(nd.value.shape());
    }
    node(root).grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& nd = nodes_[i];
        if (nd.requires_grad && nd.backprop) nd.backprop(*this);
    }
    for (Node& nd : nodes_) {
        if (nd.bound != nullptr && nd.requires_grad) {
            require_finite(nd.grad, "backward");
            nd.bound->grad = nd.grad;
        }
    }
}

}  // namespace slac::nn
