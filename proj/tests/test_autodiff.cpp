#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "slac/error.hpp"
#include "slac/rng.hpp"
#include "slac/tape.hpp"

using namespace slac;
using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

TEST_CASE("d(x^2)/dx at x=3 is 6") {
    Parameter x("x", Tensor::row({3.0}));
    Tape tape;
    Var xv = tape.param(x);
    Var loss = tape.sum_all(tape.mul(xv, xv));
    tape.backward(loss);
    CHECK(x.grad[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward without a recorded forward is an error") {
    Tape tape;
    CHECK_THROWS_AS(tape.backward(Var{}), Error);
    Var c = tape.constant(Tensor::scalar(1.0));
    CHECK_THROWS_AS(tape.backward(c), Error);
}

TEST_CASE("backward from a non-scalar root is an error") {
    Parameter x("x", Tensor::row({1.0, 2.0}));
    Tape tape;
    Var v = tape.param(x);
    CHECK_THROWS_AS(tape.backward(v), ShapeError);
}

TEST_CASE("masked mse with a zero mask zeroes every gradient") {
    Parameter w("w", Tensor::matrix(2, 2, {1, 2, 3, 4}));
    Tape tape;
    Var pred = tape.matmul(tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1})), tape.param(w));
    Var loss = tape.masked_mse(pred, Tensor::zeros({2, 2}), Tensor::zeros({2, 2}), 2.0);
    tape.backward(loss);
    CHECK(w.grad.data() == std::vector<double>{0, 0, 0, 0});
}

TEST_CASE("a parameter not reached by the loss keeps a zero gradient") {
    Parameter used("used", Tensor::row({2.0}));
    Parameter unused("unused", Tensor::row({5.0}));
    Tape tape;
    Var u = tape.param(used);
    tape.param(unused);
    Var loss = tape.sum_all(tape.mul(u, u));
    tape.backward(loss);
    CHECK(used.grad[0] == doctest::Approx(4.0));
    CHECK(unused.grad[0] == 0.0);
}

TEST_CASE("finite differences confirm gradients of a small MLP classifier") {
    Rng rng(42);
    auto rand_tensor = [&](std::size_t r, std::size_t c) {
        Tensor t = Tensor::zeros({r, c});
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.8, 0.8);
        return t;
    };
    Parameter w1("w1", rand_tensor(3, 4)), b1("b1", rand_tensor(1, 4));
    Parameter w2("w2", rand_tensor(4, 2)), b2("b2", rand_tensor(1, 2));
    Tensor input = rand_tensor(5, 3);
    Tensor onehot = Tensor::zeros({5, 2});
    for (std::size_t i = 0; i < 5; ++i) onehot[i * 2 + (i % 2)] = 1.0;

    auto run = [&](bool grads) {
        Tape tape;
        Var x = tape.constant(input);
        Var h = tape.tanh(tape.add_rowvec(tape.matmul(x, tape.param(w1)), tape.param(b1)));
        Var logits = tape.add_rowvec(tape.matmul(h, tape.param(w2)), tape.param(b2));
        Var loss = tape.cross_entropy(logits, onehot);
        if (grads) tape.backward(loss);
        return tape.value(loss)[0];
    };
    auto report = testutil::check_gradients({&w1, &b1, &w2, &b2}, run);
    CAPTURE(report.worst_param);
    CHECK(report.max_rel_err < 1e-4);
    CHECK(report.entries_checked == 3 * 4 + 4 + 4 * 2 + 2);
}

TEST_CASE("finite differences confirm gradients through every op") {
    // One graph touching matmul, transpose, add, sub, mul, scale, relu, tanh,
    // softmaxes, layer norm, attention, gather, stack, concat, dropout and
    // both losses.
    Rng rng(7);
    auto rand_tensor = [&](std::size_t r, std::size_t c, double scale = 0.7) {
        Tensor t = Tensor::zeros({r, c});
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-scale, scale);
        return t;
    };
    const std::size_t n = 5, d = 4;
    Parameter table("table", rand_tensor(3, d));
    Parameter wq("wq", rand_tensor(d, d)), wk("wk", rand_tensor(d, d)), wv("wv", rand_tensor(d, d));
    Parameter gain("gain", Tensor::full({1, d}, 1.1)), bias("bias", rand_tensor(1, d));
    Parameter w_out("w_out", rand_tensor(d, 3)), b_out("b_out", rand_tensor(1, 3));
    Parameter w_extra("w_extra", rand_tensor(1, 2));
    Tensor base = rand_tensor(n, d, 1.2);
    Tensor score_dir = Tensor::column({1.0, -0.5, 0.25, 0.8});
    Tensor onehot = Tensor::zeros({n, 3});
    for (std::size_t i = 0; i < n; ++i) onehot[i * 3 + (i % 3)] = 1.0;
    Tensor target = rand_tensor(n, 3);
    Tensor mask = Tensor::matrix(n, 3, {1, 0, 1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0, 1});

    auto run = [&](bool grads) {
        Tape tape;
        Rng drop_rng(1234);  // identical mask on every call
        Var x = tape.constant(base);
        Var emb = tape.gather_rows(tape.param(table), {0, 1, 2, 1, 0});
        x = tape.add(x, emb);
        Var q = tape.matmul(x, tape.param(wq));
        Var k = tape.matmul(x, tape.param(wk));
        Var v = tape.matmul(x, tape.param(wv));
        Var att = tape.multi_head_attention(q, k, v, 2, n - 1);  // one padded row
        x = tape.layer_norm_rows(tape.add(x, att), tape.param(gain), tape.param(bias));
        x = tape.dropout(x, 0.25, true, &drop_rng);
        Var sm = tape.masked_softmax_rows(tape.scale(x, 1.7), d - 1);
        x = tape.sub(tape.mul(x, sm), tape.relu(tape.transpose(tape.transpose(x))));

        Var scores = tape.matmul(tape.tanh(x), tape.constant(score_dir));
        Var alpha = tape.masked_softmax_vec(scores, n - 1);
        Var fused = tape.transpose(tape.matmul(tape.transpose(x), alpha));  // {1, d}

        std::vector<Var> rows;
        for (std::size_t i = 0; i < n; ++i) rows.push_back(fused);
        Var stacked = tape.stack_rows(rows);
        Var halves = tape.concat_cols(tape.matmul(stacked, tape.param(w_out)),
                                      tape.matmul(stacked, tape.param(w_out)));
        Var logits = tape.add_rowvec(tape.matmul(stacked, tape.param(w_out)), tape.param(b_out));
        Var ce = tape.cross_entropy(logits, onehot);
        Var mse = tape.masked_mse(logits, target, mask, static_cast<double>(n));
        Var extra = tape.mean_all(tape.param(w_extra));
        Var loss = tape.add(tape.add(ce, tape.scale(mse, 0.5)),
                            tape.add(tape.scale(extra, 0.1), tape.scale(tape.mean_all(halves), 0.2)));
        if (grads) tape.backward(loss);
        return tape.value(loss)[0];
    };

    auto report = testutil::check_gradients(
        {&table, &wq, &wk, &wv, &gain, &bias, &w_out, &b_out, &w_extra}, run);
    CAPTURE(report.worst_param);
    CAPTURE(report.entries_checked);
    CHECK(report.max_rel_err < 1e-4);
}
