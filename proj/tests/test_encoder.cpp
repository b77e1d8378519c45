#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "slac/encoder.hpp"
#include "slac/error.hpp"

using namespace slac;
using namespace slac::model;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.d = 8;
    cfg.ffn_units = 12;
    cfg.n_blocks = 1;
    cfg.n_heads = 2;
    cfg.dropout = 0.2;
    cfg.max_triplets = 64;
    cfg.n_variables = 3;
    return cfg;
}

std::vector<EncTriplet> some_triplets() {
    return {{0.01, 0, -0.3}, {0.25, 1, 1.2}, {0.26, 2, 0.4}, {0.7, 0, 0.9}, {0.99, 1, -1.1}};
}

}  // namespace

TEST_CASE("cve embedding is deterministic, d-wide and continuous") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 5);
    auto a = cve_embed(0.37, params.cve_time);
    auto b = cve_embed(0.37, params.cve_time);
    CHECK(a == b);
    CHECK(a.size() == cfg.d);
    auto c = cve_embed(0.37 + 1e-8, params.cve_time);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - c[i]) < 1e-6);
}

TEST_CASE("triplet embedding is the sum of its three parts") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 5);

    SUBCASE("zeroed CVE networks leave exactly the variable row") {
        params.cve_time.w2.value.fill(0.0);
        params.cve_value.w2.value.fill(0.0);
        auto emb = embed_triplet(0.4, 1, 0.2, params, cfg);
        for (std::size_t j = 0; j < cfg.d; ++j)
            CHECK(emb[j] == params.var_embedding.value.at(1, j));
    }
    SUBCASE("triplets differing only in variable differ by the table rows") {
        auto e1 = embed_triplet(0.4, 1, 0.2, params, cfg);
        auto e2 = embed_triplet(0.4, 2, 0.2, params, cfg);
        for (std::size_t j = 0; j < cfg.d; ++j) {
            const double table_diff =
                params.var_embedding.value.at(1, j) - params.var_embedding.value.at(2, j);
            CHECK(e1[j] - e2[j] == doctest::Approx(table_diff).epsilon(1e-12));
        }
    }
    SUBCASE("out-of-range variable id is rejected") {
        CHECK_THROWS_AS(embed_triplet(0.4, 3, 0.2, params, cfg), DataError);
    }
}

TEST_CASE("init_params is seed-deterministic with consistent shapes") {
    auto cfg = tiny_config();
    auto a = init_params(cfg, 11);
    auto b = init_params(cfg, 11);
    auto c = init_params(cfg, 12);
    auto pa = a.all(), pb = b.all(), pc = c.all();
    REQUIRE(pa.size() == pb.size());
    bool any_differ = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->value.data() == pb[i]->value.data());
        if (pa[i]->value.data() != pc[i]->value.data()) any_differ = true;
    }
    CHECK(any_differ);
    CHECK(a.var_embedding.value.shape() == std::vector<std::size_t>{3, 8});
    CHECK(a.blocks.size() == 1);
    CHECK(a.blocks[0].ffn_w1.value.shape() == std::vector<std::size_t>{8, 12});
    CHECK(a.cve_time.w1.value.shape() == std::vector<std::size_t>{1, 3});  // ceil(sqrt(8)) = 3
}

TEST_CASE("a single-triplet sample gets fusion weight exactly 1") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 3);
    std::vector<EncTriplet> one = {{0.5, 1, 0.7}};
    Tape tape;
    EncodeDiag diag;
    encode_on_tape(tape, one, params, cfg, RunMode::infer, nullptr, 0, nullptr, &diag);
    REQUIRE(diag.fusion_weights.size() == 1);
    CHECK(diag.fusion_weights[0] == 1.0);
}

TEST_CASE("fusion weights sum to 1") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 3);
    auto trips = some_triplets();
    Tape tape;
    EncodeDiag diag;
    encode_on_tape(tape, trips, params, cfg, RunMode::infer, nullptr, 0, nullptr, &diag);
    double sum = 0.0;
    for (double wgt : diag.fusion_weights) {
        CHECK(wgt > 0.0);
        sum += wgt;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
}

TEST_CASE("permuting triplet order leaves the representation unchanged within 1e-9") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 9);
    auto trips = some_triplets();
    Rng rng(4);

    auto rep_of = [&](const std::vector<EncTriplet>& t) {
        Tape tape;
        Var rep = encode_on_tape(tape, t, params, cfg, RunMode::infer, nullptr);
        return tape.value(rep).data();
    };
    auto base = rep_of(trips);
    for (int trial = 0; trial < 5; ++trial) {
        auto shuffled = trips;
        rng.shuffle(shuffled);
        auto rep = rep_of(shuffled);
        for (std::size_t j = 0; j < base.size(); ++j)
            CHECK(std::fabs(base[j] - rep[j]) < 1e-9);
    }
}

TEST_CASE("padding slots never change the representation") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 21);
    auto trips = some_triplets();
    auto rep_with_pad = [&](std::size_t pad) {
        Tape tape;
        Var rep = encode_on_tape(tape, trips, params, cfg, RunMode::infer, nullptr, pad);
        return tape.value(rep).data();
    };
    CHECK(rep_with_pad(0) == rep_with_pad(3));
    CHECK(rep_with_pad(0) == rep_with_pad(11));
}

TEST_CASE("inference mode is bit-deterministic") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 8);
    data::Sample s;
    s.bins = {{0, 0, 0.5}, {40, 1, -0.2}, {179, 2, 1.4}};
    CHECK(encode(s, params, cfg) == encode(s, params, cfg));
    CHECK(encode(s, params, cfg).size() == cfg.representation_dim());
}

TEST_CASE("an empty sample is rejected") {
    auto cfg = tiny_config();
    auto params = init_params(cfg, 8);
    std::vector<EncTriplet> none;
    Tape tape;
    CHECK_THROWS_AS(encode_on_tape(tape, none, params, cfg, RunMode::infer, nullptr),
                    PreconditionError);
}

TEST_CASE("over-cap samples encode a deterministic even-stride subset") {
    auto cfg = tiny_config();
    cfg.max_triplets = 4;
    auto params = init_params(cfg, 8);
    std::vector<EncTriplet> many;
    for (int i = 0; i < 40; ++i)
        many.push_back({i / 40.0, static_cast<std::size_t>(i % 3), 0.1 * i});
    Tape tape;
    EncodeDiag diag;
    Var rep = encode_on_tape(tape, many, params, cfg, RunMode::infer, nullptr, 0, nullptr, &diag);
    CHECK(diag.encoded_triplets == 4);
    Tape tape2;
    Var rep2 = encode_on_tape(tape2, many, params, cfg, RunMode::infer, nullptr);
    CHECK(tape.value(rep).data() == tape2.value(rep2).data());
}

TEST_CASE("finite differences confirm gradients through the whole encoder") {
    auto cfg = tiny_config();
    cfg.dropout = 0.2;  // exercised with a fixed-seed mask
    auto params = init_params(cfg, 33);
    auto trips = some_triplets();
    Tensor target = Tensor::matrix(1, 8, {0.1, -0.2, 0.3, 0.0, 0.5, -0.6, 0.7, 0.4});
    Tensor mask = Tensor::matrix(1, 8, {1, 0, 1, 1, 0, 1, 1, 0});

    auto run = [&](bool grads) {
        Tape tape;
        Rng drop(777);
        Var rep = encode_on_tape(tape, trips, params, cfg, RunMode::train, &drop, 2);
        Var loss = tape.masked_mse(rep, target, mask, 1.0);
        if (grads) tape.backward(loss);
        return tape.value(loss)[0];
    };
    auto report = testutil::check_gradients(params.all(), run);
    CAPTURE(report.worst_param);
    CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("optional static features widen the representation via concat") {
    auto cfg = tiny_config();
    cfg.static_dim = 4;
    CHECK(cfg.representation_dim() == 2 * cfg.d);
    auto params = init_params(cfg, 15);
    CHECK(params.has_static);
    std::vector<double> statics = {0.2, -0.4, 1.0, 0.0};
    auto trips = some_triplets();
    Tape tape;
    Var rep = encode_on_tape(tape, trips, params, cfg, RunMode::infer, nullptr, 0, &statics);
    CHECK(tape.value(rep).size() == 2 * cfg.d);
    // missing static vector is an error when the path is enabled
    Tape tape2;
    CHECK_THROWS_AS(encode_on_tape(tape2, trips, params, cfg, RunMode::infer, nullptr),
                    DataError);
}
