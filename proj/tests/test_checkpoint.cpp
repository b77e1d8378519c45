#include <doctest.h>

#include <filesystem>

#include "slac/checkpoint.hpp"
#include "slac/encoder.hpp"
#include "slac/error.hpp"

using namespace slac;
using namespace slac::model;

namespace {

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("checkpoint round-trips parameter values exactly") {
    EncoderConfig cfg;
    cfg.d = 8;
    cfg.ffn_units = 10;
    cfg.n_blocks = 1;
    cfg.n_heads = 2;
    cfg.n_variables = 3;
    auto saved = init_params(cfg, 77);
    const std::string path = temp_file("ckpt_roundtrip.json");
    save_checkpoint(path, saved.all(), 111, cfg.hash());

    auto loaded = init_params(cfg, 78);  // different values before loading
    load_checkpoint(path, loaded.all(), 111, cfg.hash());
    auto a = saved.all();
    auto b = loaded.all();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i]->value.data() == b[i]->value.data());
}

TEST_CASE("checkpoint refuses a different catalog or config") {
    EncoderConfig cfg;
    cfg.d = 8;
    cfg.ffn_units = 10;
    cfg.n_blocks = 1;
    cfg.n_heads = 2;
    cfg.n_variables = 3;
    auto params = init_params(cfg, 1);
    const std::string path = temp_file("ckpt_hashes.json");
    save_checkpoint(path, params.all(), 42, cfg.hash());

    CHECK_THROWS_AS(load_checkpoint(path, params.all(), 43, cfg.hash()), ConfigError);
    CHECK_THROWS_AS(load_checkpoint(path, params.all(), 42, cfg.hash() + 1), ConfigError);
}

TEST_CASE("missing checkpoint file is a precondition error") {
    EncoderConfig cfg;
    cfg.n_variables = 3;
    auto params = init_params(cfg, 1);
    CHECK_THROWS_AS(load_checkpoint(temp_file("ckpt_nope.json"), params.all(), 1, 1),
                    PreconditionError);
    CHECK(!checkpoint_exists(temp_file("ckpt_nope.json")));
}

TEST_CASE("extra blob survives the round trip") {
    EncoderConfig cfg;
    cfg.d = 8;
    cfg.ffn_units = 4;
    cfg.n_blocks = 1;
    cfg.n_heads = 2;
    cfg.n_variables = 2;
    auto params = init_params(cfg, 3);
    const std::string path = temp_file("ckpt_extra.json");
    nlohmann::json extra = {{"normalization", {{"mean", {1.0, 2.0}}}}};
    save_checkpoint(path, params.all(), 9, cfg.hash(), extra);
    auto out = load_checkpoint(path, params.all(), 9, cfg.hash());
    CHECK(out.at("normalization").at("mean")[1] == 2.0);
}
