#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SLAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string first_line(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::getline(in, line);
    return line;
}

struct Workspace {
    fs::path dir;
    fs::path config;

    explicit Workspace(const std::string& name) {
        dir = fs::temp_directory_path() / name;
        fs::remove_all(dir);
        fs::create_directories(dir);
        config = dir / "config.json";
        std::ofstream out(config);
        out << R"({
            "seed": 31,
            "paths": {"data": ")" << (dir / "out" / "data.csv").string() << R"(",
                      "annotations": ")" << (dir / "out" / "annotations.csv").string() << R"(",
                      "out_dir": ")" << (dir / "out").string() << R"("},
            "encoder": {"d": 8, "ffn_units": 8, "n_blocks": 1, "n_heads": 2,
                        "dropout": 0.1, "max_triplets": 48},
            "pretrain": {"max_epochs": 2, "batch_size": 8},
            "slac": {"k": 2, "outer_iterations": 2, "epochs_per_iteration": 2,
                     "kmeans_restarts": 4},
            "k_sweep": [2, 3],
            "synth": {"n_records": 4, "windows_per_record": 3, "plan": "event",
                      "missing_rate": 0.1, "base_interval_s": 60, "jitter_s": 5,
                      "event_switch_prob": 0.5}
        })";
    }

    std::string flags() const { return "--config " + config.string(); }
    fs::path out(const char* name) const { return dir / "out" / name; }
};

}  // namespace

TEST_CASE("cli pipeline runs end to end") {
    Workspace ws("slac_cli_ws");

    REQUIRE(run_cli("synth " + ws.flags()) == 0);
    CHECK(fs::exists(ws.out("data.csv")));
    CHECK(fs::exists(ws.out("ground_truth.csv")));
    CHECK(fs::exists(ws.out("annotations.csv")));
    CHECK(fs::exists(ws.out("catalog.json")));
    CHECK(first_line(ws.out("data.csv")) == "record_id,t_seconds,variable,value");

    REQUIRE(run_cli("pretrain " + ws.flags()) == 0);
    CHECK(fs::exists(ws.out("checkpoint.json")));
    CHECK(first_line(ws.out("pretrain_log.csv")) == "epoch,train_loss,val_loss");

    REQUIRE(run_cli("cluster " + ws.flags()) == 0);
    CHECK(fs::exists(ws.out("assignments.csv")));
    CHECK(fs::exists(ws.out("representations.csv")));
    CHECK(first_line(ws.out("iteration_log.csv")) ==
          "iteration,inertia,label_change_fraction,silhouette,dunn,davies_bouldin,calinski_harabasz");
    // log row count = outer_iterations (+ header)
    {
        std::ifstream in(ws.out("iteration_log.csv"));
        std::string line;
        int rows = -1;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 2);
    }

    REQUIRE(run_cli("metrics " + ws.flags()) == 0);
    CHECK(first_line(ws.out("k_sweep.csv")) == "k,silhouette,dunn,davies_bouldin,calinski_harabasz");
    {
        std::ifstream in(ws.out("k_sweep.csv"));
        std::string line;
        int rows = -1;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 2);  // |k_values|
    }

    REQUIRE(run_cli("report " + ws.flags()) == 0);
    CHECK(fs::exists(ws.out("timeline.csv")));
    CHECK(fs::exists(ws.out("frequency.csv")));
    CHECK(fs::exists(ws.out("transitions.csv")));
    CHECK(fs::exists(ws.out("profile.json")));
    CHECK(first_line(ws.out("timeline.csv")) == "record_id,window_index,start_s,state");
}

TEST_CASE("cli states respect --k and reruns are byte-identical") {
    Workspace ws("slac_cli_det");
    REQUIRE(run_cli("synth " + ws.flags()) == 0);
    const std::string data_a = slurp(ws.out("data.csv"));

    REQUIRE(run_cli("synth " + ws.flags()) == 0);
    CHECK(slurp(ws.out("data.csv")) == data_a);

    REQUIRE(run_cli("pretrain " + ws.flags()) == 0);
    REQUIRE(run_cli("cluster " + ws.flags() + " --k 2") == 0);
    const std::string assignments_a = slurp(ws.out("assignments.csv"));
    const std::string log_a = slurp(ws.out("iteration_log.csv"));

    // states restricted to 0..k-1
    {
        std::ifstream in(ws.out("assignments.csv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const char state = line.back();
            CHECK((state == '0' || state == '1'));
        }
    }

    REQUIRE(run_cli("cluster " + ws.flags() + " --k 2") == 0);
    CHECK(slurp(ws.out("assignments.csv")) == assignments_a);
    CHECK(slurp(ws.out("iteration_log.csv")) == log_a);
}

TEST_CASE("cli exit codes") {
    Workspace ws("slac_cli_err");

    SUBCASE("invalid missing_rate exits 2") {
        std::ofstream out(ws.config);
        out << R"({"synth": {"missing_rate": 1.5}})";
        out.close();
        CHECK(run_cli("synth " + ws.flags()) == 2);
    }
    SUBCASE("unknown config key exits 2") {
        std::ofstream out(ws.config);
        out << R"({"paths": {"daat": "x"}})";
        out.close();
        CHECK(run_cli("synth " + ws.flags()) == 2);
    }
    SUBCASE("cluster without a checkpoint exits 3") {
        REQUIRE(run_cli("synth " + ws.flags()) == 0);
        CHECK(run_cli("cluster " + ws.flags()) == 3);
    }
    SUBCASE("corrupt data row exits 2") {
        REQUIRE(run_cli("synth " + ws.flags()) == 0);
        {
            std::ofstream out(ws.out("data.csv"), std::ios::app);
            out << "R001,notanumber,HR,80\n";
        }
        CHECK(run_cli("pretrain " + ws.flags()) == 2);
    }
    SUBCASE("metrics before cluster exits 3") {
        REQUIRE(run_cli("synth " + ws.flags()) == 0);
        CHECK(run_cli("metrics " + ws.flags()) == 3);
    }
    SUBCASE("report before cluster exits 3") {
        REQUIRE(run_cli("synth " + ws.flags()) == 0);
        CHECK(run_cli("report " + ws.flags()) == 3);
    }
}

TEST_CASE("cluster --from-random skips the checkpoint requirement") {
    Workspace ws("slac_cli_fromrandom");
    REQUIRE(run_cli("synth " + ws.flags()) == 0);
    CHECK(run_cli("cluster " + ws.flags() + " --from-random") == 0);
    CHECK(fs::exists(ws.out("assignments.csv")));
}
