#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SCREENSIM_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("screensim-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

const char* kSmallConfig = R"({
  "n_items": 60,
  "filters": {"count": 2, "pass_rate": 0.4},
  "machines": {"count": 4},
  "engine": {"baseline_items": 15},
  "gold_items": 8,
  "stacker": {"training_items": 0},
  "strategies": ["sr", "hsr-nb"],
  "n_repetitions": 2,
  "base_seed": 77,
  "output": {"charts": true, "record_votes": true}
})";

} // namespace

TEST_CASE("run command produces results, charts, and a manifest") {
    TempDir dir;
    const fs::path config = dir.path / "config.json";
    std::ofstream(config) << kSmallConfig;

    const fs::path out = dir.path / "out";
    REQUIRE(run_cli("run " + config.string() + " --out " + out.string() + " --jobs 2") == 0);
    CHECK(fs::exists(out / "results.csv"));
    CHECK(fs::exists(out / "loss_vs_price_ratio.svg"));
    CHECK(fs::exists(out / "recall_vs_price_ratio.svg"));
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "votes-sr.csv"));
    CHECK(fs::exists(out / "decisions-hsr-nb.csv"));

    const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["seed"] == 77);
    CHECK(manifest["seed_overridden"] == false);

    const auto run_report = nlohmann::json::parse(slurp(out / "run-report-hsr-nb.json"));
    CHECK(run_report.contains("ledger"));
    CHECK(run_report.contains("gating"));
    CHECK(run_report.contains("power_trajectory"));
    CHECK(run_report["decisions"].size() == 60 - 8); // eval pool excludes gold

    SUBCASE("identical reruns are byte-identical") {
        const fs::path out2 = dir.path / "out2";
        REQUIRE(run_cli("run " + config.string() + " --out " + out2.string() + " --jobs 1") == 0);
        CHECK(slurp(out / "results.csv") == slurp(out2 / "results.csv"));
    }

    SUBCASE("seed override changes outputs but not the config hash") {
        const fs::path out3 = dir.path / "out3";
        REQUIRE(run_cli("run " + config.string() + " --out " + out3.string() + " --seed 123") ==
                0);
        const auto manifest3 = nlohmann::json::parse(slurp(out3 / "manifest.json"));
        CHECK(manifest3["seed"] == 123);
        CHECK(manifest3["seed_overridden"] == true);
        CHECK(manifest3["config_hash"] == manifest["config_hash"]);
        CHECK(slurp(out3 / "results.csv") != slurp(out / "results.csv"));
    }

    SUBCASE("replaying the recorded log reproduces decisions exactly") {
        for (const char* strategy : {"sr", "hsr-nb"}) {
            const fs::path replay_out = dir.path / (std::string("replay-") + strategy);
            REQUIRE(run_cli("replay " + (out / ("votes-" + std::string(strategy) + ".csv")).string() +
                            " " + config.string() + " --strategy " + strategy + " --out " +
                            replay_out.string()) == 0);
            CHECK(slurp(replay_out / ("decisions-replay-" + std::string(strategy) + ".csv")) ==
                  slurp(out / ("decisions-" + std::string(strategy) + ".csv")));
        }
    }
}

TEST_CASE("malformed config exits 2 without partial outputs") {
    TempDir dir;
    const fs::path config = dir.path / "bad.json";
    std::ofstream(config) << "{ not json";
    const fs::path out = dir.path / "out";
    CHECK(run_cli("run " + config.string() + " --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out / "results.csv"));

    std::ofstream(config) << R"({"n_items": 10, "unknown_key": 1})";
    CHECK(run_cli("run " + config.string() + " --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out / "results.csv"));
}

TEST_CASE("gate-report command writes a per-classifier table") {
    TempDir dir;
    const fs::path gold = dir.path / "gold.csv";
    {
        std::ofstream g(gold);
        g << "item_id,filter_id,label\n";
        for (int i = 0; i < 50; ++i) g << i << ",0,OUT\n";
    }
    const fs::path outputs = dir.path / "outputs.csv";
    {
        std::ofstream o(outputs);
        o << "classifier_id,item_id,filter_id,label\n";
        for (int i = 0; i < 50; ++i) o << "0," << i << ",0," << (i < 40 ? "OUT" : "IN") << "\n";
        for (int i = 0; i < 50; ++i) o << "1," << i << ",0," << (i % 2 ? "OUT" : "IN") << "\n";
    }
    const fs::path report = dir.path / "gate.csv";
    REQUIRE(run_cli("gate-report " + gold.string() + " " + outputs.string() + " --sc 0.95 --out " +
                    report.string()) == 0);
    const std::string csv = slurp(report);
    CHECK(csv.find("0,0,40,10") != std::string::npos);
    CHECK(csv.rfind(",1\n") != std::string::npos); // classifier 0 retained
}
