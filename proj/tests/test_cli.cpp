#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "plda/io.hpp"

namespace fs = std::filesystem;
using plda::io::json;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

class Sandbox {
public:
    explicit Sandbox(const std::string& tag)
        : root_(fs::temp_directory_path() / ("plda_cli_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    ~Sandbox() { fs::remove_all(root_); }
    const fs::path& root() const { return root_; }

    // Runs the CLI with stdout captured to a file and stderr discarded.
    Outcome run(const std::string& args) const {
        const fs::path out = root_ / "stdout.txt";
        const std::string cmd = std::string("\"") + PLDA_CLI_PATH + "\" " + args + " > \"" + out.string() +
                                "\" 2> \"" + (root_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        Outcome o;
        o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        o.out = slurp(out);
        return o;
    }

    fs::path write_config(const json& j, const std::string& name = "config.json") const {
        const fs::path p = root_ / name;
        plda::io::write_json(p, j);
        return p;
    }

private:
    fs::path root_;
};

json small_config() {
    return {{"data",
             {{"layout",
               {{"train_length", 1200},
                {"test_length", 800},
                {"anomaly_segments", 6},
                {"train_hard_segments", 2},
                {"test_hard_segments", 2}}},
              {"contamination", 0.1},
              {"seed", 3}}},
            {"run",
             {{"window", 10},
              {"bottleneck", 3},
              {"hidden", {8}},
              {"batch_size", 8},
              {"detector_lr", 5e-3},
              {"epochs", 1},
              {"key_params", 50},
              {"agent", {{"hidden", {16}}}},
              {"memory", 128},
              {"minibatch", 8},
              {"warm_start_steps", 16},
              {"max_epochs", 3},
              {"patience", 2}}}};
}

std::string last_line(const std::string& s) {
    std::string t = s;
    while (!t.empty() && t.back() == '\n') t.pop_back();
    const auto nl = t.rfind('\n');
    return nl == std::string::npos ? t : t.substr(nl + 1);
}

json report_without_clock(const fs::path& dir) {
    json j = plda::io::read_json(dir / "report.json");
    j.erase("wall_clock_seconds");
    j.erase("mode");
    return j;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
    const Sandbox box("usage");
    CHECK(box.run("").code == 1);
    CHECK(box.run("frobnicate").code == 1);
    CHECK(box.run("gen").code == 1);  // --out is required
    CHECK(box.run("gen --out x --no-such-flag").code == 1);
    CHECK(box.run("train --data d --mode both").code == 1);
    CHECK(box.run("validate --which everything").code == 1);
    CHECK(box.run("gen --out x --config /nonexistent/config.json").code == 1);
    CHECK(box.run("--help").code == 0);
}

TEST_CASE("configuration errors exit with 1") {
    const Sandbox box("cfg");
    const auto bad_top = box.write_config({{"runn", json::object()}}, "a.json");
    CHECK(box.run("gen --out " + (box.root() / "g").string() + " --config " + bad_top.string()).code == 1);
    const auto bad_run = box.write_config({{"run", {{"alpha", 0.5}, {"alpa", 0.5}}}}, "b.json");
    CHECK(box.run("gen --out " + (box.root() / "g").string() + " --config " + bad_run.string()).code == 1);
    const auto bad_range = box.write_config({{"data", {{"contamination", 0.9}}}}, "c.json");
    CHECK(box.run("gen --out " + (box.root() / "g").string() + " --config " + bad_range.string()).code == 1);
}

TEST_CASE("runtime failures exit with 2") {
    const Sandbox box("runtime");
    const auto missing = box.root() / "no_data_here";
    CHECK(box.run("train --data " + missing.string() + " --out " + (box.root() / "runs").string()).code == 2);
    CHECK(box.run("eval --checkpoint " + (missing / "d.ckpt").string() + " --data " + missing.string()).code == 2);
}

TEST_CASE("gen is deterministic for a fixed seed") {
    const Sandbox box("gen");
    const auto cfg = box.write_config(small_config());
    const fs::path a = box.root() / "a", b = box.root() / "b", c = box.root() / "c";
    REQUIRE(box.run("gen --config " + cfg.string() + " --out " + a.string()).code == 0);
    REQUIRE(box.run("gen --config " + cfg.string() + " --out " + b.string()).code == 0);
    REQUIRE(box.run("gen --config " + cfg.string() + " --seed 4 --out " + c.string()).code == 0);
    for (const char* f : {"train.csv", "test.csv", "manifest.json"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(slurp(a / "train.csv") != slurp(c / "train.csv"));

    const auto train = plda::io::read_series_csv(a / "train.csv");
    const auto test = plda::io::read_series_csv(a / "test.csv");
    CHECK(train.length == 1200);
    CHECK(test.length == 800);
    REQUIRE(train.has_labels());
    std::size_t flagged = 0;
    for (auto l : train.labels) flagged += l;
    CHECK(double(flagged) / double(train.length) >= 0.1);
    const json manifest = plda::io::read_json(a / "manifest.json");
    CHECK(manifest["seed"] == 3);
    CHECK(manifest["config"]["data"]["layout"]["train_length"] == 1200);
}

TEST_CASE("train, eval and the orig/plda relationship") {
    const Sandbox box("train");
    const auto cfg = box.write_config(small_config());
    const fs::path data = box.root() / "data";
    REQUIRE(box.run("gen --config " + cfg.string() + " --out " + data.string()).code == 0);

    const fs::path runs = box.root() / "runs";
    const Outcome plda_run = box.run("train -q --config " + cfg.string() + " --data " + data.string() +
                                     " --out " + runs.string() + " --mode plda");
    REQUIRE(plda_run.code == 0);
    const fs::path dir = last_line(plda_run.out);
    CHECK(dir.parent_path() == runs);
    CHECK(dir.filename().string().ends_with("_seed0"));
    for (const char* f : {"config.json", "report.json", "epochs.csv", "iterations.csv", "samples.csv",
                          "detector.ckpt", "qnet.ckpt"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    const json report = plda::io::read_json(dir / "report.json");
    CHECK(report["mode"] == "plda");
    CHECK(report.contains("evaluation"));
    const json saved = plda::io::read_json(dir / "config.json");
    CHECK(saved["run"]["window"] == 10);
    CHECK(saved["run"]["epochs"] == 1);

    SUBCASE("eval reproduces the report's F1") {
        const fs::path ev = box.root() / "eval.json";
        REQUIRE(box.run("eval --checkpoint " + (dir / "detector.ckpt").string() + " --data " + data.string() +
                        " --out " + ev.string())
                    .code == 0);
        const json e = plda::io::read_json(ev);
        CHECK(e["f1"].get<double>() == doctest::Approx(report["evaluation"]["f1"].get<double>()).epsilon(1e-12));
    }

    SUBCASE("orig equals plda with zero augmentation epochs") {
        json zero = small_config();
        zero["run"]["epochs"] = 0;
        const auto zcfg = box.write_config(zero, "zero.json");
        const Outcome o = box.run("train -q --config " + cfg.string() + " --data " + data.string() + " --out " +
                                  (box.root() / "orig").string() + " --mode orig");
        const Outcome z = box.run("train -q --config " + zcfg.string() + " --data " + data.string() + " --out " +
                                  (box.root() / "zero").string() + " --mode plda");
        REQUIRE(o.code == 0);
        REQUIRE(z.code == 0);
        const fs::path od = last_line(o.out), zd = last_line(z.out);
        CHECK(report_without_clock(od) == report_without_clock(zd));
        CHECK(slurp(od / "detector.ckpt") == slurp(zd / "detector.ckpt"));
        CHECK_FALSE(fs::exists(od / "qnet.ckpt"));
    }
}

TEST_CASE("validate runs a single fast check") {
    const Sandbox box("validate");
    const fs::path out = box.root() / "v.json";
    const Outcome o = box.run("validate --which reachability --out " + out.string());
    CHECK(o.code == 0);
    CHECK(o.out.starts_with("PASS "));
    const json j = plda::io::read_json(out);
    CHECK(j["passed"] == true);
    REQUIRE(j["checks"].size() == 1);
}
