// plda: generate benchmarks, train ORIG/PLDA detectors, evaluate checkpoints,
// run the self-checks and paired comparisons.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
// (including a failed self-check).

#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "plda/evalgen.hpp"
#include "plda/io.hpp"
#include "plda/kernels.hpp"
#include "plda/trainer.hpp"
#include "plda/validate.hpp"

namespace fs = std::filesystem;
using plda::io::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    plda::BenchmarkLayout layout;
    double contamination = 0.10;
    std::size_t gap = 30;
    std::uint64_t seed = 0;
};

struct Config {
    DataConfig data;
    plda::RunConfig run;
};

Config load_config(const std::string& path) {
    Config c;
    c.run.seeds = {0, 1, 2, 3, 4};
    if (path.empty()) return c;
    const json j = plda::io::read_json(path);
    if (!j.is_object()) throw plda::InvalidArgument("config root must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "run") {
            c.run = plda::io::run_config_from_json(value);
        } else if (key == "data") {
            if (!value.is_object()) throw plda::InvalidArgument("config section 'data' must be an object");
            for (const auto& [dk, dv] : value.items()) {
                try {
                    if (dk == "layout") c.data.layout = plda::io::layout_from_json(dv);
                    else if (dk == "contamination") c.data.contamination = dv.get<double>();
                    else if (dk == "gap") c.data.gap = dv.get<std::size_t>();
                    else if (dk == "seed") c.data.seed = dv.get<std::uint64_t>();
                    else throw plda::InvalidArgument("unknown config key '" + dk + "' in 'data'");
                } catch (const json::exception& e) {
                    throw plda::InvalidArgument("config key 'data." + dk + "': " + e.what());
                }
            }
        } else {
            throw plda::InvalidArgument("unknown top-level config key '" + key + "'");
        }
    }
    plda::require(c.data.contamination >= 0.0 && c.data.contamination <= 0.5,
                  "data.contamination must lie in [0, 0.5]");
    return c;
}

json config_json(const Config& c) {
    return {{"data",
             {{"layout", plda::io::to_json(c.data.layout)},
              {"contamination", c.data.contamination},
              {"gap", c.data.gap},
              {"seed", c.data.seed}}},
            {"run", plda::io::to_json(c.run)}};
}

std::string run_dir_name(std::uint64_t seed) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << "_seed" << seed;
    return os.str();
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw plda::io::IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

struct Dataset {
    plda::TimeSeries train;
    std::optional<plda::TimeSeries> test;
};

Dataset read_dataset(const fs::path& dir) {
    Dataset d;
    d.train = plda::io::read_series_csv(dir / "train.csv");
    if (fs::exists(dir / "test.csv")) d.test = plda::io::read_series_csv(dir / "test.csv");
    return d;
}

void print_summary(const std::string& label, const plda::RunReport& r) {
    std::cout << label << ": seed " << r.seed << ", |S| " << r.initial_set_size;
    for (const auto& e : r.epochs) {
        if (e.augment) continue;
        std::cout << " -> " << e.set_size;
        break;
    }
    std::cout << ", final epochs " << r.final_epochs << ", best val loss " << r.best_val_loss;
    if (r.evaluation) std::cout << ", F1 " << std::fixed << std::setprecision(4) << r.evaluation->f1;
    std::cout << std::defaultfloat << '\n';
}

// gen ------------------------------------------------------------------------

int cmd_gen(const Config& cfg, const fs::path& out) {
    ensure_dir(out);
    const auto spec = plda::default_benchmark_spec(cfg.data.layout, cfg.data.seed);
    const auto bench = plda::contaminated_benchmark(spec, cfg.data.contamination, cfg.data.seed, cfg.data.gap);
    plda::TimeSeries train = bench.train.series;
    train.labels = bench.train.ac_flags;  // audit only; training ignores labels
    plda::io::write_series_csv(out / "train.csv", train);
    plda::io::write_series_csv(out / "test.csv", bench.data.test);
    json manifest = {{"seed", cfg.data.seed},
                     {"contamination", cfg.data.contamination},
                     {"flagged_fraction", bench.train.flagged_fraction},
                     {"files", {{"train", "train.csv"}, {"test", "test.csv"}}},
                     {"train_label_column", "anomaly contamination flags"},
                     {"spec", plda::io::to_json(spec)},
                     {"config", config_json(cfg)}};
    plda::io::write_json(out / "manifest.json", manifest);
    std::cout << "wrote " << (out / "train.csv").string() << ", " << (out / "test.csv").string()
              << " (flagged fraction " << bench.train.flagged_fraction << ")\n";
    return 0;
}

// train ----------------------------------------------------------------------

int cmd_train(Config cfg, const fs::path& data, const fs::path& out, const std::string& mode,
              bool quiet) {
    if (data.empty()) throw UsageError("train needs --data DIR");
    Dataset ds = read_dataset(data);
    if (mode == "orig") cfg.run.epochs = 0;

    std::optional<plda::Tracking> tracking;
    if (ds.train.has_labels()) tracking = plda::Tracking{ds.train.labels, {}};
    plda::TimeSeries train = ds.train;
    train.labels.clear();

    const plda::RunResult res = plda::run(train, cfg.run, ds.test ? &*ds.test : nullptr,
                                          tracking ? &*tracking : nullptr);
    const fs::path dir = out / run_dir_name(cfg.run.seed);
    ensure_dir(dir);
    plda::io::write_json(dir / "config.json", config_json(cfg));
    json report = plda::io::to_json(res.report);
    report["mode"] = mode;
    plda::io::write_json(dir / "report.json", report);
    {
        std::ofstream os(dir / "epochs.csv");
        plda::io::write_epochs_csv(os, res.report);
    }
    {
        std::ofstream os(dir / "iterations.csv");
        plda::io::write_iterations_csv(os, res.report);
    }
    {
        std::ofstream os(dir / "samples.csv");
        plda::write_samples_csv(os, res.final_set);
    }
    plda::io::save_detector(dir / "detector.ckpt", res.detector);
    if (res.agent) plda::io::save_qnet(dir / "qnet.ckpt", res.agent->online());
    if (!quiet) print_summary(mode, res.report);
    std::cout << dir.string() << '\n';
    return 0;
}

// eval -----------------------------------------------------------------------

int cmd_eval(const fs::path& checkpoint, const fs::path& data, const fs::path& out) {
    if (checkpoint.empty() || data.empty()) throw UsageError("eval needs --checkpoint FILE and --data DIR");
    const plda::Detector det = plda::io::load_detector(checkpoint);
    const fs::path test_path = fs::is_directory(data) ? data / "test.csv" : data;
    const plda::TimeSeries test = plda::io::read_series_csv(test_path);
    if (!test.has_labels()) throw plda::InvalidArgument("'" + test_path.string() + "' has no label column");
    const auto ev = plda::best_f1(plda::anomaly_scores(det, test), test.labels, true);
    json j = plda::io::to_json(ev);
    j["checkpoint"] = checkpoint.string();
    j["test"] = test_path.string();
    if (!out.empty()) plda::io::write_json(out, j);
    std::cout << "F1 " << ev.f1 << " at threshold " << ev.threshold << " (precision " << ev.precision
              << ", recall " << ev.recall << ")\n";
    return 0;
}

// validate -------------------------------------------------------------------

json check_json(const plda::checks::CheckResult& r) {
    json m = json::object();
    for (const auto& [k, v] : r.metrics) m[k] = std::isfinite(v) ? json(v) : json(nullptr);
    json j = {{"check", r.name}, {"passed", r.passed}, {"seconds", r.seconds}, {"metrics", m}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    return j;
}

int cmd_validate(const std::string& which, const Config& cfg, bool from_config, const fs::path& out) {
    namespace ck = plda::checks;
    std::vector<ck::CheckResult> results;
    auto want = [&](const char* name) { return which == name || which == "all"; };
    if (want("influence")) {
        results.push_back(ck::influence());
        results.push_back(ck::cg_consistency());
    }
    if (want("reachability")) results.push_back(ck::reachability());
    if (want("decay")) results.push_back(ck::decay());
    if (want("rewards")) {
        ck::BenchmarkSetup setup = ck::default_benchmark_setup();
        if (from_config) {
            setup.layout = cfg.data.layout;
            setup.contamination = cfg.data.contamination;
            setup.run = cfg.run;
            setup.seeds = cfg.run.seeds;
        }
        results.push_back(ck::rewards(setup));
    }
    if (results.empty()) throw UsageError("unknown check '" + which + "'");

    json all = json::array();
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(2)
                  << r.seconds << " s)" << std::defaultfloat;
        for (const auto& [k, v] : r.metrics) std::cout << ' ' << k << '=' << v;
        if (!r.detail.empty()) std::cout << " [" << r.detail << ']';
        std::cout << '\n';
        ok = ok && r.passed;
        all.push_back(check_json(r));
    }
    if (!out.empty()) plda::io::write_json(out, {{"checks", all}, {"passed", ok}});
    return ok ? 0 : 2;
}

// compare --------------------------------------------------------------------

int cmd_compare(const Config& cfg, const fs::path& data, const fs::path& out) {
    const auto& seeds = cfg.run.seeds;
    if (seeds.size() < 2) throw plda::InvalidArgument("compare needs at least two seeds in run.seeds");
    std::optional<Dataset> fixed;
    if (!data.empty()) {
        fixed = read_dataset(data);
        if (!fixed->test) throw plda::InvalidArgument("compare needs a labeled test.csv in '" + data.string() + "'");
    }

    json rows = json::array();
    std::vector<double> f_orig, f_plda;
    std::cout << "seed,method,f1\n";
    for (std::uint64_t seed : seeds) {
        plda::TimeSeries train, test;
        if (fixed) {
            train = fixed->train;
            train.labels.clear();
            test = *fixed->test;
        } else {
            const auto spec = plda::default_benchmark_spec(cfg.data.layout, seed);
            const auto bench = plda::contaminated_benchmark(spec, cfg.data.contamination, seed, cfg.data.gap);
            train = bench.train.series;
            test = bench.data.test;
        }
        plda::RunConfig rc = cfg.run;
        rc.seed = seed;
        const auto orig = plda::baseline_run(train, rc, &test);
        const auto pl = plda::run(train, rc, &test);
        f_orig.push_back(orig.report.evaluation->f1);
        f_plda.push_back(pl.report.evaluation->f1);
        std::cout << seed << ",ORIG," << f_orig.back() << '\n' << seed << ",PLDA," << f_plda.back() << '\n';
        rows.push_back({{"seed", seed}, {"method", "ORIG"}, {"f1", f_orig.back()}});
        rows.push_back({{"seed", seed}, {"method", "PLDA"}, {"f1", f_plda.back()}});
    }
    auto stats = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
    };
    const auto [mo, so] = stats(f_orig);
    const auto [mp, sp] = stats(f_plda);
    const double imp = mo > 0.0 ? 100.0 * (mp - mo) / mo : 0.0;
    std::cout << std::fixed << std::setprecision(4) << "ORIG avg " << mo << " +- " << so << '\n'
              << "PLDA avg " << mp << " +- " << sp << '\n'
              << std::setprecision(2) << "Imp(%) " << imp << '\n';
    if (!out.empty()) {
        plda::io::write_json(out, {{"rows", rows},
                                   {"orig", {{"mean", mo}, {"std", so}}},
                                   {"plda", {{"mean", mp}, {"std", sp}}},
                                   {"improvement_percent", imp},
                                   {"config", config_json(cfg)}});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PLDA: dual parameter-loss data augmentation for time-series anomaly detection"};
    app.require_subcommand(1);

    std::string config_path, out, data, mode = "plda", which = "all", checkpoint;
    std::optional<std::uint64_t> seed;
    int verbosity = 0;
    bool quiet = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Seed override");
        sub->add_flag("-v,--verbose", verbosity, "More output");
    };

    auto* gen = app.add_subcommand("gen", "Generate a contaminated synthetic benchmark");
    add_common(gen);
    gen->add_option("--out", out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Train a detector (orig or plda)");
    add_common(train);
    train->add_option("--data", data, "Directory with train.csv [and test.csv]")->required();
    train->add_option("--out", out, "Parent directory for the run directory")->default_val("runs");
    train->add_option("--mode", mode, "orig or plda")->check(CLI::IsMember({"orig", "plda"}));
    train->add_flag("-q,--quiet", quiet, "Only print the run directory");

    auto* eval = app.add_subcommand("eval", "Point-adjusted best F1 of a checkpoint");
    add_common(eval);
    eval->add_option("--checkpoint", checkpoint, "Detector checkpoint")->required();
    eval->add_option("--data", data, "Directory with test.csv, or a labeled CSV file")->required();
    eval->add_option("--out", out, "Write the result JSON here");

    auto* val = app.add_subcommand("validate", "Run a self-check");
    add_common(val);
    val->add_option("--which", which, "influence, reachability, decay, rewards or all")
        ->check(CLI::IsMember({"influence", "reachability", "decay", "rewards", "all"}));
    val->add_option("--out", out, "Write the results JSON here");

    auto* cmp = app.add_subcommand("compare", "Paired ORIG vs PLDA runs over run.seeds");
    add_common(cmp);
    cmp->add_option("--data", data, "Fixed dataset directory (default: generate per seed)");
    cmp->add_option("--out", out, "Write the summary JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        Config cfg = load_config(config_path);
        if (seed) {
            cfg.data.seed = *seed;
            cfg.run.seed = *seed;
        }
        if (verbosity > 0) std::cerr << "kernels: " << plda::kernels::active_name() << '\n';
        if (*gen) return cmd_gen(cfg, out);
        if (*train) return cmd_train(cfg, data, out, mode, quiet);
        if (*eval) return cmd_eval(checkpoint, data, out);
        if (*val) return cmd_validate(which, cfg, !config_path.empty(), out);
        if (*cmp) return cmd_compare(cfg, data, out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const plda::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failed: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
