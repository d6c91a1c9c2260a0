// Command-line front end: run experiments, sweep sample budgets, run the
// built-in verification suites, and re-render summaries from CSV artifacts.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fqc/diagnostics.hpp"
#include "fqc/fqi.hpp"
#include "fqc/serialization.hpp"
#include "fqc/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeAbort = 3;

std::string config_hash(const json& j) {
    const std::size_t h = std::hash<std::string>{}(j.dump());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

std::string run_csv(const fqc::RunRecord& record, const std::string& run_id, std::uint64_t seed,
                    bool timings) {
    std::ostringstream os;
    os << "run_id,seed,k,n_k,T_k,train_loss,bellman_error,gap,wall_ms\n";
    for (const auto& it : record.iterations) {
        os << run_id << ',' << seed << ',' << it.k << ',' << it.n_k << ',' << it.T_k << ','
           << fqc::format_double(it.train_loss) << ',' << fqc::format_double(it.bellman_error)
           << ',' << fqc::format_double(it.gap) << ',';
        // wall_ms is left blank by default so reruns stay byte-identical.
        if (timings) os << fqc::format_double(it.wall_ms);
        os << '\n';
    }
    return os.str();
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            std::uint64_t seed_override, bool has_seed_override, bool timings) {
    fqc::ExperimentConfig cfg;
    try {
        cfg = fqc::load_config(config_path);
    } catch (const fqc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    if (has_seed_override) {
        cfg.seed = seed_override;
        cfg.schedule.seed = seed_override;
    }
    const fs::path out_dir = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);

    try {
        fs::create_directories(out_dir);
        const fqc::FeatureMap features =
            fqc::make_feature_map(cfg.mdp, cfg.feature_dim, cfg.seed);
        const fqc::FqiResult result = fqc::fqi_run(cfg.mdp, features, cfg.schedule);

        const json resolved = fqc::config_to_json(cfg);
        const std::string run_id = config_hash(resolved);
        fqc::write_file_atomic(out_dir / "run.csv",
                               run_csv(result.record, run_id, cfg.seed, timings));
        fqc::write_file_atomic(out_dir / "config.resolved.json", resolved.dump(2) + "\n");

        json summary{{"run_id", run_id},
                     {"seed", cfg.seed},
                     {"iterations", cfg.schedule.iterations},
                     {"total_samples", result.record.total_samples},
                     {"final_gap", result.record.final_gap},
                     {"final_train_loss", result.record.iterations.empty()
                                              ? 0.0
                                              : result.record.iterations.back().train_loss},
                     {"policy", result.policy}};
        fqc::write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
        std::cout << "run " << run_id << ": final_gap=" << result.record.final_gap << " ("
                  << result.record.total_samples << " samples)\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return kExitRuntimeAbort;
    }
}

int cmd_sweep(const std::string& config_path, const std::string& out_override, int jobs) {
    fqc::ExperimentConfig cfg;
    try {
        cfg = fqc::load_config(config_path);
        if (!cfg.sweep) throw fqc::ConfigError("config: sweep block required for sweep command");
        if (cfg.sweep->sample_grid.empty()) throw fqc::ConfigError("sweep: empty grid");
    } catch (const fqc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    const fs::path out_dir = out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);

    try {
        fs::create_directories(out_dir);
        const fqc::FeatureMap features =
            fqc::make_feature_map(cfg.mdp, cfg.feature_dim, cfg.seed);
        const fqc::SweepResult sweep = fqc::sample_complexity_sweep(
            cfg.mdp, features, cfg.schedule, cfg.sweep->sample_grid, cfg.sweep->seeds, jobs);

        std::ostringstream csv;
        csv << "n,seed,final_gap,wall_ms,ok,error\n";
        int failures = 0;
        for (const auto& cell : sweep.cells) {
            csv << cell.n << ',' << cell.seed << ',' << fqc::format_double(cell.final_gap) << ','
                << fqc::format_double(cell.wall_ms) << ',' << (cell.ok ? 1 : 0) << ','
                << cell.error << '\n';
            if (!cell.ok) ++failures;
        }
        fqc::write_file_atomic(out_dir / "sweep.csv", csv.str());

        const json resolved = fqc::config_to_json(cfg);
        json summary{{"config_hash", config_hash(resolved)},
                     {"budgets", sweep.budgets},
                     {"median_gaps", sweep.median_gaps},
                     {"floor", sweep.floor},
                     {"identifiable", sweep.identifiable},
                     {"failed_cells", failures},
                     {"total_cells", sweep.cells.size()}};
        if (sweep.slope)
            summary["slope"] = *sweep.slope;
        else
            summary["slope"] = nullptr;
        fqc::write_file_atomic(out_dir / "sweep_summary.json", summary.dump(2) + "\n");
        fqc::write_file_atomic(out_dir / "config.resolved.json", resolved.dump(2) + "\n");

        std::cout << "sweep: " << sweep.cells.size() - failures << "/" << sweep.cells.size()
                  << " cells ok";
        if (sweep.slope) std::cout << ", slope=" << *sweep.slope;
        std::cout << "\n";
        const double fail_fraction =
            sweep.cells.empty() ? 1.0 : static_cast<double>(failures) / sweep.cells.size();
        return fail_fraction <= 0.1 ? kExitOk : kExitRuntimeAbort;
    } catch (const std::exception& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return kExitRuntimeAbort;
    }
}

int cmd_verify(std::uint64_t seed, double perturb_projection) {
    fqc::VerifyOptions opts;
    opts.seed = seed;
    opts.projection_perturbation = perturb_projection;
    const auto results = fqc::run_verification_suites(opts);
    bool all_passed = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS" : "FAIL") << "  " << r.name << "  (" << r.detail << ")\n";
        all_passed = all_passed && r.passed;
    }
    return all_passed ? kExitOk : kExitVerifyFailure;
}

int cmd_report(const std::string& in_dir) {
    const fs::path dir(in_dir);
    try {
        if (fs::exists(dir / "sweep.csv")) {
            std::ifstream in(dir / "sweep.csv");
            std::string line;
            std::getline(in, line);  // header
            std::map<int, std::vector<double>> gaps;
            while (std::getline(in, line)) {
                std::istringstream ls(line);
                std::string field;
                std::vector<std::string> fields;
                while (std::getline(ls, field, ',')) fields.push_back(field);
                if (fields.size() < 5 || fields[4] != "1") continue;
                gaps[std::stoi(fields[0])].push_back(std::stod(fields[2]));
            }
            std::vector<int> ns;
            std::vector<double> medians;
            for (auto& [n, values] : gaps) {
                ns.push_back(n);
                medians.push_back(fqc::median(values));
            }
            const double floor = medians.empty() ? 0.0 : medians.back();
            const auto slope = fqc::fit_loglog_slope(ns, medians, floor);
            json report{{"budgets", ns}, {"median_gaps", medians}, {"floor", floor}};
            report["slope"] = slope ? json(*slope) : json(nullptr);
            fqc::write_file_atomic(dir / "report.json", report.dump(2) + "\n");
            std::cout << report.dump(2) << "\n";
            return kExitOk;
        }
        if (fs::exists(dir / "run.csv")) {
            std::ifstream in(dir / "run.csv");
            std::string line, last;
            std::getline(in, line);
            int rows = 0;
            while (std::getline(in, line))
                if (!line.empty()) {
                    last = line;
                    ++rows;
                }
            json report{{"iterations", rows}, {"last_row", last}};
            fqc::write_file_atomic(dir / "report.json", report.dump(2) + "\n");
            std::cout << report.dump(2) << "\n";
            return kExitOk;
        }
        std::cerr << "report: no run.csv or sweep.csv in " << in_dir << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "runtime abort: " << e.what() << "\n";
        return kExitRuntimeAbort;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fitted Q-iteration with convex two-layer ReLU training"};
    app.require_subcommand(1);

    std::string config_path, out_dir, in_dir;
    std::uint64_t seed = 7;
    bool timings = false;
    int jobs = 1;
    double perturb_projection = 0.0;

    auto* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("--config", config_path, "Config JSON path")->required();
    run->add_option("--out", out_dir, "Output directory (overrides config)");
    auto* seed_opt = run->add_option("--seed", seed, "Master seed (overrides config)");
    run->add_flag("--timings", timings, "Record wall_ms in run.csv (breaks byte determinism)");

    auto* sweep = app.add_subcommand("sweep", "Run the sample-budget sweep from a config file");
    sweep->add_option("--config", config_path, "Config JSON path")->required();
    sweep->add_option("--out", out_dir, "Output directory (overrides config)");
    sweep->add_option("--jobs", jobs, "Parallel sweep cells")->check(CLI::PositiveNumber);

    auto* verify = app.add_subcommand("verify", "Run the built-in verification suites");
    verify->add_option("--seed", seed, "Suite seed");
    verify->add_option("--perturb-projection", perturb_projection, "Test hook")
        ->group("");  // hidden

    auto* report = app.add_subcommand("report", "Re-render summaries from CSV artifacts");
    report->add_option("--in", in_dir, "Directory with run.csv or sweep.csv")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, out_dir, seed, seed_opt->count() > 0, timings);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, jobs);
    if (verify->parsed()) return cmd_verify(seed, perturb_projection);
    if (report->parsed()) return cmd_report(in_dir);
    return kExitConfigError;
}
