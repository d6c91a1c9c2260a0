#include "fqc/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <set>

using nlohmann::json;

namespace fqc {

namespace {

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::set<std::string>& required, const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) throw ConfigError(context + ": unknown key: " + key);
    for (const auto& key : required)
        if (!j.contains(key)) throw ConfigError(context + ": missing key: " + key);
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& context) {
    if (!j.is_array() || j.empty()) throw ConfigError(context + ": expected a nested array");
    const size_t cols = j[0].size();
    Eigen::MatrixXd m(j.size(), cols);
    for (size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw ConfigError(context + ": ragged rows");
        for (size_t c = 0; c < cols; ++c) m(static_cast<int>(r), static_cast<int>(c)) = j[r][c].get<double>();
    }
    return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<int> int_array_or_scalar(const json& j, int length, const std::string& context) {
    std::vector<int> out;
    if (j.is_number_integer()) {
        out.assign(length, j.get<int>());
    } else if (j.is_array()) {
        for (const auto& v : j) out.push_back(v.get<int>());
        if (static_cast<int>(out.size()) != length)
            throw ConfigError(context + ": array length must equal iterations");
    } else {
        throw ConfigError(context + ": expected integer or array");
    }
    return out;
}

}  // namespace

TabularMDP mdp_from_json(const json& j) {
    require_keys(j,
                 {"num_states", "num_actions", "gamma", "r_max", "transition", "reward",
                  "reward_noise", "feature_dim", "seed"},
                 {"num_states", "num_actions", "gamma", "r_max", "transition", "reward"}, "mdp");
    TabularMDP m;
    m.num_states = j.at("num_states").get<int>();
    m.num_actions = j.at("num_actions").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.r_max = j.at("r_max").get<double>();
    if (m.num_states < 1 || m.num_actions < 1) throw ConfigError("mdp: invalid sizes");

    const json& trans = j.at("transition");
    if (!trans.is_array() || static_cast<int>(trans.size()) != m.num_states)
        throw ConfigError("mdp: transition must be P[s][a][s']");
    m.transition.resize(m.num_states * m.num_actions, m.num_states);
    for (int s = 0; s < m.num_states; ++s) {
        const json& per_state = trans[s];
        if (!per_state.is_array() || static_cast<int>(per_state.size()) != m.num_actions)
            throw ConfigError("mdp: transition must be P[s][a][s']");
        for (int a = 0; a < m.num_actions; ++a) {
            const json& row = per_state[a];
            if (!row.is_array() || static_cast<int>(row.size()) != m.num_states)
                throw ConfigError("mdp: transition must be P[s][a][s']");
            for (int sp = 0; sp < m.num_states; ++sp)
                m.transition(m.pair_index(s, a), sp) = row[sp].get<double>();
        }
    }
    m.reward_mean = matrix_from_json(j.at("reward"), "mdp.reward");
    if (m.reward_mean.rows() != m.num_states || m.reward_mean.cols() != m.num_actions)
        throw ConfigError("mdp: reward must be r[s][a]");
    if (j.contains("reward_noise")) m.reward_noise_halfwidth = j.at("reward_noise").get<double>();
    try {
        m.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("mdp: ") + e.what());
    }
    return m;
}

json mdp_to_json(const TabularMDP& m) {
    json trans = json::array();
    for (int s = 0; s < m.num_states; ++s) {
        json per_state = json::array();
        for (int a = 0; a < m.num_actions; ++a) {
            json row = json::array();
            for (int sp = 0; sp < m.num_states; ++sp)
                row.push_back(m.transition(m.pair_index(s, a), sp));
            per_state.push_back(std::move(row));
        }
        trans.push_back(std::move(per_state));
    }
    json j{{"num_states", m.num_states},
           {"num_actions", m.num_actions},
           {"gamma", m.gamma},
           {"r_max", m.r_max},
           {"transition", std::move(trans)},
           {"reward", matrix_to_json(m.reward_mean)}};
    if (m.reward_noise_halfwidth > 0.0) j["reward_noise"] = m.reward_noise_halfwidth;
    return j;
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    require_keys(j, {"mdp", "mdp_file", "feature_dim", "seed", "schedule", "sweep", "output_dir"},
                 {"schedule"}, "config");
    ExperimentConfig cfg;
    if (j.contains("mdp") == j.contains("mdp_file"))
        throw ConfigError("config: provide exactly one of mdp, mdp_file");
    if (j.contains("mdp")) {
        cfg.mdp = mdp_from_json(j.at("mdp"));
    } else {
        const auto path = base_dir / j.at("mdp_file").get<std::string>();
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot read mdp_file: " + path.string());
        json mj;
        try {
            in >> mj;
        } catch (const json::exception& e) {
            throw ConfigError("config: mdp_file parse error: " + std::string(e.what()));
        }
        cfg.mdp = mdp_from_json(mj);
    }

    cfg.feature_dim = j.value("feature_dim", 4);
    if (cfg.feature_dim < 2) throw ConfigError("config: feature_dim must be >= 2");
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.output_dir = j.value("output_dir", std::string("out"));

    const json& sj = j.at("schedule");
    require_keys(sj,
                 {"iterations", "samples_per_iteration", "pgd_steps", "gate_count", "step_mode",
                  "nu", "policy", "epsilon", "constants"},
                 {}, "schedule");
    const std::string policy = sj.value("policy", std::string("constant"));
    FqiSchedule& sched = cfg.schedule;
    if (policy == "theorem") {
        TheoremConstants tc;
        if (sj.contains("constants")) {
            const json& cj = sj.at("constants");
            require_keys(cj,
                         {"phi", "c_k", "eta", "beta_k", "c_prime", "l_k", "lipschitz",
                          "u_star_norm"},
                         {}, "schedule.constants");
            tc.phi = cj.value("phi", 1.0);
            tc.c_k = cj.value("c_k", 1.0);
            tc.eta = cj.value("eta", 1.0);
            tc.beta_k = cj.value("beta_k", 1.0);
            tc.c_prime = cj.value("c_prime", 1.0);
            tc.l_k = cj.value("l_k", 1.0);
            tc.lipschitz = cj.value("lipschitz", 1.0);
            tc.u_star_norm = cj.value("u_star_norm", 1.0);
        }
        if (!sj.contains("epsilon")) throw ConfigError("schedule: missing key: epsilon");
        const auto ts = theorem_schedule(cfg.mdp.gamma, cfg.mdp.r_max,
                                         sj.at("epsilon").get<double>(), tc);
        sched.iterations = ts.iterations;
        sched.samples_per_iter.assign(ts.iterations,
                                      static_cast<int>(std::min<long long>(ts.samples_per_iter,
                                                                           1'000'000'000LL)));
        sched.pgd_steps_per_iter.assign(ts.iterations,
                                        static_cast<int>(std::min<long long>(ts.pgd_steps_per_iter,
                                                                             1'000'000'000LL)));
    } else if (policy == "constant") {
        if (!sj.contains("iterations")) throw ConfigError("schedule: missing key: iterations");
        if (!sj.contains("samples_per_iteration"))
            throw ConfigError("schedule: missing key: samples_per_iteration");
        if (!sj.contains("pgd_steps")) throw ConfigError("schedule: missing key: pgd_steps");
        sched.iterations = sj.at("iterations").get<int>();
        if (sched.iterations < 1) throw ConfigError("schedule: iterations must be >= 1");
        sched.samples_per_iter = int_array_or_scalar(sj.at("samples_per_iteration"),
                                                     sched.iterations,
                                                     "schedule.samples_per_iteration");
        sched.pgd_steps_per_iter =
            int_array_or_scalar(sj.at("pgd_steps"), sched.iterations, "schedule.pgd_steps");
    } else {
        throw ConfigError("schedule: policy must be constant or theorem");
    }

    sched.gate_count = sj.value("gate_count", 16);
    const std::string mode = sj.value("step_mode", std::string("backtracking"));
    if (mode == "backtracking")
        sched.step_mode = StepMode::Backtracking;
    else if (mode == "fixed")
        sched.step_mode = StepMode::FixedTheory;
    else
        throw ConfigError("schedule: step_mode must be backtracking or fixed");

    if (!sj.contains("nu") || (sj.at("nu").is_string() && sj.at("nu") == "uniform")) {
        sched.nu = uniform_distribution(cfg.mdp);
    } else {
        sched.nu = matrix_from_json(sj.at("nu"), "schedule.nu");
        if (sched.nu.rows() != cfg.mdp.num_states || sched.nu.cols() != cfg.mdp.num_actions)
            throw ConfigError("schedule.nu: wrong shape");
    }
    sched.seed = cfg.seed;

    if (j.contains("sweep")) {
        const json& wj = j.at("sweep");
        require_keys(wj, {"sample_grid", "seeds"}, {"sample_grid"}, "sweep");
        SweepSpec spec;
        for (const auto& v : wj.at("sample_grid")) spec.sample_grid.push_back(v.get<int>());
        if (spec.sample_grid.empty()) throw ConfigError("sweep: sample_grid must be nonempty");
        spec.seeds = wj.value("seeds", 5);
        if (spec.seeds < 1) throw ConfigError("sweep: seeds must be >= 1");
        cfg.sweep = spec;
    }

    try {
        cfg.schedule.validate(cfg.mdp);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json sched{{"iterations", cfg.schedule.iterations},
               {"samples_per_iteration", cfg.schedule.samples_per_iter},
               {"pgd_steps", cfg.schedule.pgd_steps_per_iter},
               {"gate_count", cfg.schedule.gate_count},
               {"step_mode",
                cfg.schedule.step_mode == StepMode::Backtracking ? "backtracking" : "fixed"},
               {"nu", matrix_to_json(cfg.schedule.nu)}};
    json j{{"mdp", mdp_to_json(cfg.mdp)},
           {"feature_dim", cfg.feature_dim},
           {"seed", cfg.seed},
           {"output_dir", cfg.output_dir},
           {"schedule", std::move(sched)}};
    if (cfg.sweep) {
        j["sweep"] = json{{"sample_grid", cfg.sweep->sample_grid}, {"seeds", cfg.sweep->seeds}};
    }
    return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return config_from_json(j, path.parent_path());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + tmp);
        out << contents;
    }
    std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace fqc
