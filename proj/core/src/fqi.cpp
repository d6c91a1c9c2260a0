#include "fqc/fqi.hpp"

#include <chrono>
#include <cmath>

#include "fqc/diagnostics.hpp"
#include "fqc/rng.hpp"

namespace fqc {

void FqiSchedule::validate(const TabularMDP& mdp) const {
    if (iterations < 1) throw InputError("schedule: iterations must be >= 1");
    if (static_cast<int>(samples_per_iter.size()) != iterations ||
        static_cast<int>(pgd_steps_per_iter.size()) != iterations)
        throw InputError("schedule: per-iteration arrays must have length K");
    for (int n : samples_per_iter)
        if (n < 1) throw InputError("schedule: n_k must be >= 1");
    for (int t : pgd_steps_per_iter)
        if (t < 1) throw InputError("schedule: T_k must be >= 1");
    if (gate_count < 1) throw InputError("schedule: gate count must be >= 1");
    if (nu.rows() != mdp.num_states || nu.cols() != mdp.num_actions)
        throw InputError("schedule: nu has wrong shape");
    if (nu.minCoeff() < 0.0 || std::abs(nu.sum() - 1.0) > 1e-9)
        throw InputError("schedule: nu must be a distribution");
}

QTable q_table_from_network(const TabularMDP& mdp, const FeatureMap& features,
                            const ReluNetwork& net, bool clip) {
    const Eigen::VectorXd pred = network_predictions(net, features.rows);
    QTable q(mdp.num_states, mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a) {
            double v = pred(mdp.pair_index(s, a));
            if (clip) v = std::clamp(v, 0.0, mdp.q_max());
            q(s, a) = v;
        }
    return q;
}

Eigen::VectorXd build_targets(const std::vector<SamplePair>& batch, const QTable& q_prev_clipped,
                              double gamma) {
    if (batch.empty()) throw InputError("build_targets: empty batch");
    Eigen::VectorXd y(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        const double next_value = q_prev_clipped.row(batch[i].next_state).maxCoeff();
        y(static_cast<int>(i)) = batch[i].reward + gamma * next_value;
    }
    return y;
}

FqiResult fqi_run(const TabularMDP& mdp, const FeatureMap& features, const FqiSchedule& schedule,
                  const FqiOptions& opts) {
    mdp.validate();
    schedule.validate(mdp);
    const double radius = mdp.q_max();
    const int pairs = mdp.num_states * mdp.num_actions;

    // Flattened categorical over (s,a).
    Eigen::VectorXd nu_flat(pairs);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a) nu_flat(mdp.pair_index(s, a)) = schedule.nu(s, a);

    FqiResult result;
    result.net = ReluNetwork{};  // zero function
    for (int k = 1; k <= schedule.iterations; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const int n_k = schedule.samples_per_iter[k - 1];
        const int T_k = schedule.pgd_steps_per_iter[k - 1];

        auto sample_rng = make_rng(schedule.seed, "fqi-samples", static_cast<std::uint64_t>(k));
        std::discrete_distribution<int> pair_dist(nu_flat.data(), nu_flat.data() + pairs);
        std::vector<SamplePair> batch;
        batch.reserve(n_k);
        Eigen::MatrixXd X(n_k, features.dim);
        for (int i = 0; i < n_k; ++i) {
            const int idx = pair_dist(sample_rng);
            const int s = idx / mdp.num_actions;
            const int a = idx % mdp.num_actions;
            SamplePair sp = sample_transition(mdp, s, a, sample_rng);
            X.row(i) = features.rows.row(idx);
            batch.push_back(std::move(sp));
        }
        result.record.total_samples += n_k;

        const QTable q_prev = q_table_from_network(mdp, features, result.net, /*clip=*/true);
        const Eigen::VectorXd y = build_targets(batch, q_prev, mdp.gamma);
        if (!y.allFinite()) throw InputError("fqi_run: non-finite targets");

        auto gate_rng = make_rng(schedule.seed, "fqi-gates", static_cast<std::uint64_t>(k));
        const GateSet gates = sample_gates(X, schedule.gate_count, gate_rng);

        PgdOptions pgd;
        pgd.steps = T_k;
        pgd.radius = radius;
        pgd.mode = schedule.step_mode;
        const PgdResult fit = projected_gradient_descent(X, y, gates, pgd);
        const ConeDecomposition dec = cone_decompose(fit.u, gates, X);
        ReluNetwork prev_net = result.net;
        result.net = psi_transform(dec);

        IterationLog log;
        log.k = k;
        log.n_k = n_k;
        log.T_k = T_k;
        log.train_loss = fit.final_loss;
        if (opts.log_diagnostics) {
            log.bellman_error = bellman_error(mdp, features, prev_net, result.net, schedule.nu);
            log.gap = performance_gap(mdp, q_table_from_network(mdp, features, result.net, false),
                                      schedule.nu);
        }
        log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        result.record.iterations.push_back(log);

        if (opts.keep_contexts) {
            IterationContext ctx;
            ctx.k = k;
            ctx.X = X;
            ctx.y = y;
            ctx.gates = gates;
            ctx.net_prev = prev_net;
            ctx.net = result.net;
            ctx.pgd_steps = T_k;
            ctx.radius = radius;
            result.contexts.push_back(std::move(ctx));
        }
    }

    const QTable q_final = q_table_from_network(mdp, features, result.net, false);
    result.policy = greedy_policy(q_final);
    result.record.final_gap = performance_gap(mdp, q_final, schedule.nu);
    return result;
}

TheoremSchedule theorem_schedule(double gamma, double r_max, double epsilon,
                                 const TheoremConstants& c) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("theorem_schedule: gamma outside (0,1)");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("theorem_schedule: epsilon outside (0,1)");
    if (c.phi <= 0.0 || c.c_k <= 0.0 || c.eta <= 0.0 || c.beta_k <= 0.0 || c.c_prime <= 0.0 ||
        c.l_k <= 0.0 || c.lipschitz <= 0.0 || c.u_star_norm <= 0.0)
        throw InputError("theorem_schedule: surrogate constants must be positive");

    TheoremSchedule out;
    const double one_minus = 1.0 - gamma;
    const double k_raw =
        std::log(6.0 * c.phi * r_max / (epsilon * one_minus * one_minus)) / std::log(1.0 / gamma) -
        1.0;
    out.iterations = std::max(1, static_cast<int>(std::ceil(k_raw)));

    const double n_raw = 288.0 * std::pow(c.c_k * c.eta * c.beta_k * c.phi * gamma, 2.0) /
                         (std::pow(one_minus, 4.0) * epsilon * epsilon);
    out.samples_per_iter = std::max(1LL, static_cast<long long>(std::ceil(n_raw)));

    const double inner = c.c_prime * epsilon * one_minus * one_minus / (6.0 * c.l_k * c.phi * gamma);
    const double t_raw =
        c.lipschitz * c.lipschitz * c.u_star_norm * c.u_star_norm / (inner * inner) - 1.0;
    out.pgd_steps_per_iter = std::max(1LL, static_cast<long long>(std::ceil(t_raw)));
    out.step_size = c.u_star_norm /
                    (c.lipschitz * std::sqrt(static_cast<double>(out.pgd_steps_per_iter) + 1.0));
    return out;
}

}  // namespace fqc
