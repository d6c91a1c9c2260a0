#include "fqc/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "fqc/relu_convex.hpp"
#include "fqc/rng.hpp"

namespace fqc {

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

double bellman_error_tables(const TabularMDP& mdp, const QTable& q_prev, const QTable& q_k,
                            const Eigen::MatrixXd& nu) {
    const QTable target = bellman_apply(mdp, q_prev);
    return (nu.array() * (target - q_k).array().abs()).sum();
}

double bellman_error(const TabularMDP& mdp, const FeatureMap& features, const ReluNetwork& q_prev,
                     const ReluNetwork& q_k, const Eigen::MatrixXd& nu) {
    const QTable prev = q_table_from_network(mdp, features, q_prev, /*clip=*/true);
    const QTable cur = q_table_from_network(mdp, features, q_k, /*clip=*/false);
    return bellman_error_tables(mdp, prev, cur, nu);
}

namespace {

// Heavy-budget reference fit of targets on the given design rows.
struct ReferenceFit {
    ReluNetwork net;
    double loss = 0.0;
};

ReferenceFit reference_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double radius,
                           int steps, const OracleBudget& budget, std::uint64_t gate_seed) {
    GateSet gates;
    if (X.rows() <= budget.exact_gate_limit) {
        gates = enumerate_gates_exact(X);
    } else {
        auto rng = make_rng(gate_seed, "oracle-gates");
        gates = sample_gates(X, budget.sampled_gate_count, rng);
    }
    PgdOptions opts;
    opts.steps = steps;
    opts.radius = radius;
    opts.mode = StepMode::Backtracking;
    const PgdResult fit = projected_gradient_descent(X, y, gates, opts);
    ReferenceFit out;
    out.net = psi_transform(cone_decompose(fit.u, gates, X));
    out.loss = fit.final_loss;
    return out;
}

}  // namespace

ErrorBreakdown error_decomposition(const TabularMDP& mdp, const FeatureMap& features,
                                   const IterationContext& ctx, const Eigen::MatrixXd& nu,
                                   const OracleBudget& budget) {
    ErrorBreakdown out;
    out.k = ctx.k;
    std::ostringstream notes;

    const QTable q_prev = q_table_from_network(mdp, features, ctx.net_prev, /*clip=*/true);
    const QTable q_cur = q_table_from_network(mdp, features, ctx.net, /*clip=*/false);
    const QTable t_q_prev = bellman_apply(mdp, q_prev);
    out.bellman_error_l1 = (nu.array() * (t_q_prev - q_cur).array().abs()).sum();

    const int heavy_steps = std::max(1, ctx.pgd_steps) * budget.pgd_multiplier;

    // Q_k1 reference: fit exact backup values on the dense (s,a) grid.
    Eigen::VectorXd dense_targets(mdp.num_states * mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            dense_targets(mdp.pair_index(s, a)) = t_q_prev(s, a);
    const ReferenceFit k1 =
        reference_fit(features.rows, dense_targets, ctx.radius, heavy_steps, budget, 101);
    out.ref_fit_loss_k1 = k1.loss;
    const QTable q_k1 = q_table_from_network(mdp, features, k1.net, /*clip=*/false);
    out.approx_error_est = (nu.array() * (t_q_prev - q_k1).array().abs()).sum();

    // Estimation error is identically zero (expected and realized square
    // losses share their minimizer); reported, never computed.
    out.estimation_error = 0.0;

    // Q_k3 reference: heavy-budget solve of the iteration's empirical loss.
    PgdOptions opts;
    opts.steps = heavy_steps;
    opts.radius = ctx.radius;
    opts.mode = StepMode::Backtracking;
    const PgdResult k3_fit = projected_gradient_descent(ctx.X, ctx.y, ctx.gates, opts);
    out.ref_fit_loss_k3 = k3_fit.final_loss;
    const ReluNetwork k3_net = psi_transform(cone_decompose(k3_fit.u, ctx.gates, ctx.X));
    const QTable q_k3 = q_table_from_network(mdp, features, k3_net, /*clip=*/false);

    out.sampling_error_est = (nu.array() * (q_k1 - q_k3).array().abs()).sum();
    out.optimization_error_est = (nu.array() * (q_k3 - q_cur).array().abs()).sum();

    const double scale = std::max(1.0, ctx.y.squaredNorm());
    if (out.ref_fit_loss_k1 > budget.ref_loss_tolerance * scale ||
        k3_fit.final_loss > ctx.y.size() * budget.ref_loss_tolerance * mdp.q_max()) {
        // Reference residuals stayed high; components are reported but flagged.
        out.reliable = false;
        notes << "reference fit residual above tolerance; ";
    }
    notes << "k1 ref: " << (features.rows.rows() <= budget.exact_gate_limit ? "exact gates"
                                                                            : "sampled gates")
          << ", T=" << heavy_steps << "; k3 ref: run gates, T=" << heavy_steps;
    out.notes = notes.str();
    return out;
}

std::optional<double> fit_loglog_slope(const std::vector<int>& ns,
                                       const std::vector<double>& values, double floor) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < ns.size(); ++i) {
        const double v = values[i] - floor;
        if (v > 0.0 && ns[i] > 0) {
            lx.push_back(std::log(static_cast<double>(ns[i])));
            ly.push_back(std::log(v));
        }
    }
    if (lx.size() < 2) return std::nullopt;
    const double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) return std::nullopt;
    return (n * sxy - sx * sy) / denom;
}

SweepResult sample_complexity_sweep(const TabularMDP& mdp, const FeatureMap& features,
                                    const FqiSchedule& base, const std::vector<int>& n_grid,
                                    int num_seeds, int jobs) {
    SweepResult result;
    result.budgets = n_grid;
    std::vector<int> sorted_budgets = n_grid;
    std::sort(sorted_budgets.begin(), sorted_budgets.end());

    for (int n : n_grid)
        for (int s = 0; s < num_seeds; ++s) {
            SweepCell cell;
            cell.n = n;
            cell.seed = mix_seed(base.seed, "sweep-cell", static_cast<std::uint64_t>(n) * 1000 + s);
            result.cells.push_back(cell);
        }

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t idx = next.fetch_add(1);
            if (idx >= result.cells.size()) return;
            SweepCell& cell = result.cells[idx];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                FqiSchedule sched = base;
                sched.samples_per_iter.assign(sched.iterations, cell.n);
                sched.seed = cell.seed;
                FqiOptions opts;
                opts.log_diagnostics = false;
                const FqiResult run = fqi_run(mdp, features, sched, opts);
                cell.final_gap = run.record.final_gap;
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            cell.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
        }
    };
    const int thread_count = std::max(1, jobs);
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (int n : sorted_budgets) {
        std::vector<double> gaps;
        for (const auto& cell : result.cells)
            if (cell.ok && cell.n == n) gaps.push_back(cell.final_gap);
        result.median_gaps.push_back(median(std::move(gaps)));
    }
    result.budgets = sorted_budgets;
    result.floor = result.median_gaps.empty() ? 0.0 : result.median_gaps.back();
    result.slope = fit_loglog_slope(result.budgets, result.median_gaps, result.floor);
    result.identifiable = result.slope.has_value();
    return result;
}

}  // namespace fqc
