#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "fqc/diagnostics.hpp"
#include "fqc/fqi.hpp"
#include "fqc/mdp.hpp"
#include "fqc/presets.hpp"
#include "fqc/rng.hpp"

using namespace fqc;

namespace {

TabularMDP two_state_mdp(double gamma, double noise) {
    TabularMDP m;
    m.num_states = 2;
    m.num_actions = 2;
    m.gamma = gamma;
    m.r_max = 1.0;
    m.reward_noise_halfwidth = noise;
    m.transition.resize(4, 2);
    m.transition << 0.9, 0.1,
                    0.3, 0.7,
                    0.6, 0.4,
                    0.2, 0.8;
    m.reward_mean.resize(2, 2);
    m.reward_mean << 0.2, 0.6,
                     0.9, 0.1;
    return m;
}

}  // namespace

TEST_CASE("median handles odd, even, and empty inputs") {
    CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
    CHECK(median({7.5}) == doctest::Approx(7.5));
    CHECK(median({}) == doctest::Approx(0.0));
}

TEST_CASE("bellman error vanishes on the exact backup image") {
    TabularMDP m = two_state_mdp(0.9, 0.0);
    const Eigen::MatrixXd nu = uniform_distribution(m);
    QTable q_prev(2, 2);
    q_prev << 0.5, 1.5,
              2.0, 0.25;
    const QTable backup = bellman_apply(m, q_prev);
    CHECK(bellman_error_tables(m, q_prev, backup, nu) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("bellman error with zero previous table reduces to reward distance") {
    TabularMDP m = two_state_mdp(0.9, 0.0);
    const Eigen::MatrixXd nu = uniform_distribution(m);
    const QTable q_prev = QTable::Zero(2, 2);
    QTable q_k(2, 2);
    q_k << 0.1, 0.9,
           0.4, 0.3;
    // T applied to 0 is just the mean reward table.
    double expected = 0.0;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) expected += 0.25 * std::abs(m.reward_mean(s, a) - q_k(s, a));
    CHECK(bellman_error_tables(m, q_prev, q_k, nu) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bellman error with gamma zero compares rewards directly") {
    TabularMDP m = two_state_mdp(0.9, 0.0);
    m.gamma = 0.0;  // backup ignores the next state entirely
    const Eigen::MatrixXd nu = uniform_distribution(m);
    QTable q_prev(2, 2);
    q_prev << 5.0, -3.0,
              2.0, 7.0;  // irrelevant under gamma = 0
    QTable q_k(2, 2);
    q_k << 0.2, 0.0,
           0.9, 0.0;
    const double expected = 0.25 * (0.0 + 0.6 + 0.0 + 0.1);
    CHECK(bellman_error_tables(m, q_prev, q_k, nu) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("network bellman error matches the tabular path") {
    TabularMDP m = two_state_mdp(0.9, 0.0);
    const FeatureMap fm = make_feature_map(m, 3, 1);
    const Eigen::MatrixXd nu = uniform_distribution(m);
    ReluNetwork zero;
    ReluNetwork net;
    net.weights.resize(1, 3);
    net.weights << 0.5, 0.25, 0.1;
    net.alpha.resize(1);
    net.alpha << 1;
    const QTable prev_tab = q_table_from_network(m, fm, zero, true);
    const QTable cur_tab = q_table_from_network(m, fm, net, false);
    CHECK(bellman_error(m, fm, zero, net, nu) ==
          doctest::Approx(bellman_error_tables(m, prev_tab, cur_tab, nu)).epsilon(1e-12));
}

TEST_CASE("slope fitter recovers synthetic power laws") {
    const std::vector<int> ns = {100, 400, 1600, 6400};
    std::vector<double> vals;
    for (int n : ns) vals.push_back(3.0 * std::pow(n, -0.5));
    auto slope = fit_loglog_slope(ns, vals, 0.0);
    REQUIRE(slope.has_value());
    CHECK(*slope == doctest::Approx(-0.5).epsilon(1e-6));

    // With an additive floor the raw fit is biased; removing it restores -0.5.
    std::vector<double> floored;
    for (double v : vals) floored.push_back(v + 0.7);
    auto biased = fit_loglog_slope(ns, floored, 0.0);
    REQUIRE(biased.has_value());
    CHECK(*biased > -0.5);
    auto corrected = fit_loglog_slope(ns, floored, 0.7);
    REQUIRE(corrected.has_value());
    CHECK(*corrected == doctest::Approx(-0.5).epsilon(1e-6));

    std::vector<double> steep;
    for (int n : ns) steep.push_back(10.0 * std::pow(n, -1.0));
    CHECK(*fit_loglog_slope(ns, steep, 0.0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("slope fitter reports degenerate inputs as not identifiable") {
    const std::vector<int> ns = {100, 400, 1600, 6400};
    const std::vector<double> constant(4, 0.25);
    // Subtracting the floor leaves nothing above zero.
    CHECK_FALSE(fit_loglog_slope(ns, constant, 0.25).has_value());
    // Fewer than two positive points.
    CHECK_FALSE(fit_loglog_slope({100}, {1.0}, 0.0).has_value());
    CHECK_FALSE(fit_loglog_slope(ns, {0.0, 0.0, 0.0, 1.0}, 0.0).has_value());
}

TEST_CASE("error decomposition satisfies the triangle inequality on a toy run") {
    TabularMDP m = two_state_mdp(0.9, 0.1);
    const FeatureMap fm = make_feature_map(m, 3, 5);
    FqiSchedule s;
    s.iterations = 3;
    s.samples_per_iter.assign(3, 200);
    s.pgd_steps_per_iter.assign(3, 300);
    s.gate_count = 16;
    s.nu = uniform_distribution(m);
    s.seed = 21;
    FqiOptions opts;
    opts.keep_contexts = true;
    opts.log_diagnostics = true;
    const FqiResult run = fqi_run(m, fm, s, opts);
    REQUIRE(run.contexts.size() == 3);
    for (const IterationContext& ctx : run.contexts) {
        const ErrorBreakdown b = error_decomposition(m, fm, ctx, s.nu);
        CHECK(b.k == ctx.k);
        CHECK(b.bellman_error_l1 >= 0.0);
        CHECK(b.approx_error_est >= 0.0);
        CHECK(b.sampling_error_est >= 0.0);
        CHECK(b.optimization_error_est >= 0.0);
        CHECK(b.estimation_error == 0.0);
        CHECK(std::isfinite(b.bellman_error_l1));
        // Pointwise |T Q_{k-1} - Q_k| <= sum of the three legs through the
        // reference tables; holds as exact table arithmetic.
        CHECK(b.bellman_error_l1 <=
              b.approx_error_est + b.sampling_error_est + b.optimization_error_est + 1e-3);
        CHECK_FALSE(b.notes.empty());
        // The logged per-iteration Bellman error is the same quantity.
        CHECK(b.bellman_error_l1 ==
              doctest::Approx(run.record.iterations[ctx.k - 1].bellman_error).epsilon(1e-9));
    }
}

TEST_CASE("decomposition on a noiseless dense batch has tiny sampling error") {
    TabularMDP m = two_state_mdp(0.9, 0.0);
    const FeatureMap fm = make_feature_map(m, 3, 9);

    // Build the iteration context by hand: the batch enumerates every (s,a)
    // once with exact mean rewards, so the empirical loss equals the dense
    // target loss used by the Q_k1 reference.
    IterationContext ctx;
    ctx.k = 1;
    ctx.X = fm.rows;
    Eigen::VectorXd y(4);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) y(m.pair_index(s, a)) = m.reward_mean(s, a);
    ctx.y = y;
    ctx.gates = enumerate_gates_exact(ctx.X);
    ctx.net_prev = ReluNetwork{};  // Q_0 = 0, so TQ_0 = r
    ctx.pgd_steps = 2000;
    ctx.radius = m.q_max();

    PgdOptions fit_opts;
    fit_opts.steps = 2000;
    fit_opts.radius = ctx.radius;
    const PgdResult fit = projected_gradient_descent(ctx.X, ctx.y, ctx.gates, fit_opts);
    ctx.net = psi_transform(cone_decompose(fit.u, ctx.gates, ctx.X));

    const ErrorBreakdown b = error_decomposition(m, fm, ctx, uniform_distribution(m));
    CHECK(b.reliable);
    CHECK(b.sampling_error_est <= 1e-3);
    CHECK(b.optimization_error_est <= 1e-3);
}

TEST_CASE("sample complexity sweep covers the grid and is thread-count invariant") {
    TabularMDP m = benchmark_chain_mdp();
    const FeatureMap fm = make_feature_map(m, 4, 31);
    FqiSchedule base;
    base.iterations = 4;
    base.samples_per_iter.assign(4, 100);  // overwritten per cell
    base.pgd_steps_per_iter.assign(4, 150);
    base.gate_count = 8;
    base.nu = uniform_distribution(m);
    base.seed = 77;

    const std::vector<int> grid = {50, 100, 400, 800};
    const SweepResult serial = sample_complexity_sweep(m, fm, base, grid, 5, 1);
    REQUIRE(serial.cells.size() == 20);
    for (const SweepCell& cell : serial.cells) {
        CHECK(cell.ok);
        CHECK(cell.final_gap >= -1e-10);
        CHECK(cell.wall_ms >= 0.0);
    }
    REQUIRE(serial.budgets.size() == 4);
    CHECK(serial.budgets == std::vector<int>({50, 100, 400, 800}));
    REQUIRE(serial.median_gaps.size() == 4);
    CHECK(serial.floor == doctest::Approx(serial.median_gaps.back()));

    const SweepResult parallel = sample_complexity_sweep(m, fm, base, grid, 5, 4);
    REQUIRE(parallel.cells.size() == serial.cells.size());
    for (size_t i = 0; i < serial.cells.size(); ++i) {
        CHECK(parallel.cells[i].n == serial.cells[i].n);
        CHECK(parallel.cells[i].seed == serial.cells[i].seed);
        CHECK(parallel.cells[i].final_gap == serial.cells[i].final_gap);
    }
    CHECK(parallel.identifiable == serial.identifiable);
    if (serial.slope && parallel.slope) CHECK(*parallel.slope == doctest::Approx(*serial.slope));
}

TEST_CASE("median gap on the benchmark chain is nonincreasing in the sample budget") {
    // Statistical sanity check: scaling every per-iteration batch by 4x
    // (three levels, 11 seeds per level) must not make the median policy
    // gap worse.
    TabularMDP m = benchmark_chain_mdp();
    const FeatureMap fm = make_feature_map(m, 4, 2024);
    FqiSchedule base;
    base.iterations = 25;
    base.samples_per_iter.assign(25, 100);  // overwritten per cell
    base.pgd_steps_per_iter.assign(25, 1000);
    base.gate_count = 256;
    base.nu = uniform_distribution(m);
    base.seed = 1;

    const SweepResult sw = sample_complexity_sweep(m, fm, base, {250, 1000, 4000}, 11, 16);
    REQUIRE(sw.median_gaps.size() == 3);
    CHECK(sw.median_gaps[0] >= sw.median_gaps[1] - 1e-12);
    CHECK(sw.median_gaps[1] >= sw.median_gaps[2] - 1e-12);
    CHECK(sw.median_gaps[2] < sw.median_gaps[0]);  // and it actually improves
}
