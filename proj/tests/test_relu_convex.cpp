#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "fqc/mdp.hpp"
#include "fqc/relu_convex.hpp"
#include "fqc/rng.hpp"

using namespace fqc;

namespace {

Eigen::MatrixXd random_design(std::mt19937_64& rng, int n, int d) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) X(r, c) = normal(rng);
    return X;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd y(n);
    for (int r = 0; r < n; ++r) y(r) = normal(rng);
    return y;
}

// Independent projection oracle: bisection on the KKT multiplier tau with
// soft-thresholding, ||S_tau(x)||_1 = radius.
Eigen::VectorXd project_l1_bisection(const Eigen::VectorXd& x, double radius) {
    auto norm_after = [&](double tau) {
        double s = 0.0;
        for (int i = 0; i < x.size(); ++i) s += std::max(std::abs(x(i)) - tau, 0.0);
        return s;
    };
    if (norm_after(0.0) <= radius) return x;
    double lo = 0.0, hi = x.cwiseAbs().maxCoeff();
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm_after(mid) > radius ? lo : hi) = mid;
    }
    const double tau = 0.5 * (lo + hi);
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double mag = std::max(std::abs(x(i)) - tau, 0.0);
        out(i) = x(i) >= 0.0 ? mag : -mag;
    }
    return out;
}

ConvexParams random_params(std::mt19937_64& rng, int gates, int d) {
    ConvexParams u;
    u.u.resize(gates, d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < gates; ++i)
        for (int c = 0; c < d; ++c) u.u(i, c) = normal(rng);
    return u;
}

}  // namespace

TEST_CASE("gate_mask uses the strict > 0 convention") {
    Eigen::MatrixXd X(3, 2);
    X << 1.0, 0.0,
         -1.0, 0.0,
         0.0, 1.0;
    Eigen::VectorXd g(2);
    g << 1.0, 0.0;  // X g = (1, -1, 0)
    const GateMask m = gate_mask(X, g);
    CHECK(m[0] == 1);
    CHECK(m[1] == 0);
    CHECK(m[2] == 0);  // exactly zero is inactive
}

TEST_CASE("sample_gates deduplicates and is deterministic in the rng stream") {
    auto rng = make_rng(1, "test-gates");
    Eigen::MatrixXd X = random_design(rng, 6, 3);
    auto r1 = make_rng(2, "draws");
    auto r2 = make_rng(2, "draws");
    const GateSet a = sample_gates(X, 64, r1);
    const GateSet b = sample_gates(X, 64, r2);
    REQUIRE(a.count() == b.count());
    for (int i = 0; i < a.count(); ++i) CHECK(a.masks[i] == b.masks[i]);
    CHECK(a.count() <= 64);
    for (int i = 0; i < a.count(); ++i)
        for (int j = i + 1; j < a.count(); ++j) CHECK(a.masks[i] != a.masks[j]);
    CHECK_THROWS_AS(sample_gates(X, 0, r1), InputError);
}

TEST_CASE("enumerate_gates_exact matches closed-form pattern counts") {
    // d >= n with independent rows: every sign pattern is realizable.
    auto rng = make_rng(3, "test-enum");
    Eigen::MatrixXd X = random_design(rng, 4, 4);
    CHECK(enumerate_gates_exact(X).count() == 16);

    // One positive column: only all-off (u <= 0) and all-on (u > 0).
    Eigen::MatrixXd pos(5, 1);
    pos << 0.3, 1.2, 0.7, 2.0, 0.4;
    const GateSet two = enumerate_gates_exact(pos);
    CHECK(two.count() == 2);

    // Duplicated rows can never disagree.
    Eigen::MatrixXd dup(4, 2);
    dup << 1.0, 2.0,
           1.0, 2.0,
           -1.0, 0.5,
           -1.0, 0.5;
    for (const GateMask& m : enumerate_gates_exact(dup).masks) {
        CHECK(m[0] == m[1]);
        CHECK(m[2] == m[3]);
    }

    Eigen::MatrixXd big = random_design(rng, 13, 2);
    CHECK_THROWS_AS(enumerate_gates_exact(big), InputError);
}

TEST_CASE("sampled gates are a subset of the exact enumeration") {
    auto rng = make_rng(4, "test-subset");
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd X = random_design(rng, 7, 3);
        const GateSet exact = enumerate_gates_exact(X);
        auto draw = make_rng(100 + trial, "subset-draws");
        const GateSet sampled = sample_gates(X, 200, draw);
        for (const GateMask& m : sampled.masks) {
            bool found = false;
            for (const GateMask& e : exact.masks) found = found || (m == e);
            CHECK(found);
        }
        CHECK(exact.count() <= 128);
    }
}

TEST_CASE("l1 projection matches the bisection oracle and is optimal") {
    auto rng = make_rng(5, "test-proj");
    std::uniform_int_distribution<int> dim_dist(1, 40);
    std::uniform_real_distribution<double> rad_dist(0.1, 5.0);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int dim = dim_dist(rng);
        const double radius = rad_dist(rng);
        const Eigen::VectorXd x = random_vector(rng, dim) * 2.0;
        const Eigen::VectorXd p = l1_ball_projection(x, radius);
        const Eigen::VectorXd q = project_l1_bisection(x, radius);
        CHECK(p.cwiseAbs().sum() <= radius + 1e-9);
        CHECK((p - q).cwiseAbs().maxCoeff() < 1e-7);
        // No random point inside the same ball may be closer.
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int probe = 0; probe < 10; ++probe) {
            Eigen::VectorXd z = random_vector(rng, dim);
            z *= radius * unit(rng) / std::max(z.cwiseAbs().sum(), 1e-12);
            CHECK((x - p).squaredNorm() <= (x - z).squaredNorm() + 1e-9);
        }
    }
    Eigen::VectorXd inside(2);
    inside << 0.1, -0.2;
    CHECK((l1_ball_projection(inside, 1.0) - inside).norm() == 0.0);
    CHECK_THROWS_AS(l1_ball_projection(inside, 0.0), InputError);
}

TEST_CASE("convex gradient matches central finite differences") {
    auto rng = make_rng(6, "test-grad");
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5, d = 3;
        Eigen::MatrixXd X = random_design(rng, n, d);
        Eigen::VectorXd y = random_vector(rng, n);
        auto gate_rng = make_rng(200 + trial, "grad-gates");
        const GateSet gates = sample_gates(X, 6, gate_rng);
        ConvexParams u = random_params(rng, gates.count(), d);
        const ConvexParams g = convex_grad(u, gates, X, y);
        const double h = 1e-6;
        for (int i = 0; i < gates.count(); ++i) {
            for (int c = 0; c < d; ++c) {
                ConvexParams up = u, dn = u;
                up.u(i, c) += h;
                dn.u(i, c) -= h;
                const double fd =
                    (convex_loss(up, gates, X, y) - convex_loss(dn, gates, X, y)) / (2.0 * h);
                CHECK(g.u(i, c) == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("stacked design reproduces convex predictions") {
    auto rng = make_rng(7, "test-stacked");
    Eigen::MatrixXd X = random_design(rng, 8, 3);
    auto gate_rng = make_rng(8, "stacked-gates");
    const GateSet gates = sample_gates(X, 10, gate_rng);
    const ConvexParams u = random_params(rng, gates.count(), 3);
    const Eigen::MatrixXd M = stacked_gated_design(X, gates);
    Eigen::VectorXd v(gates.count() * 3);
    for (int i = 0; i < gates.count(); ++i) v.segment(i * 3, 3) = u.u.row(i).transpose();
    CHECK((M * v - convex_predictions(u, gates, X)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cone decomposition splits every parameter into cone members") {
    auto rng = make_rng(9, "test-cone");
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 6, d = 3;
        Eigen::MatrixXd X = random_design(rng, n, d);
        auto gate_rng = make_rng(300 + trial, "cone-gates");
        const GateSet gates = sample_gates(X, 8, gate_rng);
        const ConvexParams u = random_params(rng, gates.count(), d);
        const ConeDecomposition dec = cone_decompose(u, gates, X);
        for (int i = 0; i < gates.count(); ++i) {
            CHECK((dec.v.row(i) - dec.w.row(i) - u.u.row(i)).cwiseAbs().maxCoeff() < 1e-9);
            CHECK(in_cone(X, gates.masks[i], dec.v.row(i).transpose(), 1e-7));
            CHECK(in_cone(X, gates.masks[i], dec.w.row(i).transpose(), 1e-7));
        }
    }
}

TEST_CASE("psi transform emits signed neurons and skips zero rows") {
    ConeDecomposition dec;
    dec.v.resize(3, 2);
    dec.w.resize(3, 2);
    dec.v << 1.0, 2.0,
             0.0, 0.0,
             0.5, 0.5;
    dec.w << 0.0, 0.0,
             0.0, 0.0,
             3.0, 1.0;
    const ReluNetwork net = psi_transform(dec);
    REQUIRE(net.neuron_count() == 3);
    CHECK(net.alpha(0) == 1);
    CHECK((net.weights.row(0) - dec.v.row(0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.alpha(1) == 1);
    CHECK((net.weights.row(1) - dec.v.row(2)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(net.alpha(2) == -1);
    CHECK((net.weights.row(2) - dec.w.row(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("convex and nonconvex losses agree after the transform") {
    auto rng = make_rng(10, "test-loss-eq");
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::uniform_int_distribution<int> n_dist(2, 9), d_dist(2, 4), g_dist(1, 10);
        const int n = n_dist(rng), d = d_dist(rng), g = g_dist(rng);
        Eigen::MatrixXd X = random_design(rng, n, d);
        Eigen::VectorXd y = random_vector(rng, n);
        auto gate_rng = make_rng(400 + trial, "loss-eq-gates");
        const GateSet gates = sample_gates(X, g, gate_rng);
        const ConvexParams u = random_params(rng, gates.count(), d);
        const double cvx = convex_loss(u, gates, X, y);
        const ReluNetwork net = psi_transform(cone_decompose(u, gates, X));
        const double ncvx = nonconvex_loss(net, X, y, 0.0);
        worst = std::max(worst, std::abs(cvx - ncvx));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("network predictions match a scalar forward loop") {
    auto rng = make_rng(11, "test-forward");
    Eigen::MatrixXd X = random_design(rng, 7, 3);
    ReluNetwork net;
    net.weights = random_design(rng, 4, 3);
    net.alpha.resize(4);
    net.alpha << 1, -1, 1, -1;
    const Eigen::VectorXd pred = network_predictions(net, X);
    for (int r = 0; r < X.rows(); ++r)
        CHECK(pred(r) == doctest::Approx(network_forward(net, X.row(r).transpose())).epsilon(1e-12));
    ReluNetwork empty;
    CHECK(network_predictions(empty, X).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("regularized nonconvex loss adds beta times squared layer norms") {
    auto rng = make_rng(12, "test-beta");
    Eigen::MatrixXd X = random_design(rng, 5, 2);
    Eigen::VectorXd y = random_vector(rng, 5);
    ReluNetwork net;
    net.weights = random_design(rng, 3, 2);
    net.alpha.resize(3);
    net.alpha << 1, -1, 1;
    const double base = nonconvex_loss(net, X, y, 0.0);
    const double reg = nonconvex_loss(net, X, y, 0.25);
    double penalty = 0.0;
    for (int i = 0; i < 3; ++i) penalty += net.weights.row(i).squaredNorm() + 1.0;
    CHECK(reg == doctest::Approx(base + 0.25 * penalty).epsilon(1e-12));
}

TEST_CASE("pgd lipschitz estimate matches the SVD oracle") {
    auto rng = make_rng(13, "test-lip");
    Eigen::MatrixXd X = random_design(rng, 12, 3);
    Eigen::VectorXd y = random_vector(rng, 12);
    auto gate_rng = make_rng(14, "lip-gates");
    const GateSet gates = sample_gates(X, 8, gate_rng);
    PgdOptions opts;
    opts.steps = 5;
    opts.radius = 1.0;
    const PgdResult res = projected_gradient_descent(X, y, gates, opts);
    const Eigen::MatrixXd M = stacked_gated_design(X, gates);
    const double sigma = M.jacobiSvd().singularValues()(0);
    CHECK(res.lipschitz_estimate == doctest::Approx(2.0 * sigma * y.norm()).epsilon(1e-6));
}

TEST_CASE("backtracking pgd is monotone and approaches the least-squares oracle") {
    auto rng = make_rng(15, "test-pgd");
    int compared = 0;
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::MatrixXd X = random_design(rng, 40, 3);
        Eigen::VectorXd y = random_vector(rng, 40);
        auto gate_rng = make_rng(500 + trial, "pgd-gates");
        const GateSet gates = sample_gates(X, 4, gate_rng);
        const Eigen::MatrixXd M = stacked_gated_design(X, gates);
        const auto svd = M.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV);
        // SVD least-squares solution; when its l1 norm fits inside the ball it
        // is the constrained optimum too.
        const Eigen::VectorXd ls = svd.solve(y);
        const double radius = ls.cwiseAbs().sum() * 1.5 + 1.0;
        const double opt = (M * ls - y).squaredNorm();

        PgdOptions opts;
        opts.steps = 20000;
        opts.radius = radius;
        opts.record_losses = true;
        const PgdResult res = projected_gradient_descent(X, y, gates, opts);
        for (size_t i = 1; i < res.losses.size(); ++i)
            CHECK(res.losses[i] <= res.losses[i - 1] + 1e-9);
        CHECK(convex_loss(res.u, gates, X, y) == doctest::Approx(res.final_loss).epsilon(1e-6));

        // Linear convergence to the optimum needs a reasonably conditioned
        // design; skip the accuracy comparison on near-singular draws.
        const auto& s = svd.singularValues();
        if (s(s.size() - 1) < 0.05 * s(0)) continue;
        ++compared;
        CHECK(res.final_loss <= opt + 1e-3 * std::max(1.0, opt));
        CHECK(res.final_loss >= opt - 1e-7);
    }
    CHECK(compared >= 5);
}

TEST_CASE("fixed theory step satisfies the averaged-rate bound") {
    auto rng = make_rng(16, "test-theory");
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd X = random_design(rng, 15, 3);
        Eigen::VectorXd y = random_vector(rng, 15);
        auto gate_rng = make_rng(600 + trial, "theory-gates");
        const GateSet gates = sample_gates(X, 6, gate_rng);

        PgdOptions ref_opts;
        ref_opts.steps = 4000;
        ref_opts.radius = 2.0;
        const double f_star = projected_gradient_descent(X, y, gates, ref_opts).final_loss;

        PgdOptions opts;
        opts.steps = 400;
        opts.radius = 2.0;
        opts.mode = StepMode::FixedTheory;
        const PgdResult res = projected_gradient_descent(X, y, gates, opts);
        CHECK(res.step_size == doctest::Approx(opts.radius / (res.lipschitz_estimate *
                                                              std::sqrt(opts.steps + 1.0))));
        // ||u*||_2 <= ||u*||_1 <= radius, so the radius-based bound dominates.
        const double bound = res.lipschitz_estimate * opts.radius / std::sqrt(opts.steps + 1.0);
        CHECK(res.final_loss - f_star <= bound + 1e-8);
    }
}

TEST_CASE("gate sufficiency report flags missing reference patterns") {
    auto rng = make_rng(17, "test-suff");
    Eigen::MatrixXd X = random_design(rng, 6, 3);
    auto gate_rng = make_rng(18, "suff-gates");
    const GateSet gates = sample_gates(X, 64, gate_rng);

    // Reference network built from sampled gate directions is always covered.
    ReluNetwork net;
    net.weights.resize(2, 3);
    net.alpha.resize(2);
    auto dir_rng = make_rng(18, "suff-gates");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 2; ++i) {
        for (int c = 0; c < 3; ++c) net.weights(i, c) = normal(dir_rng);
        net.alpha(i) = i == 0 ? 1 : -1;
    }
    const GateSufficiencyReport rep = verify_gate_sufficiency(net, gates, X, 1);
    CHECK(rep.all_contained);
    CHECK(rep.containment_fraction == doctest::Approx(1.0));
    CHECK(rep.neuron_count_ok);

    GateSet none;  // empty gate set covers nothing
    const GateSufficiencyReport bad = verify_gate_sufficiency(net, none, X);
    CHECK_FALSE(bad.all_contained);
    CHECK(bad.containment_fraction == doctest::Approx(0.0));
}

TEST_CASE("solve_linear_inequalities certifies feasibility and detects trivial infeasibility") {
    Eigen::MatrixXd A(2, 2);
    A << 1.0, 0.0,
         0.0, 1.0;
    Eigen::VectorXd c(2);
    c << 1.0, 2.0;
    auto sol = solve_linear_inequalities(A, c, Eigen::VectorXd::Zero(2));
    REQUIRE(sol.has_value());
    CHECK((A * *sol - c).minCoeff() >= -1e-9);

    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(1, 2);
    Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
    CHECK_FALSE(solve_linear_inequalities(Z, one, Eigen::VectorXd::Zero(2)).has_value());
}
