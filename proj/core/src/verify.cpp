#include "fqc/verify.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fqc/mdp.hpp"
#include "fqc/presets.hpp"
#include "fqc/relu_convex.hpp"
#include "fqc/rng.hpp"

namespace fqc {

namespace {

Eigen::MatrixXd random_design(std::mt19937_64& rng, int n, int d) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd X(n, d);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) X(r, c) = unit(rng);
    return X;
}

SuiteResult loss_equality_suite(std::uint64_t seed) {
    SuiteResult res{"loss-equality", true, ""};
    auto rng = make_rng(seed, "verify-loss-eq");
    std::uniform_int_distribution<int> n_dist(2, 8), d_dist(2, 4), g_dist(1, 8);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = n_dist(rng), d = d_dist(rng), g = g_dist(rng);
        const Eigen::MatrixXd X = random_design(rng, n, d);
        Eigen::VectorXd y(n);
        for (int r = 0; r < n; ++r) y(r) = normal(rng);
        GateSet gates = sample_gates(X, g, rng);
        ConvexParams u;
        u.u.resize(gates.count(), d);
        for (int i = 0; i < gates.count(); ++i)
            for (int c = 0; c < d; ++c) u.u(i, c) = normal(rng);
        const double cvx = convex_loss(u, gates, X, y);
        const ReluNetwork net = psi_transform(cone_decompose(u, gates, X));
        const double ncvx = nonconvex_loss(net, X, y, 0.0);
        worst = std::max(worst, std::abs(cvx - ncvx));
    }
    res.passed = worst <= 1e-8;
    std::ostringstream os;
    os << "max |convex - nonconvex| = " << worst;
    res.detail = os.str();
    return res;
}

SuiteResult projection_suite(std::uint64_t seed, double perturbation) {
    SuiteResult res{"projection", true, ""};
    auto rng = make_rng(seed, "verify-projection");
    std::normal_distribution<double> normal(0.0, 2.0);
    std::uniform_int_distribution<int> dim_dist(1, 50);
    std::uniform_real_distribution<double> rad_dist(0.1, 3.0);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int dim = dim_dist(rng);
        const double radius = rad_dist(rng);
        Eigen::VectorXd x(dim);
        for (int i = 0; i < dim; ++i) x(i) = normal(rng);
        Eigen::VectorXd p = l1_ball_projection(x, radius);
        p.array() += perturbation;  // test hook, zero in production
        const double excess = p.cwiseAbs().sum() - radius;
        worst = std::max(worst, excess);
        const Eigen::VectorXd pp = l1_ball_projection(p, radius);
        worst = std::max(worst, (pp - p).cwiseAbs().maxCoeff());
        // Projection must beat random feasible points.
        for (int t = 0; t < 50; ++t) {
            Eigen::VectorXd z(dim);
            for (int i = 0; i < dim; ++i) z(i) = normal(rng);
            const double n1 = z.cwiseAbs().sum();
            if (n1 > radius) z *= radius / n1;
            if ((x - p).norm() > (x - z).norm() + 1e-9)
                worst = std::max(worst, (x - p).norm() - (x - z).norm());
        }
    }
    res.passed = worst <= 1e-9;
    std::ostringstream os;
    os << "max constraint/optimality violation = " << worst;
    res.detail = os.str();
    return res;
}

SuiteResult gradient_suite(std::uint64_t seed) {
    SuiteResult res{"gradient", true, ""};
    auto rng = make_rng(seed, "verify-gradient");
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 4, d = 3, g = 3;
        const Eigen::MatrixXd X = random_design(rng, n, d);
        Eigen::VectorXd y(n);
        for (int r = 0; r < n; ++r) y(r) = normal(rng);
        GateSet gates = sample_gates(X, g, rng);
        ConvexParams u;
        u.u.resize(gates.count(), d);
        for (int i = 0; i < gates.count(); ++i)
            for (int c = 0; c < d; ++c) u.u(i, c) = normal(rng);
        const ConvexParams grad = convex_grad(u, gates, X, y);
        const double h = 1e-6;
        for (int i = 0; i < gates.count(); ++i)
            for (int c = 0; c < d; ++c) {
                ConvexParams up = u, down = u;
                up.u(i, c) += h;
                down.u(i, c) -= h;
                const double fd =
                    (convex_loss(up, gates, X, y) - convex_loss(down, gates, X, y)) / (2.0 * h);
                worst = std::max(worst, std::abs(fd - grad.u(i, c)));
            }
    }
    res.passed = worst <= 1e-5;
    std::ostringstream os;
    os << "max |grad - finite difference| = " << worst;
    res.detail = os.str();
    return res;
}

SuiteResult gate_enumeration_suite(std::uint64_t seed) {
    SuiteResult res{"gate-enumeration", true, ""};
    auto rng = make_rng(seed, "verify-gates");
    bool ok = true;
    std::ostringstream os;
    for (int trial = 0; trial < 10 && ok; ++trial) {
        const int n = 4 + trial % 3, d = 2 + trial % 2;
        const Eigen::MatrixXd X = random_design(rng, n, d);
        const GateSet exact = enumerate_gates_exact(X);
        if (exact.count() > (1 << n)) {
            ok = false;
            os << "pattern count exceeds 2^n";
            break;
        }
        std::set<GateMask> realizable(exact.masks.begin(), exact.masks.end());
        GateSet sampled = sample_gates(X, 128, rng);
        for (const auto& m : sampled.masks)
            if (!realizable.count(m)) {
                ok = false;
                os << "sampled mask missing from exact enumeration";
                break;
            }
    }
    res.passed = ok;
    if (ok) os << "sampled masks realizable, counts within bound";
    res.detail = os.str();
    return res;
}

SuiteResult bellman_oracle_suite(std::uint64_t seed) {
    SuiteResult res{"bellman-oracle", true, ""};
    const TabularMDP mdp = benchmark_chain_mdp();
    const double tol = 1e-10;
    const QTable q_star = value_iteration_qstar(mdp, tol);
    const QTable backed = bellman_apply(mdp, q_star);
    const double residual = (backed - q_star).cwiseAbs().maxCoeff();
    bool ok = residual <= tol;
    // Optimal-policy consistency: evaluating the greedy policy reproduces Q*.
    const QTable q_pi = policy_evaluation_q(mdp, greedy_policy(q_star), tol);
    const double gap = (q_star - q_pi).cwiseAbs().maxCoeff();
    ok = ok && gap <= 2.0 * tol / (1.0 - mdp.gamma) + 1e-8;
    (void)seed;
    std::ostringstream os;
    os << "VI residual = " << residual << ", greedy consistency gap = " << gap;
    res.passed = ok;
    res.detail = os.str();
    return res;
}

}  // namespace

std::vector<SuiteResult> run_verification_suites(const VerifyOptions& opts) {
    return {
        loss_equality_suite(opts.seed),
        projection_suite(opts.seed, opts.projection_perturbation),
        gradient_suite(opts.seed),
        gate_enumeration_suite(opts.seed),
        bellman_oracle_suite(opts.seed),
    };
}

}  // namespace fqc
