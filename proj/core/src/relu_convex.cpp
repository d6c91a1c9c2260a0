#include "fqc/relu_convex.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fqc/mdp.hpp"

namespace fqc {

namespace {

Eigen::VectorXd vec_params(const ConvexParams& u) {
    const int g = static_cast<int>(u.u.rows());
    const int d = static_cast<int>(u.u.cols());
    Eigen::VectorXd v(g * d);
    for (int i = 0; i < g; ++i) v.segment(i * d, d) = u.u.row(i).transpose();
    return v;
}

ConvexParams unvec_params(const Eigen::VectorXd& v, int gates, int d) {
    ConvexParams out;
    out.u.resize(gates, d);
    for (int i = 0; i < gates; ++i) out.u.row(i) = v.segment(i * d, d).transpose();
    return out;
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double largest_eigenvalue(const Eigen::MatrixXd& G) {
    if (G.rows() == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(G.rows()).normalized();
    double lambda = 0.0;
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd w = G * v;
        const double norm = w.norm();
        if (norm <= 0.0) return 0.0;
        w /= norm;
        const double next = w.dot(G * w);
        if (std::abs(next - lambda) <= 1e-12 * std::max(1.0, std::abs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
        v = w;
    }
    return std::max(lambda, 0.0);
}

GateMask mask_from_bits(std::uint32_t bits, int n) {
    GateMask m(n);
    for (int j = 0; j < n; ++j) m[j] = (bits >> j) & 1u;
    return m;
}

}  // namespace

GateMask gate_mask(const Eigen::MatrixXd& X, const Eigen::VectorXd& direction) {
    GateMask m(X.rows());
    const Eigen::VectorXd z = X * direction;
    for (int j = 0; j < X.rows(); ++j) m[j] = z(j) > 0.0 ? 1 : 0;
    return m;
}

GateSet sample_gates(const Eigen::MatrixXd& X, int count, std::mt19937_64& rng) {
    if (count < 1) throw InputError("sample_gates: count must be >= 1");
    GateSet out;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::set<GateMask> seen;
    for (int i = 0; i < count; ++i) {
        Eigen::VectorXd g(X.cols());
        for (int j = 0; j < X.cols(); ++j) g(j) = normal(rng);
        GateMask m = gate_mask(X, g);
        if (seen.insert(m).second) out.masks.push_back(std::move(m));
    }
    return out;
}

std::optional<Eigen::VectorXd> solve_linear_inequalities(const Eigen::MatrixXd& A,
                                                         const Eigen::VectorXd& c,
                                                         const Eigen::VectorXd& x0,
                                                         int max_passes) {
    const int rows = static_cast<int>(A.rows());
    Eigen::VectorXd sq_norms(rows);
    for (int j = 0; j < rows; ++j) {
        sq_norms(j) = A.row(j).squaredNorm();
        if (sq_norms(j) == 0.0 && c(j) > 0.0) return std::nullopt;  // 0 >= c_j impossible
    }
    Eigen::VectorXd x = x0;
    const double tol = 1e-12;
    for (int pass = 0; pass < max_passes; ++pass) {
        bool violated = false;
        for (int j = 0; j < rows; ++j) {
            if (sq_norms(j) == 0.0) continue;
            const double gap = c(j) - A.row(j).dot(x);
            if (gap > tol) {
                violated = true;
                x += (1.5 * gap / sq_norms(j)) * A.row(j).transpose();
            }
        }
        if (!violated) return x;
    }
    return std::nullopt;
}

GateSet enumerate_gates_exact(const Eigen::MatrixXd& X) {
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    if (n > 12) throw InputError("enumerate_gates_exact: n too large for the oracle");

    // Seed with certified patterns from dense random sampling; every sampled
    // direction is its own realizability certificate.
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::set<std::uint32_t> certified;
    certified.insert(0u);  // u = 0 realizes the all-zero pattern
    const int draws = std::min(50000, 200 << n);
    for (int t = 0; t < draws; ++t) {
        Eigen::VectorXd g(d);
        for (int j = 0; j < d; ++j) g(j) = normal(rng);
        std::uint32_t bits = 0;
        const Eigen::VectorXd z = X * g;
        for (int j = 0; j < n; ++j)
            if (z(j) > 0.0) bits |= (1u << j);
        certified.insert(bits);
    }

    GateSet out;
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        if (!certified.count(bits)) {
            // Strict feasibility test: x_j.u >= 1 on active rows, x_j.u <= 0
            // on inactive rows (any positive margin rescales to 1).
            Eigen::MatrixXd A(n, d);
            Eigen::VectorXd c(n);
            for (int j = 0; j < n; ++j) {
                const bool on = (bits >> j) & 1u;
                if (on)
                    A.row(j) = X.row(j);
                else
                    A.row(j) = -X.row(j);
                c(j) = on ? 1.0 : 0.0;
            }
            auto sol = solve_linear_inequalities(A, c, Eigen::VectorXd::Zero(d));
            if (!sol) continue;
            if (gate_mask(X, *sol) != mask_from_bits(bits, n)) continue;
        }
        out.masks.push_back(mask_from_bits(bits, n));
    }
    return out;
}

Eigen::MatrixXd stacked_gated_design(const Eigen::MatrixXd& X, const GateSet& gates) {
    const int n = static_cast<int>(X.rows());
    const int d = static_cast<int>(X.cols());
    const int g = gates.count();
    Eigen::MatrixXd M(n, g * d);
    for (int i = 0; i < g; ++i) {
        for (int r = 0; r < n; ++r)
            M.block(r, i * d, 1, d) =
                gates.masks[i][r] ? X.row(r) : Eigen::RowVectorXd::Zero(d).eval();
    }
    return M;
}

Eigen::VectorXd convex_predictions(const ConvexParams& u, const GateSet& gates,
                                   const Eigen::MatrixXd& X) {
    if (u.u.rows() != gates.count() || u.u.cols() != X.cols())
        throw InputError("convex parameters do not match gates/design");
    Eigen::VectorXd pred = Eigen::VectorXd::Zero(X.rows());
    for (int i = 0; i < gates.count(); ++i) {
        const Eigen::VectorXd z = X * u.u.row(i).transpose();
        for (int r = 0; r < X.rows(); ++r)
            if (gates.masks[i][r]) pred(r) += z(r);
    }
    return pred;
}

double convex_loss(const ConvexParams& u, const GateSet& gates, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y) {
    if (y.size() != X.rows()) throw InputError("convex_loss: target length mismatch");
    return (convex_predictions(u, gates, X) - y).squaredNorm();
}

ConvexParams convex_grad(const ConvexParams& u, const GateSet& gates, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y) {
    if (y.size() != X.rows()) throw InputError("convex_grad: target length mismatch");
    const Eigen::VectorXd residual = convex_predictions(u, gates, X) - y;
    ConvexParams grad;
    grad.u.resize(gates.count(), X.cols());
    for (int i = 0; i < gates.count(); ++i) {
        Eigen::VectorXd gated = residual;
        for (int r = 0; r < X.rows(); ++r)
            if (!gates.masks[i][r]) gated(r) = 0.0;
        grad.u.row(i) = 2.0 * (X.transpose() * gated).transpose();
    }
    return grad;
}

Eigen::VectorXd l1_ball_projection(const Eigen::VectorXd& x, double radius) {
    if (!(radius > 0.0)) throw InputError("l1_ball_projection: radius must be positive");
    const double norm1 = x.cwiseAbs().sum();
    if (norm1 <= radius) return x;
    // Soft-threshold with the KKT multiplier found from the sorted magnitudes.
    std::vector<double> mags(x.size());
    for (int i = 0; i < x.size(); ++i) mags[i] = std::abs(x(i));
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (int k = 0; k < static_cast<int>(mags.size()); ++k) {
        cumulative += mags[k];
        const double candidate = (cumulative - radius) / (k + 1);
        if (k + 1 == static_cast<int>(mags.size()) || mags[k + 1] <= candidate) {
            theta = candidate;
            break;
        }
    }
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double mag = std::max(std::abs(x(i)) - theta, 0.0);
        out(i) = x(i) >= 0.0 ? mag : -mag;
    }
    return out;
}

PgdResult projected_gradient_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const GateSet& gates, const PgdOptions& opts) {
    if (opts.steps < 1) throw InputError("pgd: steps must be >= 1");
    if (!(opts.radius > 0.0)) throw InputError("pgd: radius must be positive");
    const int d = static_cast<int>(X.cols());
    const int g = gates.count();
    const int dim = g * d;

    const Eigen::MatrixXd M = stacked_gated_design(X, gates);
    const Eigen::MatrixXd G = M.transpose() * M;
    const Eigen::VectorXd b = M.transpose() * y;
    const double yy = y.squaredNorm();
    const double lambda_max = largest_eigenvalue(G);
    const double sigma_max = std::sqrt(lambda_max);

    auto loss_at = [&](const Eigen::VectorXd& v) {
        return std::max(0.0, v.dot(G * v) - 2.0 * b.dot(v) + yy);
    };

    PgdResult result;
    result.lipschitz_estimate = 2.0 * sigma_max * std::sqrt(yy);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
    double f = loss_at(u);
    if (opts.record_losses) result.losses.push_back(f);

    if (opts.mode == StepMode::FixedTheory) {
        const double denom = result.lipschitz_estimate * std::sqrt(opts.steps + 1.0);
        result.step_size = denom > 0.0 ? opts.radius / denom : 0.0;
        for (int t = 0; t < opts.steps; ++t) {
            const Eigen::VectorXd grad = 2.0 * (G * u - b);
            u = l1_ball_projection(u - result.step_size * grad, opts.radius);
            f = loss_at(u);
            if (!std::isfinite(f)) throw InputError("pgd: loss diverged");
            if (opts.record_losses) result.losses.push_back(f);
        }
    } else {
        // Backtracking on the proximal-gradient model; every accepted step is
        // nonincreasing in the objective.
        double alpha = lambda_max > 0.0 ? 1.0 / lambda_max : 1.0;
        for (int t = 0; t < opts.steps; ++t) {
            const Eigen::VectorXd grad = 2.0 * (G * u - b);
            Eigen::VectorXd candidate;
            double f_new = f;
            for (int bt = 0; bt < 60; ++bt) {
                candidate = l1_ball_projection(u - alpha * grad, opts.radius);
                const Eigen::VectorXd step = candidate - u;
                f_new = loss_at(candidate);
                const double model = f + grad.dot(step) + step.squaredNorm() / (2.0 * alpha);
                if (f_new <= model + 1e-12 * std::max(1.0, f)) break;
                alpha *= 0.5;
            }
            if (f_new > f) {
                candidate = u;  // no acceptable step; stay put
                f_new = f;
            }
            u = candidate;
            f = f_new;
            if (!std::isfinite(f)) throw InputError("pgd: loss diverged");
            if (opts.record_losses) result.losses.push_back(f);
            alpha = std::min(alpha * 1.25, lambda_max > 0.0 ? 16.0 / lambda_max : 1.0);
        }
    }

    result.u = unvec_params(u, g, d);
    result.final_loss = f;
    return result;
}

bool in_cone(const Eigen::MatrixXd& X, const GateMask& mask, const Eigen::VectorXd& v,
             double slack) {
    const Eigen::VectorXd z = X * v;
    for (int r = 0; r < X.rows(); ++r) {
        const double signed_val = mask[r] ? z(r) : -z(r);
        if (signed_val < -slack) return false;
    }
    return true;
}

ConeDecomposition cone_decompose(const ConvexParams& u, const GateSet& gates,
                                 const Eigen::MatrixXd& X) {
    const int d = static_cast<int>(X.cols());
    const int n = static_cast<int>(X.rows());
    ConeDecomposition dec;
    dec.v = Eigen::MatrixXd::Zero(gates.count(), d);
    dec.w = Eigen::MatrixXd::Zero(gates.count(), d);
    for (int i = 0; i < gates.count(); ++i) {
        const Eigen::VectorXd ui = u.u.row(i).transpose();
        if (ui.isZero(0.0)) continue;
        if (in_cone(X, gates.masks[i], ui)) {
            dec.v.row(i) = ui.transpose();
            continue;
        }
        if (in_cone(X, gates.masks[i], -ui)) {
            dec.w.row(i) = -ui.transpose();
            continue;
        }
        // General split: find a strict interior direction p of K_i, then
        // v = u + lambda p and w = lambda p both lie in K_i.
        Eigen::MatrixXd A(n, d);
        Eigen::VectorXd margins(n);
        for (int r = 0; r < n; ++r) {
            if (gates.masks[i][r])
                A.row(r) = X.row(r);
            else
                A.row(r) = -X.row(r);
            margins(r) = A.row(r).isZero(0.0) ? 0.0 : 1.0;  // zero rows are vacuous
        }
        // Warm-start the relaxation from the least-squares point of A p = margins;
        // thin cones can need far more passes from a cold start.
        const Eigen::VectorXd warm = A.colPivHouseholderQr().solve(margins);
        auto p = solve_linear_inequalities(A, margins, warm, 200000);
        if (!p) p = solve_linear_inequalities(A, margins, Eigen::VectorXd::Zero(d), 200000);
        if (!p)
            throw InputError(
                "cone_decompose: no interior point for gate mask (mask not realizable on X)");
        const Eigen::VectorXd au = A * ui;
        const Eigen::VectorXd ap = A * (*p);
        double lambda = 0.0;
        for (int r = 0; r < n; ++r)
            if (au(r) < 0.0) lambda = std::max(lambda, -au(r) / ap(r));
        dec.v.row(i) = (ui + lambda * (*p)).transpose();
        dec.w.row(i) = (lambda * (*p)).transpose();
    }
    return dec;
}

ReluNetwork psi_transform(const ConeDecomposition& dec) {
    std::vector<Eigen::VectorXd> weights;
    std::vector<int> alphas;
    for (int i = 0; i < dec.v.rows(); ++i) {
        if (!dec.v.row(i).isZero(0.0)) {
            weights.push_back(dec.v.row(i).transpose());
            alphas.push_back(1);
        }
        if (!dec.w.row(i).isZero(0.0)) {
            weights.push_back(dec.w.row(i).transpose());
            alphas.push_back(-1);
        }
    }
    ReluNetwork net;
    net.weights.resize(static_cast<int>(weights.size()), dec.v.cols());
    net.alpha.resize(static_cast<int>(weights.size()));
    for (size_t i = 0; i < weights.size(); ++i) {
        net.weights.row(static_cast<int>(i)) = weights[i].transpose();
        net.alpha(static_cast<int>(i)) = alphas[i];
    }
    return net;
}

double network_forward(const ReluNetwork& net, const Eigen::VectorXd& x) {
    if (!net.empty() && net.weights.cols() != x.size())
        throw InputError("network_forward: dimension mismatch");
    double out = 0.0;
    for (int i = 0; i < net.neuron_count(); ++i)
        out += std::max(net.weights.row(i).dot(x.transpose()), 0.0) * net.alpha(i);
    return out;
}

Eigen::VectorXd network_predictions(const ReluNetwork& net, const Eigen::MatrixXd& X) {
    if (net.empty()) return Eigen::VectorXd::Zero(X.rows());
    if (net.weights.cols() != X.cols()) throw InputError("network_predictions: dimension mismatch");
    const Eigen::MatrixXd Z = (X * net.weights.transpose()).cwiseMax(0.0);
    return Z * net.alpha.cast<double>();
}

double nonconvex_loss(const ReluNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      double beta) {
    if (y.size() != X.rows()) throw InputError("nonconvex_loss: target length mismatch");
    double loss = (network_predictions(net, X) - y).squaredNorm();
    if (beta != 0.0) {
        for (int i = 0; i < net.neuron_count(); ++i) {
            loss += beta * net.weights.row(i).squaredNorm();
            loss += beta * static_cast<double>(net.alpha(i) * net.alpha(i));
        }
    }
    return loss;
}

GateSufficiencyReport verify_gate_sufficiency(const ReluNetwork& net_ref, const GateSet& gates,
                                              const Eigen::MatrixXd& X, int convex_nonzero_count) {
    GateSufficiencyReport report;
    std::set<GateMask> available(gates.masks.begin(), gates.masks.end());
    int contained = 0;
    for (int i = 0; i < net_ref.neuron_count(); ++i) {
        // Reference gates use the >= 0 convention for the induced patterns.
        const Eigen::VectorXd z = X * net_ref.weights.row(i).transpose();
        GateMask m(X.rows());
        for (int r = 0; r < X.rows(); ++r) m[r] = z(r) >= 0.0 ? 1 : 0;
        const bool ok = available.count(m) > 0;
        report.contained.push_back(ok);
        if (ok) ++contained;
    }
    report.containment_fraction =
        net_ref.neuron_count() == 0 ? 1.0 : static_cast<double>(contained) / net_ref.neuron_count();
    report.all_contained = contained == net_ref.neuron_count();
    if (convex_nonzero_count >= 0)
        report.neuron_count_ok = net_ref.neuron_count() >= convex_nonzero_count;
    return report;
}

}  // namespace fqc
