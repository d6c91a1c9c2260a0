#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fqc {

// One activation pattern over the n data rows (the diagonal of a gate matrix).
using GateMask = std::vector<std::uint8_t>;

struct GateSet {
    std::vector<GateMask> masks;  // distinct after deduplication
    std::uint64_t generator_seed = 0;
    int count() const { return static_cast<int>(masks.size()); }
};

// Stacked per-gate weight vectors, one row per gate.
struct ConvexParams {
    Eigen::MatrixXd u;  // |gates| x d
};

// Two-layer ReLU network with second-layer weights restricted to {-1, 0, +1}.
struct ReluNetwork {
    Eigen::MatrixXd weights;  // m x d, one neuron per row
    Eigen::VectorXi alpha;    // m, entries in {-1, 0, +1}
    int neuron_count() const { return static_cast<int>(weights.rows()); }
    bool empty() const { return weights.rows() == 0; }
};

struct ConeDecomposition {
    Eigen::MatrixXd v;  // |gates| x d, row i in cone K_i
    Eigen::MatrixXd w;  // |gates| x d, row i in cone K_i, u_i = v_i - w_i
};

enum class StepMode { FixedTheory, Backtracking };

struct PgdOptions {
    int steps = 100;
    double radius = 1.0;
    StepMode mode = StepMode::Backtracking;
    bool record_losses = false;
};

struct PgdResult {
    ConvexParams u;
    double final_loss = 0.0;
    double step_size = 0.0;           // fixed mode only
    double lipschitz_estimate = 0.0;  // 2 * sigma_max(M) * ||residual at start||
    std::vector<double> losses;       // per-iterate losses when recorded
};

struct GateSufficiencyReport {
    std::vector<bool> contained;      // per reference neuron
    double containment_fraction = 1.0;
    bool all_contained = true;
    bool neuron_count_ok = true;      // m_ref >= nonzero count of convex solution
};

GateMask gate_mask(const Eigen::MatrixXd& X, const Eigen::VectorXd& direction);

GateSet sample_gates(const Eigen::MatrixXd& X, int count, std::mt19937_64& rng);

// Exact realizable pattern set; oracle-scale only (n <= 12). Every returned
// mask carries a feasibility certificate, duplicates removed.
GateSet enumerate_gates_exact(const Eigen::MatrixXd& X);

// n x (|gates| * d) matrix with block i equal to D_i X.
Eigen::MatrixXd stacked_gated_design(const Eigen::MatrixXd& X, const GateSet& gates);

Eigen::VectorXd convex_predictions(const ConvexParams& u, const GateSet& gates,
                                   const Eigen::MatrixXd& X);
double convex_loss(const ConvexParams& u, const GateSet& gates, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y);
ConvexParams convex_grad(const ConvexParams& u, const GateSet& gates, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y);

Eigen::VectorXd l1_ball_projection(const Eigen::VectorXd& x, double radius);

PgdResult projected_gradient_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     const GateSet& gates, const PgdOptions& opts);

// Membership in K_i: (2 D_i - I) X v >= -slack componentwise.
bool in_cone(const Eigen::MatrixXd& X, const GateMask& mask, const Eigen::VectorXd& v,
             double slack = 1e-9);

ConeDecomposition cone_decompose(const ConvexParams& u, const GateSet& gates,
                                 const Eigen::MatrixXd& X);

ReluNetwork psi_transform(const ConeDecomposition& dec);

double network_forward(const ReluNetwork& net, const Eigen::VectorXd& x);
Eigen::VectorXd network_predictions(const ReluNetwork& net, const Eigen::MatrixXd& X);

double nonconvex_loss(const ReluNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      double beta);

GateSufficiencyReport verify_gate_sufficiency(const ReluNetwork& net_ref, const GateSet& gates,
                                              const Eigen::MatrixXd& X,
                                              int convex_nonzero_count = -1);

// Shared feasibility kernel: find x with A x >= c (componentwise) by row
// projections; returns nullopt when no certificate is found.
std::optional<Eigen::VectorXd> solve_linear_inequalities(const Eigen::MatrixXd& A,
                                                         const Eigen::VectorXd& c,
                                                         const Eigen::VectorXd& x0,
                                                         int max_passes = 4000);

}  // namespace fqc
