#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fqc/mdp.hpp"
#include "fqc/relu_convex.hpp"

namespace fqc {

struct FqiSchedule {
    int iterations = 1;                  // K
    std::vector<int> samples_per_iter;   // n_k, length K
    std::vector<int> pgd_steps_per_iter; // T_k, length K
    int gate_count = 16;                 // |D~|
    StepMode step_mode = StepMode::Backtracking;
    Eigen::MatrixXd nu;                  // S x A sampling distribution, sums to 1
    std::uint64_t seed = 0;

    void validate(const TabularMDP& mdp) const;
};

struct IterationLog {
    int k = 0;
    int n_k = 0;
    int T_k = 0;
    double train_loss = 0.0;
    double bellman_error = 0.0;
    double gap = 0.0;
    double wall_ms = 0.0;
};

struct RunRecord {
    std::vector<IterationLog> iterations;
    double final_gap = 0.0;
    std::int64_t total_samples = 0;
};

// Everything needed to replay/diagnose one fit.
struct IterationContext {
    int k = 0;
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    GateSet gates;
    ReluNetwork net_prev;
    ReluNetwork net;
    int pgd_steps = 0;
    double radius = 0.0;
};

struct FqiOptions {
    bool keep_contexts = false;
    bool log_diagnostics = true;  // per-iteration exact Bellman error and gap
};

struct FqiResult {
    ReluNetwork net;
    Policy policy;
    RunRecord record;
    std::vector<IterationContext> contexts;
};

// Clipped network evaluation over all featurized pairs.
QTable q_table_from_network(const TabularMDP& mdp, const FeatureMap& features,
                            const ReluNetwork& net, bool clip);

// y_i = r'_i + gamma * max_a' clip(q_prev(s'_i, a'), [0, q_max]).
Eigen::VectorXd build_targets(const std::vector<SamplePair>& batch, const QTable& q_prev_clipped,
                              double gamma);

FqiResult fqi_run(const TabularMDP& mdp, const FeatureMap& features, const FqiSchedule& schedule,
                  const FqiOptions& opts = {});

struct TheoremConstants {
    double phi = 1.0;      // concentrability surrogate
    double c_k = 1.0;
    double eta = 1.0;
    double beta_k = 1.0;
    double c_prime = 1.0;
    double l_k = 1.0;
    double lipschitz = 1.0;
    double u_star_norm = 1.0;
};

struct TheoremSchedule {
    int iterations = 0;  // K
    long long samples_per_iter = 0;
    long long pgd_steps_per_iter = 0;
    double step_size = 0.0;
};

TheoremSchedule theorem_schedule(double gamma, double r_max, double epsilon,
                                 const TheoremConstants& constants);

}  // namespace fqc
