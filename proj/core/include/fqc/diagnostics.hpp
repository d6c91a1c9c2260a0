#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "fqc/fqi.hpp"
#include "fqc/mdp.hpp"

namespace fqc {

struct ErrorBreakdown {
    int k = 0;
    double bellman_error_l1 = 0.0;
    double approx_error_est = 0.0;
    double estimation_error = 0.0;  // identically zero, reported for completeness
    double sampling_error_est = 0.0;
    double optimization_error_est = 0.0;
    double ref_fit_loss_k1 = 0.0;
    double ref_fit_loss_k3 = 0.0;
    bool reliable = true;
    std::string notes;
};

struct OracleBudget {
    int exact_gate_limit = 10;   // full enumeration when n <= limit
    int pgd_multiplier = 10;     // reference solves run this many times the run's T
    int sampled_gate_count = 256;
    double ref_loss_tolerance = 1e-2;
};

struct SweepCell {
    int n = 0;
    std::uint64_t seed = 0;
    double final_gap = 0.0;
    double wall_ms = 0.0;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<int> budgets;
    std::vector<double> median_gaps;  // per budget
    double floor = 0.0;               // median gap at the largest budget
    std::optional<double> slope;      // log-log slope of floor-subtracted medians
    bool identifiable = false;
};

// E_nu |(T Q_{k-1})(s,a) - Q_k(s,a)| with the exact backup (diagnostic
// privilege: uses the known transition table).
double bellman_error_tables(const TabularMDP& mdp, const QTable& q_prev, const QTable& q_k,
                            const Eigen::MatrixXd& nu);
double bellman_error(const TabularMDP& mdp, const FeatureMap& features, const ReluNetwork& q_prev,
                     const ReluNetwork& q_k, const Eigen::MatrixXd& nu);

ErrorBreakdown error_decomposition(const TabularMDP& mdp, const FeatureMap& features,
                                   const IterationContext& ctx, const Eigen::MatrixXd& nu,
                                   const OracleBudget& budget = {});

// Least-squares slope of log(value - floor) vs log(n); nonpositive
// floor-subtracted values are dropped; nullopt when fewer than two usable
// points remain.
std::optional<double> fit_loglog_slope(const std::vector<int>& ns,
                                       const std::vector<double>& values, double floor);

SweepResult sample_complexity_sweep(const TabularMDP& mdp, const FeatureMap& features,
                                    const FqiSchedule& base, const std::vector<int>& n_grid,
                                    int num_seeds, int jobs = 1);

double median(std::vector<double> values);

}  // namespace fqc
