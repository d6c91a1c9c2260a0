#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace fqc {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Q values live in an S x A table.
using QTable = Eigen::MatrixXd;
// One deterministic action per state.
using Policy = std::vector<int>;

// Finite MDP with a generative sampling interface. Transition rows are
// indexed by the flattened pair s * num_actions + a.
struct TabularMDP {
    int num_states = 0;
    int num_actions = 0;
    double gamma = 0.0;
    double r_max = 0.0;
    Eigen::MatrixXd transition;   // (S*A) x S, rows sum to 1
    Eigen::MatrixXd reward_mean;  // S x A, entries in [0, r_max]
    double reward_noise_halfwidth = 0.0;  // truncated uniform noise, 0 = deterministic

    int pair_index(int s, int a) const { return s * num_actions + a; }
    double q_max() const { return r_max / (1.0 - gamma); }
    void validate() const;
};

struct SamplePair {
    int state = 0;
    int action = 0;
    int next_state = 0;
    double reward = 0.0;
    Eigen::VectorXd features;  // filled by the caller when needed
};

// Deterministic embedding of the finite (s,a) set into [0,1]^d. The first two
// coordinates are evenly spaced in the state and action index; any remaining
// coordinates come from a seeded random matrix applied to the one-hot pair,
// squashed into (0,1).
struct FeatureMap {
    int dim = 0;
    Eigen::MatrixXd rows;  // (S*A) x dim

    Eigen::VectorXd embed(const TabularMDP& mdp, int s, int a) const {
        return rows.row(mdp.pair_index(s, a)).transpose();
    }
};

FeatureMap make_feature_map(const TabularMDP& mdp, int dim, std::uint64_t seed);

SamplePair sample_transition(const TabularMDP& mdp, int s, int a, std::mt19937_64& rng);

// One application of the optimality backup to a Q table, using the known
// transition table.
QTable bellman_apply(const TabularMDP& mdp, const QTable& q);
// Backup under a fixed deterministic policy.
QTable bellman_apply_policy(const TabularMDP& mdp, const QTable& q, const Policy& policy);

QTable value_iteration_qstar(const TabularMDP& mdp, double tol);
QTable policy_evaluation_q(const TabularMDP& mdp, const Policy& policy, double tol);

// Argmax per state, ties broken by lowest action index.
Policy greedy_policy(const QTable& q);

// E_mu[Q* - Q^{greedy(q_est)}]; mu is an S x A weight table summing to 1.
double performance_gap(const TabularMDP& mdp, const QTable& q_est, const Eigen::MatrixXd& mu);

Eigen::MatrixXd uniform_distribution(const TabularMDP& mdp);

}  // namespace fqc
