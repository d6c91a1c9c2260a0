#include "fqc/mdp.hpp"

#include <algorithm>
#include <cmath>

#include "fqc/rng.hpp"

namespace fqc {

void TabularMDP::validate() const {
    if (num_states < 1 || num_actions < 1) throw InputError("mdp: need at least one state and action");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("mdp: gamma must lie in (0,1)");
    if (!(r_max > 0.0)) throw InputError("mdp: r_max must be positive");
    if (transition.rows() != num_states * num_actions || transition.cols() != num_states)
        throw InputError("mdp: transition table has wrong shape");
    if (reward_mean.rows() != num_states || reward_mean.cols() != num_actions)
        throw InputError("mdp: reward table has wrong shape");
    for (int i = 0; i < transition.rows(); ++i) {
        if (transition.row(i).minCoeff() < 0.0)
            throw InputError("mdp: negative transition probability");
        if (std::abs(transition.row(i).sum() - 1.0) > 1e-12)
            throw InputError("mdp: transition row does not sum to 1");
    }
    if (reward_mean.minCoeff() < 0.0 || reward_mean.maxCoeff() > r_max)
        throw InputError("mdp: reward outside [0, r_max]");
    if (reward_noise_halfwidth < 0.0) throw InputError("mdp: negative reward noise");
}

FeatureMap make_feature_map(const TabularMDP& mdp, int dim, std::uint64_t seed) {
    if (dim < 2) throw InputError("feature map: dim must be >= 2");
    const int S = mdp.num_states;
    const int A = mdp.num_actions;
    FeatureMap fm;
    fm.dim = dim;
    fm.rows.resize(S * A, dim);
    auto rng = make_rng(seed, "features");
    std::normal_distribution<double> normal(0.0, 1.0);
    // One fixed pseudo-random value per (pair, extra coordinate).
    Eigen::MatrixXd extra(S * A, std::max(0, dim - 2));
    for (int i = 0; i < extra.rows(); ++i)
        for (int j = 0; j < extra.cols(); ++j) extra(i, j) = 0.5 * (1.0 + std::tanh(normal(rng)));
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const int i = mdp.pair_index(s, a);
            // Evenly spaced in (0,1], touching 1 so the radius-constrained
            // solver can reach the full value range R_max/(1-gamma).
            fm.rows(i, 0) = static_cast<double>(s + 1) / S;
            fm.rows(i, 1) = static_cast<double>(a + 1) / A;
            for (int j = 2; j < dim; ++j) fm.rows(i, j) = extra(i, j - 2);
        }
    }
    return fm;
}

SamplePair sample_transition(const TabularMDP& mdp, int s, int a, std::mt19937_64& rng) {
    if (s < 0 || s >= mdp.num_states || a < 0 || a >= mdp.num_actions)
        throw InputError("sample_transition: index out of range");
    SamplePair out;
    out.state = s;
    out.action = a;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double t = unit(rng);
    double acc = 0.0;
    int next = mdp.num_states - 1;
    for (int sp = 0; sp < mdp.num_states; ++sp) {
        acc += mdp.transition(mdp.pair_index(s, a), sp);
        if (t < acc) {
            next = sp;
            break;
        }
    }
    out.next_state = next;
    double r = mdp.reward_mean(s, a);
    if (mdp.reward_noise_halfwidth > 0.0) {
        std::uniform_real_distribution<double> noise(-mdp.reward_noise_halfwidth,
                                                     mdp.reward_noise_halfwidth);
        r = std::clamp(r + noise(rng), 0.0, mdp.r_max);
    }
    out.reward = r;
    return out;
}

QTable bellman_apply(const TabularMDP& mdp, const QTable& q) {
    QTable out(mdp.num_states, mdp.num_actions);
    Eigen::VectorXd state_values(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) state_values(s) = q.row(s).maxCoeff();
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            out(s, a) = mdp.reward_mean(s, a) +
                        mdp.gamma * mdp.transition.row(mdp.pair_index(s, a)).dot(state_values);
    return out;
}

QTable bellman_apply_policy(const TabularMDP& mdp, const QTable& q, const Policy& policy) {
    QTable out(mdp.num_states, mdp.num_actions);
    Eigen::VectorXd state_values(mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) state_values(s) = q(s, policy[s]);
    for (int s = 0; s < mdp.num_states; ++s)
        for (int a = 0; a < mdp.num_actions; ++a)
            out(s, a) = mdp.reward_mean(s, a) +
                        mdp.gamma * mdp.transition.row(mdp.pair_index(s, a)).dot(state_values);
    return out;
}

QTable value_iteration_qstar(const TabularMDP& mdp, double tol) {
    mdp.validate();
    if (!(tol > 0.0)) throw InputError("value_iteration: tol must be positive");
    QTable q = QTable::Zero(mdp.num_states, mdp.num_actions);
    for (;;) {
        QTable next = bellman_apply(mdp, q);
        const double residual = (next - q).cwiseAbs().maxCoeff();
        q = next;
        if (residual <= tol) return q;
    }
}

QTable policy_evaluation_q(const TabularMDP& mdp, const Policy& policy, double tol) {
    mdp.validate();
    if (static_cast<int>(policy.size()) != mdp.num_states)
        throw InputError("policy_evaluation: policy must assign one action per state");
    QTable q = QTable::Zero(mdp.num_states, mdp.num_actions);
    for (;;) {
        QTable next = bellman_apply_policy(mdp, q, policy);
        const double residual = (next - q).cwiseAbs().maxCoeff();
        q = next;
        if (residual <= tol) return q;
    }
}

Policy greedy_policy(const QTable& q) {
    Policy policy(q.rows());
    for (int s = 0; s < q.rows(); ++s) {
        int best = 0;
        for (int a = 1; a < q.cols(); ++a)
            if (q(s, a) > q(s, best)) best = a;
        policy[s] = best;
    }
    return policy;
}

double performance_gap(const TabularMDP& mdp, const QTable& q_est, const Eigen::MatrixXd& mu) {
    if (mu.rows() != mdp.num_states || mu.cols() != mdp.num_actions)
        throw InputError("performance_gap: mu has wrong shape");
    if (std::abs(mu.sum() - 1.0) > 1e-9) throw InputError("performance_gap: mu must sum to 1");
    const double tol = 1e-12 * std::max(1.0, mdp.q_max());
    const QTable q_star = value_iteration_qstar(mdp, tol);
    const QTable q_pi = policy_evaluation_q(mdp, greedy_policy(q_est), tol);
    return (mu.array() * (q_star - q_pi).array()).sum();
}

Eigen::MatrixXd uniform_distribution(const TabularMDP& mdp) {
    return Eigen::MatrixXd::Constant(mdp.num_states, mdp.num_actions,
                                     1.0 / (mdp.num_states * mdp.num_actions));
}

}  // namespace fqc
