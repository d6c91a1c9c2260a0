#pragma once

#include "fqc/mdp.hpp"

namespace fqc {

// Benchmark 5-state, 2-action stochastic chain used by the experiment
// harness. Both actions drift toward the rewarding end: action 1 (advance)
// moves right 0.8 / stays 0.2, action 0 (dawdle) moves right 0.4 / stays
// 0.5 / slips left 0.1. Because dawdling still makes progress, the cost of
// one wrong greedy choice stays local, and the policy gap is (to first
// order) additive over the states where the learner dawdles.
//
// Rewards live in [0.06, 0.14] while r_max stays 1.0, so the l1 radius
// R_max/(1-gamma) = 10 used by the solver leaves the function class ample
// slack to interpolate Q* exactly. Reward noise is a truncated uniform of
// half-width 0.05 around the mean. The dawdle bonuses below were solved
// (against value iteration) so the optimality margins Q*(s,1) - Q*(s,0)
// are (0.003, 0.004, 0.006, 0.0065) on states 0..3 and ~0.089 on state 4:
// a ladder sitting at the scale of the statistical fitting noise, so the
// flip probability of each state decays as the sample budget grows.
inline TabularMDP benchmark_chain_mdp() {
    TabularMDP m;
    m.num_states = 5;
    m.num_actions = 2;
    m.gamma = 0.9;
    m.r_max = 1.0;
    m.reward_noise_halfwidth = 0.05;
    const int S = m.num_states;
    m.transition = Eigen::MatrixXd::Zero(S * 2, S);
    m.reward_mean = Eigen::MatrixXd::Zero(S, 2);
    for (int s = 0; s < S; ++s) {
        int left = std::max(0, s - 1);
        int right = std::min(S - 1, s + 1);
        // action 0: dawdle (slow advance, occasional slip back)
        m.transition(s * 2 + 0, right) += 0.4;
        m.transition(s * 2 + 0, s) += 0.5;
        m.transition(s * 2 + 0, left) += 0.1;
        // action 1: advance toward the rewarding end
        m.transition(s * 2 + 1, right) += 0.8;
        m.transition(s * 2 + 1, s) += 0.2;
        m.reward_mean(s, 1) = (s == S - 1) ? 0.14 : 0.06;
    }
    m.reward_mean(0, 0) = 0.080775768721262686;
    m.reward_mean(1, 0) = 0.089021901002089177;
    m.reward_mean(2, 0) = 0.09160827614138789;
    m.reward_mean(3, 0) = 0.096331647827811506;
    m.reward_mean(4, 0) = 0.06;
    return m;
}

// Degenerate single-state MDP with unit reward; Q* = 1/(1-gamma).
inline TabularMDP single_state_mdp(double gamma = 0.9) {
    TabularMDP m;
    m.num_states = 1;
    m.num_actions = 1;
    m.gamma = gamma;
    m.r_max = 1.0;
    m.transition = Eigen::MatrixXd::Ones(1, 1);
    m.reward_mean = Eigen::MatrixXd::Ones(1, 1);
    return m;
}

}  // namespace fqc
