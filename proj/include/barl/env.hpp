#pragma once

// Ground-truth tabular MDPs, the active-RL step protocol and the benchmark
// environment constructors.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "barl/rng.hpp"

namespace barl {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// Finite MDP with Bernoulli rewards. A success on (s,a) pays reward_scale(s,a)
/// (1 for every benchmark except the Double-Loop), a failure pays 0.
///
/// Tables are flat and row-major: transition is [s][a][s'], rewards are [s][a].
/// Rows of unavailable actions are all zero.
struct TabularMdp {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<std::vector<ActionIndex>> available_actions;
    std::vector<double> transition;
    std::vector<double> reward_param;
    std::vector<double> reward_scale;
    std::size_t episode_len = 1;
    StateIndex initial_state = 0;

    TabularMdp() = default;
    TabularMdp(std::size_t states, std::size_t actions, std::size_t tau)
        : num_states(states),
          num_actions(actions),
          available_actions(states),
          transition(states * actions * states, 0.0),
          reward_param(states * actions, 0.0),
          reward_scale(states * actions, 1.0),
          episode_len(tau) {}

    std::size_t sa(StateIndex s, ActionIndex a) const { return s * num_actions + a; }

    std::span<double> transition_row(StateIndex s, ActionIndex a) {
        return {transition.data() + sa(s, a) * num_states, num_states};
    }
    std::span<const double> transition_row(StateIndex s, ActionIndex a) const {
        return {transition.data() + sa(s, a) * num_states, num_states};
    }

    double& reward_p(StateIndex s, ActionIndex a) { return reward_param[sa(s, a)]; }
    double reward_p(StateIndex s, ActionIndex a) const { return reward_param[sa(s, a)]; }
    double scale(StateIndex s, ActionIndex a) const { return reward_scale[sa(s, a)]; }
    double expected_reward(StateIndex s, ActionIndex a) const {
        return reward_param[sa(s, a)] * reward_scale[sa(s, a)];
    }

    bool is_available(StateIndex s, ActionIndex a) const {
        if (s >= num_states) return false;
        const auto& acts = available_actions[s];
        return std::find(acts.begin(), acts.end(), a) != acts.end();
    }

    /// Largest single-step reward anywhere in the MDP.
    double max_reward() const {
        double r = 0.0;
        for (double v : reward_scale) r = std::max(r, v);
        return r;
    }

    /// Step t (0-based, global) is the last step of its episode.
    bool ends_episode(std::size_t t) const { return (t + 1) % episode_len == 0; }

    /// Where the agent continues after step t landed on `successor`.
    StateIndex continuation(std::size_t t, StateIndex successor) const {
        return ends_episode(t) ? initial_state : successor;
    }

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const {
        if (num_states == 0 || num_actions == 0) throw std::invalid_argument("MDP has no states or actions");
        if (episode_len == 0) throw std::invalid_argument("episode length must be positive");
        if (initial_state >= num_states) throw std::invalid_argument("initial state out of range");
        if (available_actions.size() != num_states || transition.size() != num_states * num_actions * num_states ||
            reward_param.size() != num_states * num_actions || reward_scale.size() != reward_param.size()) {
            throw std::invalid_argument("MDP tables have inconsistent sizes");
        }
        for (StateIndex s = 0; s < num_states; ++s) {
            if (available_actions[s].empty()) {
                throw std::invalid_argument("state " + std::to_string(s) + " has no available action");
            }
            for (ActionIndex a : available_actions[s]) {
                if (a >= num_actions) throw std::invalid_argument("action index out of range");
                double sum = 0.0;
                for (double p : transition_row(s, a)) {
                    if (p < 0.0) throw std::invalid_argument("negative transition probability");
                    sum += p;
                }
                if (std::abs(sum - 1.0) > 1e-9) {
                    throw std::invalid_argument("transition row (" + std::to_string(s) + "," + std::to_string(a) +
                                                ") sums to " + std::to_string(sum));
                }
                const double p = reward_p(s, a);
                if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("reward parameter outside [0,1]");
                if (scale(s, a) < 0.0) throw std::invalid_argument("negative reward scale");
            }
        }
    }

    friend bool operator==(const TabularMdp&, const TabularMdp&) = default;
};

/// An MDP together with the query cost, the horizon in episodes and what the
/// agent knows a priori.
struct ArlProblem {
    TabularMdp mdp;
    double query_cost = 0.5;
    std::size_t horizon = 1;
    bool known_transitions = false;
    bool known_rewards = false;

    std::size_t total_steps() const { return horizon * mdp.episode_len; }

    void validate() const {
        mdp.validate();
        if (!(query_cost > 0.0)) throw std::invalid_argument("query cost must be positive");
        if (horizon < 1) throw std::invalid_argument("horizon must be at least one episode");
    }

    friend bool operator==(const ArlProblem&, const ArlProblem&) = default;
};

/// Joint step decision: whether to pay for observing the reward, and the action.
struct ActionPair {
    bool query = false;
    ActionIndex action = 0;

    friend bool operator==(const ActionPair&, const ActionPair&) = default;
};

/// Observed reward; std::nullopt is the null reward of an unqueried step.
using Reward = std::optional<double>;

struct StepOutcome {
    StateIndex next_state = 0;
    Reward observed_reward;
    /// Bookkeeping for the return; never shown to agents.
    double true_reward = 0.0;

    friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

struct TraceStep {
    std::size_t t = 0;
    std::size_t episode = 0;
    StateIndex state = 0;
    ActionPair act;
    StepOutcome outcome;

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

/// Interaction history. `outcome.next_state` is the sampled successor; at an
/// episode boundary the following step starts from the initial state instead.
struct Trace {
    std::vector<TraceStep> steps;

    std::size_t query_count() const {
        return static_cast<std::size_t>(
            std::count_if(steps.begin(), steps.end(), [](const TraceStep& st) { return st.act.query; }));
    }

    friend bool operator==(const Trace&, const Trace&) = default;
};

// ---------------------------------------------------------------------------
// Protocol

inline StepOutcome step(const ArlProblem& problem, StateIndex state, ActionPair act, Rng& rng) {
    const TabularMdp& mdp = problem.mdp;
    if (!mdp.is_available(state, act.action)) {
        throw std::invalid_argument("action " + std::to_string(act.action) + " is not available in state " +
                                    std::to_string(state));
    }
    StepOutcome out;
    out.true_reward = bernoulli(rng, mdp.reward_p(state, act.action)) ? mdp.scale(state, act.action) : 0.0;
    out.next_state = sample_categorical(rng, mdp.transition_row(state, act.action));
    if (act.query) out.observed_reward = out.true_reward;
    return out;
}

/// Total true reward minus query costs; unobserved rewards count.
inline double return_of(const Trace& trace, double query_cost) {
    double total = 0.0;
    for (const TraceStep& st : trace.steps) {
        total += st.outcome.true_reward - (st.act.query ? query_cost : 0.0);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Benchmark constructors

/// Single-state bandit, one action per arm, one trial per episode.
inline ArlProblem make_bandit(std::span<const double> arm_means, std::size_t trials, double query_cost) {
    if (arm_means.empty()) throw std::invalid_argument("bandit needs at least one arm");
    if (trials < 1) throw std::invalid_argument("bandit needs at least one trial");
    TabularMdp mdp(1, arm_means.size(), 1);
    for (ActionIndex a = 0; a < arm_means.size(); ++a) {
        const double p = arm_means[a];
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("arm mean outside [0,1]");
        mdp.available_actions[0].push_back(a);
        mdp.transition_row(0, a)[0] = 1.0;
        mdp.reward_p(0, a) = p;
    }
    ArlProblem problem{std::move(mdp), query_cost, trials, true, false};
    problem.validate();
    return problem;
}

inline ArlProblem make_bandit(std::initializer_list<double> arm_means, std::size_t trials, double query_cost) {
    return make_bandit(std::span<const double>(arm_means.begin(), arm_means.size()), trials, query_cost);
}

/// Reward parameters of a Late Fork: one per chain state, two at the fork.
struct LateForkRewards {
    std::vector<double> chain;  // empty: 0.5 everywhere
    std::array<double, 2> fork{0.2, 0.8};
};

/// Chain 0 -> 1 -> ... -> N of forced actions; the fork N has two actions that
/// both end the episode back at state 0.
inline ArlProblem make_late_fork(std::size_t chain_len, double query_cost, std::size_t horizon,
                                 bool known_transitions, const LateForkRewards& rewards = {}) {
    if (chain_len < 1) throw std::invalid_argument("late fork needs chain length >= 1");
    if (!rewards.chain.empty() && rewards.chain.size() != chain_len) {
        throw std::invalid_argument("late fork chain rewards must have one entry per chain state");
    }
    const std::size_t n = chain_len;
    TabularMdp mdp(n + 1, 2, n + 1);
    for (StateIndex s = 0; s < n; ++s) {
        mdp.available_actions[s] = {0};
        mdp.transition_row(s, 0)[s + 1] = 1.0;
        mdp.reward_p(s, 0) = rewards.chain.empty() ? 0.5 : rewards.chain[s];
    }
    mdp.available_actions[n] = {0, 1};
    for (ActionIndex a = 0; a < 2; ++a) {
        mdp.transition_row(n, a)[0] = 1.0;
        mdp.reward_p(n, a) = rewards.fork[a];
    }
    ArlProblem problem{std::move(mdp), query_cost, horizon, known_transitions, false};
    problem.validate();
    return problem;
}

/// Reward parameters of an Early Fork: the two fork actions and each branch's chain.
struct EarlyForkRewards {
    std::array<double, 2> fork{0.5, 0.5};
    std::array<std::vector<double>, 2> chains;  // empty: 0.4 on branch 0, 0.6 on branch 1
};

/// Fork at state 0; action k enters a chain of N-1 forced states, the last of
/// which moves to a shared terminal state. State layout: 0 fork, branch k chain
/// at 1 + k(N-1) ... (k+1)(N-1), terminal last.
inline ArlProblem make_early_fork(std::size_t chain_len, double query_cost, std::size_t horizon,
                                  bool known_transitions, const EarlyForkRewards& rewards = {}) {
    if (chain_len < 2) throw std::invalid_argument("early fork needs chain length >= 2");
    const std::size_t n = chain_len;
    const std::size_t per_branch = n - 1;
    const StateIndex terminal = 2 * per_branch + 1;
    TabularMdp mdp(terminal + 1, 2, n);
    mdp.available_actions[0] = {0, 1};
    for (std::size_t k = 0; k < 2; ++k) {
        const auto& chain = rewards.chains[k];
        if (!chain.empty() && chain.size() != per_branch) {
            throw std::invalid_argument("early fork chain rewards must have N-1 entries");
        }
        const StateIndex first = 1 + k * per_branch;
        mdp.transition_row(0, k)[first] = 1.0;
        mdp.reward_p(0, k) = rewards.fork[k];
        for (std::size_t j = 0; j < per_branch; ++j) {
            const StateIndex s = first + j;
            mdp.available_actions[s] = {0};
            mdp.transition_row(s, 0)[j + 1 < per_branch ? s + 1 : terminal] = 1.0;
            mdp.reward_p(s, 0) = chain.empty() ? (k == 0 ? 0.4 : 0.6) : chain[j];
        }
    }
    // Never acted in: the step that enters it ends the episode.
    mdp.available_actions[terminal] = {0};
    mdp.transition_row(terminal, 0)[terminal] = 1.0;
    ArlProblem problem{std::move(mdp), query_cost, horizon, known_transitions, false};
    problem.validate();
    return problem;
}

/// Two forced loops of length L sharing the start state 0. Left loop is states
/// 1..L, right loop L+1..2L. Closing the left loop pays 2, the right loop 1.
/// One episode is one circuit (L+1 steps).
inline TabularMdp make_double_loop(std::size_t loop_len) {
    if (loop_len < 2) throw std::invalid_argument("double loop needs loop length >= 2");
    const std::size_t l = loop_len;
    TabularMdp mdp(2 * l + 1, 2, l + 1);
    mdp.available_actions[0] = {0, 1};
    mdp.transition_row(0, 0)[1] = 1.0;
    mdp.transition_row(0, 1)[l + 1] = 1.0;
    for (std::size_t k = 0; k < 2; ++k) {
        const StateIndex first = 1 + k * l;
        for (std::size_t j = 0; j < l; ++j) {
            const StateIndex s = first + j;
            mdp.available_actions[s] = {0};
            const bool closes = j + 1 == l;
            mdp.transition_row(s, 0)[closes ? 0 : s + 1] = 1.0;
            if (closes) {
                mdp.reward_p(s, 0) = 1.0;
                mdp.reward_scale[mdp.sa(s, 0)] = k == 0 ? 2.0 : 1.0;
            }
        }
    }
    mdp.validate();
    return mdp;
}

/// Regular-RL wrapper: rewards known, transitions learned.
inline ArlProblem make_double_loop_problem(std::size_t loop_len, std::size_t episodes, double query_cost = 0.5) {
    ArlProblem problem{make_double_loop(loop_len), query_cost, episodes, false, true};
    problem.validate();
    return problem;
}

/// Every action available everywhere; rows ~ Dirichlet(transition_alpha),
/// reward parameters ~ Beta(reward_alpha, reward_alpha). Draw order: for each
/// state, for each action, the transition row then the reward parameter.
inline TabularMdp sample_random_mdp(std::size_t num_states, std::size_t num_actions, double reward_alpha,
                                    double transition_alpha, Rng& rng, std::size_t episode_len = 5) {
    if (!(reward_alpha > 0.0) || !(transition_alpha > 0.0)) {
        throw std::invalid_argument("random MDP concentration parameters must be positive");
    }
    if (num_states == 0 || num_actions == 0) throw std::invalid_argument("random MDP needs states and actions");
    TabularMdp mdp(num_states, num_actions, episode_len);
    const std::vector<double> alpha(num_states, transition_alpha);
    for (StateIndex s = 0; s < num_states; ++s) {
        for (ActionIndex a = 0; a < num_actions; ++a) {
            mdp.available_actions[s].push_back(a);
            sample_dirichlet(rng, alpha, mdp.transition_row(s, a));
            mdp.reward_p(s, a) = sample_beta(rng, reward_alpha, reward_alpha);
        }
    }
    // Renormalize away rounding so rows pass the 1e-9 check.
    for (StateIndex s = 0; s < num_states; ++s) {
        for (ActionIndex a = 0; a < num_actions; ++a) {
            auto row = mdp.transition_row(s, a);
            double sum = 0.0;
            for (double p : row) sum += p;
            for (double& p : row) p /= sum;
        }
    }
    mdp.validate();
    return mdp;
}

inline ArlProblem make_random_problem(TabularMdp mdp, double query_cost, std::size_t horizon) {
    ArlProblem problem{std::move(mdp), query_cost, horizon, false, false};
    problem.validate();
    return problem;
}

}  // namespace barl
