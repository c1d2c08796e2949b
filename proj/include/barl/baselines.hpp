#pragma once

// Belief-free epsilon-greedy Q-learners for active RL: a learner over joint
// (query, action) columns, and learners over plain actions that decide when to
// query by the First-N or the mind-changing-cost heuristic.
//
// None of them sees unqueried rewards. On an unqueried step the learner backs
// up the sample mean of the rewards it has queried on that (s,a), so
// transitions keep informing Q while rewards come only from queries. Before the
// first query on (s,a) an unqueried step is not learned from.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "barl/env.hpp"
#include "barl/mcts.hpp"
#include "barl/qtable.hpp"
#include "barl/rng.hpp"

namespace barl {

struct Heuristic {
    enum class Kind { none, first_n, mcch };
    Kind kind = Kind::none;
    /// First-N: queries per (s,a).
    std::size_t n = 1;
    /// MCCH: stands in for the number of queries needed to change its mind.
    double mu = 1.0;

    static Heuristic none() { return {}; }
    static Heuristic first_n(std::size_t n) { return {Kind::first_n, n, 1.0}; }
    static Heuristic mcch(double mu) { return {Kind::mcch, 1, mu}; }
};

struct ModelFreeParams {
    double epsilon = 0.1;
    double learn_rate = 0.2;
    double discount = 1.0;
    Heuristic heuristic;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0,1]");
        if (!(learn_rate > 0.0 && learn_rate <= 1.0)) throw std::invalid_argument("learning rate must be in (0,1]");
        if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must be in [0,1]");
        if (heuristic.kind == Heuristic::Kind::mcch && !(heuristic.mu > 0.0)) {
            throw std::invalid_argument("MCCH mu must be positive");
        }
    }
};

/// Agent state. Without a heuristic, `q` has 2A columns: column a is (0,a) and
/// column A+a is (1,a). With a heuristic it has A columns, one per action.
struct ModelFreeAgentState {
    ModelFreeParams params;
    std::size_t num_actions = 0;
    QTable q;
    std::vector<std::uint32_t> visit_counts;  // [s][a]
    std::vector<std::uint32_t> query_counts;  // [s][a]
    std::vector<double> reward_sums;          // [s][a], queried rewards only
    /// MCCH latch; once set the agent stops querying and stops learning.
    bool stopped_querying = false;

    bool joint() const { return params.heuristic.kind == Heuristic::Kind::none; }
    std::size_t sa(StateIndex s, ActionIndex a) const { return s * num_actions + a; }
    std::size_t column(ActionPair act) const { return joint() && act.query ? num_actions + act.action : act.action; }

    std::uint32_t query_count(StateIndex s, ActionIndex a) const { return query_counts[sa(s, a)]; }

    /// Mean queried reward on (s,a); nullopt before the first query.
    Reward imputed_reward(StateIndex s, ActionIndex a) const {
        const std::size_t i = sa(s, a);
        if (query_counts[i] == 0) return std::nullopt;
        return reward_sums[i] / query_counts[i];
    }
};

/// Fresh agent with Q i.i.d. uniform on [0,1).
inline ModelFreeAgentState make_model_free_agent(const TabularMdp& mdp, ModelFreeParams params, Rng& init_rng) {
    params.validate();
    ModelFreeAgentState agent;
    agent.params = params;
    agent.num_actions = mdp.num_actions;
    const std::size_t columns = agent.joint() ? 2 * mdp.num_actions : mdp.num_actions;
    agent.q = QTable::random(mdp.num_states, columns, init_rng);
    agent.visit_counts.assign(mdp.num_states * mdp.num_actions, 0);
    agent.query_counts.assign(mdp.num_states * mdp.num_actions, 0);
    agent.reward_sums.assign(mdp.num_states * mdp.num_actions, 0.0);
    return agent;
}

/// Q(s,column) += rate * (r + discount * max Q(s_next, next_columns) - Q(s,column)).
/// Empty `next_columns` means the step ended the episode.
inline void q_learn_update(ModelFreeAgentState& agent, StateIndex s, std::size_t column, Reward r,
                           StateIndex s_next, std::span<const std::size_t> next_columns) {
    if (!r) throw std::invalid_argument("Q-learning update needs an observed reward");
    q_learning_step(agent.q, s, column, *r, s_next, next_columns, agent.params.learn_rate, agent.params.discount);
}

/// First-N choice: explore among actions queried fewer than N times, otherwise
/// (and when none are left) act greedily; query iff the chosen action is still
/// under its quota.
inline ActionPair first_n_act(const ModelFreeAgentState& agent, const TabularMdp& mdp, StateIndex s, Rng& rng) {
    const auto& actions = mdp.available_actions[s];
    const std::size_t n = agent.params.heuristic.n;
    ActionIndex a = 0;
    bool chosen = false;
    if (uniform01(rng) < agent.params.epsilon) {
        std::vector<ActionIndex> open;
        for (ActionIndex b : actions) {
            if (agent.query_count(s, b) < n) open.push_back(b);
        }
        if (!open.empty()) {
            a = open[uniform_index(rng, open.size())];
            chosen = true;
        }
    }
    if (!chosen) a = agent.q.greedy(s, actions, rng);
    return ActionPair{agent.query_count(s, a) < n, a};
}

/// True iff c * mu < E * (q_max - v_bar).
inline bool mcch_should_query(double query_cost, double mu, std::size_t episodes_remaining, double q_max,
                              double v_bar) {
    return query_cost * mu < static_cast<double>(episodes_remaining) * (q_max - v_bar);
}

namespace detail {

inline ActionIndex epsilon_greedy(const ModelFreeAgentState& agent, StateIndex s,
                                  std::span<const ActionIndex> columns, Rng& rng) {
    if (uniform01(rng) < agent.params.epsilon) return columns[uniform_index(rng, columns.size())];
    return agent.q.greedy(s, columns, rng);
}

inline std::vector<std::size_t> columns_of(const ModelFreeAgentState& agent, const TabularMdp& mdp, StateIndex s) {
    std::vector<std::size_t> cols(mdp.available_actions[s].begin(), mdp.available_actions[s].end());
    if (agent.joint()) {
        for (ActionIndex a : mdp.available_actions[s]) cols.push_back(agent.num_actions + a);
    }
    return cols;
}

}  // namespace detail

/// Plays the whole horizon. `env_rng` drives the environment and `agent_rng`
/// the agent's choices.
inline Trace run_model_free(const ArlProblem& problem, ModelFreeAgentState& agent, Rng& env_rng, Rng& agent_rng) {
    problem.validate();
    const TabularMdp& mdp = problem.mdp;
    const std::size_t total = problem.total_steps();
    const double q_max = static_cast<double>(mdp.episode_len) * mdp.max_reward();
    std::vector<std::vector<std::size_t>> columns(mdp.num_states);
    for (StateIndex s = 0; s < mdp.num_states; ++s) columns[s] = detail::columns_of(agent, mdp, s);

    Trace trace;
    trace.steps.reserve(total);
    StateIndex s = mdp.initial_state;
    for (std::size_t t = 0; t < total; ++t) {
        const std::size_t episode = t / mdp.episode_len;
        ActionPair act;
        switch (agent.params.heuristic.kind) {
            case Heuristic::Kind::none: {
                const std::size_t col = detail::epsilon_greedy(agent, s, columns[s], agent_rng);
                act = ActionPair{col >= agent.num_actions, col % agent.num_actions};
                break;
            }
            case Heuristic::Kind::first_n:
                act = first_n_act(agent, mdp, s, agent_rng);
                break;
            case Heuristic::Kind::mcch: {
                if (!agent.stopped_querying) {
                    const double v_bar = agent.q.max_over(mdp.initial_state, columns[mdp.initial_state]);
                    if (!mcch_should_query(problem.query_cost, agent.params.heuristic.mu, problem.horizon - episode,
                                           q_max, v_bar)) {
                        agent.stopped_querying = true;
                    }
                }
                if (agent.stopped_querying) {
                    act = ActionPair{false, agent.q.greedy(s, columns[s], agent_rng)};
                } else {
                    act = ActionPair{true, detail::epsilon_greedy(agent, s, columns[s], agent_rng)};
                }
                break;
            }
        }

        const StepOutcome out = step(problem, s, act, env_rng);
        const std::size_t i = agent.sa(s, act.action);
        ++agent.visit_counts[i];
        if (out.observed_reward) {
            ++agent.query_counts[i];
            agent.reward_sums[i] += *out.observed_reward;
        }
        if (!agent.stopped_querying) {
            Reward target = out.observed_reward ? out.observed_reward : agent.imputed_reward(s, act.action);
            if (target) {
                if (agent.joint() && act.query) *target -= problem.query_cost;
                const bool last = mdp.ends_episode(t);
                q_learn_update(agent, s, agent.column(act), target, out.next_state,
                               last ? std::span<const std::size_t>{} : std::span<const std::size_t>(columns[out.next_state]));
            }
        }
        trace.steps.push_back(TraceStep{t, episode, s, act, out});
        s = mdp.continuation(t, out.next_state);
    }
    return trace;
}

inline Trace run_model_free(const ArlProblem& problem, ModelFreeAgentState& agent, RunSeeds seeds) {
    Rng env_rng(seeds.env);
    Rng agent_rng(seeds.agent);
    return run_model_free(problem, agent, env_rng, agent_rng);
}

}  // namespace barl
