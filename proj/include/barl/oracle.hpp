#pragma once

// Exact reference solutions: finite-horizon value iteration on a known MDP and
// Bayes-optimal expectimax for small active-RL Bernoulli bandits.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "barl/belief.hpp"
#include "barl/env.hpp"

namespace barl {

/// Optimal values of a known MDP over `total_steps` steps, with the episode
/// reset applied every `episode_len` steps. Q of unavailable actions is -inf.
struct ExactSolution {
    std::size_t total_steps = 0;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<double> q;  // [step][s][a]
    std::vector<double> v;  // [step][s], step == total_steps is the zero terminal row
    double value = 0.0;     // V*(0, initial_state)

    double q_at(std::size_t t, StateIndex s, ActionIndex a) const {
        return q[(t * num_states + s) * num_actions + a];
    }
    double v_at(std::size_t t, StateIndex s) const { return v[t * num_states + s]; }
};

inline ExactSolution value_iteration(const TabularMdp& mdp, std::size_t total_steps) {
    mdp.validate();
    ExactSolution sol;
    sol.total_steps = total_steps;
    sol.num_states = mdp.num_states;
    sol.num_actions = mdp.num_actions;
    sol.q.assign(total_steps * mdp.num_states * mdp.num_actions, -INFINITY);
    sol.v.assign((total_steps + 1) * mdp.num_states, 0.0);
    for (std::size_t t = total_steps; t-- > 0;) {
        const double* next_v = sol.v.data() + (t + 1) * mdp.num_states;
        for (StateIndex s = 0; s < mdp.num_states; ++s) {
            double best = -INFINITY;
            for (ActionIndex a : mdp.available_actions[s]) {
                double q = mdp.expected_reward(s, a);
                if (mdp.ends_episode(t)) {
                    q += next_v[mdp.initial_state];
                } else {
                    const auto row = mdp.transition_row(s, a);
                    for (StateIndex n = 0; n < mdp.num_states; ++n) q += row[n] * next_v[n];
                }
                sol.q[(t * mdp.num_states + s) * mdp.num_actions + a] = q;
                best = std::max(best, q);
            }
            sol.v[t * mdp.num_states + s] = best;
        }
    }
    sol.value = total_steps == 0 ? 0.0 : sol.v[mdp.initial_state];
    return sol;
}

/// Per-arm Beta counts plus trials remaining: a hyperstate of the bandit BAMDP.
struct BanditBeliefNode {
    std::vector<BetaPrior> arms;
    std::size_t trials_remaining = 0;
};

struct ActionValue {
    ActionPair act;
    double q = 0.0;
};

/// Bayes-optimal solution of a Bernoulli active-RL bandit by exhaustive
/// expectimax over posterior counts. A queried pull branches on the predictive
/// outcome and updates that arm; an unqueried pull earns the posterior mean
/// and leaves the belief unchanged. Values are memoized on the sorted arm
/// counts, which the problem is symmetric under.
class BanditSolution {
public:
    static constexpr double tie_tolerance = 1e-9;

    BanditSolution(std::vector<BetaPrior> prior, std::size_t trials, double query_cost)
        : root_{std::move(prior), trials}, cost_(query_cost) {
        for (const auto& arm : root_.arms) {
            if (!(arm.alpha > 0.0) || !(arm.beta > 0.0)) throw std::invalid_argument("Beta counts must be positive");
        }
        if (root_.arms.empty()) throw std::invalid_argument("bandit needs at least one arm");
        if (!(query_cost >= 0.0)) throw std::invalid_argument("query cost must be non-negative");
        value_ = value(root_);
    }

    double value() const { return value_; }
    double query_cost() const { return cost_; }
    const BanditBeliefNode& root() const { return root_; }

    double value(const BanditBeliefNode& node) const {
        if (node.trials_remaining == 0) return 0.0;
        const Key key = make_key(node);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        double best = -INFINITY;
        for (const auto& av : action_values(node)) best = std::max(best, av.q);
        memo_.emplace(key, best);
        return best;
    }

    /// Q of every (i,a) at `node`; order: (0,a) for all a, then (1,a).
    std::vector<ActionValue> action_values(const BanditBeliefNode& node) const {
        std::vector<ActionValue> out;
        if (node.trials_remaining == 0) return out;
        BanditBeliefNode next = node;
        --next.trials_remaining;
        const double stay = value(next);
        for (ActionIndex a = 0; a < node.arms.size(); ++a) {
            out.push_back({ActionPair{false, a}, mean(node.arms[a]) + stay});
        }
        for (ActionIndex a = 0; a < node.arms.size(); ++a) {
            const double m = mean(node.arms[a]);
            BanditBeliefNode hit = next;
            hit.arms[a].alpha += 1.0;
            BanditBeliefNode miss = next;
            miss.arms[a].beta += 1.0;
            out.push_back({ActionPair{true, a}, m - cost_ + m * value(hit) + (1.0 - m) * value(miss)});
        }
        return out;
    }

    /// Every (i,a) within tie_tolerance of the best at `node`.
    std::vector<ActionPair> optimal_actions(const BanditBeliefNode& node) const {
        const auto avs = action_values(node);
        double best = -INFINITY;
        for (const auto& av : avs) best = std::max(best, av.q);
        std::vector<ActionPair> out;
        for (const auto& av : avs) {
            if (av.q >= best - tie_tolerance) out.push_back(av.act);
        }
        return out;
    }

    std::vector<ActionValue> root_action_values() const { return action_values(root_); }
    std::vector<ActionPair> root_optimal_actions() const { return optimal_actions(root_); }

    /// A Bayes-optimal root action; queries are preferred among ties, then the
    /// lowest arm index.
    ActionPair first_action() const {
        const auto opt = root_optimal_actions();
        for (const auto& act : opt) {
            if (act.query) return act;
        }
        return opt.front();
    }

    bool is_optimal_root_action(ActionPair act) const {
        const auto opt = root_optimal_actions();
        return std::find(opt.begin(), opt.end(), act) != opt.end();
    }

    /// Calls `fn(node, optimal_actions)` once for every distinct hyperstate
    /// reachable by following Bayes-optimal actions (all tie members).
    void visit_on_policy(const std::function<void(const BanditBeliefNode&, const std::vector<ActionPair>&)>& fn) const {
        std::set<Key> seen;
        std::vector<BanditBeliefNode> stack{root_};
        while (!stack.empty()) {
            BanditBeliefNode node = std::move(stack.back());
            stack.pop_back();
            if (node.trials_remaining == 0 || !seen.insert(make_key(node)).second) continue;
            const auto opt = optimal_actions(node);
            fn(node, opt);
            BanditBeliefNode next = node;
            --next.trials_remaining;
            for (const auto& act : opt) {
                if (!act.query) {
                    stack.push_back(next);
                    continue;
                }
                BanditBeliefNode hit = next;
                hit.arms[act.action].alpha += 1.0;
                BanditBeliefNode miss = next;
                miss.arms[act.action].beta += 1.0;
                stack.push_back(std::move(hit));
                stack.push_back(std::move(miss));
            }
        }
    }

private:
    using Key = std::pair<std::vector<std::pair<double, double>>, std::size_t>;

    static double mean(const BetaPrior& b) { return b.alpha / (b.alpha + b.beta); }

    static Key make_key(const BanditBeliefNode& node) {
        Key key;
        key.first.reserve(node.arms.size());
        for (const auto& arm : node.arms) key.first.emplace_back(arm.alpha, arm.beta);
        std::sort(key.first.begin(), key.first.end());
        key.second = node.trials_remaining;
        return key;
    }

    BanditBeliefNode root_;
    double cost_;
    double value_ = 0.0;
    mutable std::map<Key, double> memo_;
};

/// Largest trial count bayes_optimal_bandit accepts by default.
inline constexpr std::size_t default_bandit_trial_cap = 20;

/// Refuses (throws std::length_error) rather than approximating past the cap.
inline BanditSolution bayes_optimal_bandit(std::vector<BetaPrior> prior, std::size_t trials, double query_cost,
                                           std::size_t trial_cap = default_bandit_trial_cap) {
    if (trials > trial_cap) {
        throw std::length_error("bandit horizon " + std::to_string(trials) + " exceeds the enumeration cap of " +
                                std::to_string(trial_cap));
    }
    return BanditSolution(std::move(prior), trials, query_cost);
}

/// True iff along every Bayes-optimal path, once not querying is optimal it
/// stays optimal: from any on-policy hyperstate where some unqueried pull is
/// optimal, an unqueried pull is also optimal with one trial fewer.
inline bool optimal_query_structure_check(const BanditSolution& solution) {
    bool ok = true;
    solution.visit_on_policy([&](const BanditBeliefNode& node, const std::vector<ActionPair>& opt) {
        const bool stops = std::any_of(opt.begin(), opt.end(), [](ActionPair a) { return !a.query; });
        if (!stops || node.trials_remaining <= 1) return;
        BanditBeliefNode next = node;
        --next.trials_remaining;
        const auto later = solution.optimal_actions(next);
        if (std::none_of(later.begin(), later.end(), [](ActionPair a) { return !a.query; })) ok = false;
    });
    return ok;
}

}  // namespace barl
