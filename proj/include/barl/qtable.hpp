#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "barl/env.hpp"
#include "barl/rng.hpp"

namespace barl {

/// Tabular action values indexed by (state, action column).
class QTable {
public:
    QTable() = default;
    QTable(std::size_t states, std::size_t actions, double init = 0.0)
        : states_(states), actions_(actions), values_(states * actions, init) {}

    /// Entries i.i.d. uniform on [0,1).
    static QTable random(std::size_t states, std::size_t actions, Rng& rng) {
        QTable q(states, actions);
        for (double& v : q.values_) v = uniform01(rng);
        return q;
    }

    std::size_t num_states() const { return states_; }
    std::size_t num_actions() const { return actions_; }

    double& operator()(StateIndex s, ActionIndex a) { return values_[s * actions_ + a]; }
    double operator()(StateIndex s, ActionIndex a) const { return values_[s * actions_ + a]; }

    double max_over(StateIndex s, std::span<const ActionIndex> actions) const {
        double best = -INFINITY;
        for (ActionIndex a : actions) best = std::max(best, (*this)(s, a));
        return best;
    }

    /// Greedy action among `actions`, ties uniform at random.
    ActionIndex greedy(StateIndex s, std::span<const ActionIndex> actions, Rng& rng) const {
        scratch_.clear();
        for (ActionIndex a : actions) scratch_.push_back((*this)(s, a));
        return actions[argmax_random_tie(scratch_, rng)];
    }

    /// Copies values from a table of the same shape without reallocating.
    void assign(const QTable& other) { std::copy(other.values_.begin(), other.values_.end(), values_.begin()); }

    std::span<const double> values() const { return values_; }

    friend bool operator==(const QTable& a, const QTable& b) {
        return a.states_ == b.states_ && a.actions_ == b.actions_ && a.values_ == b.values_;
    }

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> values_;
    mutable std::vector<double> scratch_;
};

/// One Q-learning step: Q(s,a) += rate * (r + discount * max_a' Q(s',a') - Q(s,a)).
/// `next_actions` is empty when the step ended the episode (no bootstrap).
inline void q_learning_step(QTable& q, StateIndex s, ActionIndex a, double reward,
                            StateIndex next, std::span<const ActionIndex> next_actions, double rate,
                            double discount) {
    double target = reward;
    if (!next_actions.empty()) target += discount * q.max_over(next, next_actions);
    q(s, a) += rate * (target - q(s, a));
}

/// Boltzmann choice over `actions` with weights exp(Q/temperature).
/// `weights` is caller-provided scratch.
inline ActionIndex softmax_action(const QTable& q, StateIndex s, std::span<const ActionIndex> actions,
                                  double temperature, Rng& rng, std::vector<double>& weights) {
    if (actions.size() == 1) return actions[0];
    const double top = q.max_over(s, actions);
    weights.resize(actions.size());
    double total = 0.0;
    for (std::size_t k = 0; k < actions.size(); ++k) {
        weights[k] = std::exp((q(s, actions[k]) - top) / temperature);
        total += weights[k];
    }
    return actions[sample_weighted(rng, weights, total)];
}

}  // namespace barl
