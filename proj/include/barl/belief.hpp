#pragma once

// Conjugate posterior over transition rows (Dirichlet) and Bernoulli reward
// parameters (Beta), and the per-simulation model drawn from it.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "barl/env.hpp"
#include "barl/rng.hpp"

namespace barl {

struct BetaPrior {
    double alpha = 0.5;
    double beta = 0.5;
};

/// Dirichlet pseudo-counts per (s,a) over successors and Beta pseudo-counts per
/// (s,a) for the reward. Components the problem declares known are pinned:
/// `structure` carries their true values and updates never touch them.
/// For unpinned components `structure` holds zeros, so no ground truth leaks.
struct BeliefState {
    TabularMdp structure;
    std::vector<double> transition_counts;  // [s][a][s']
    std::vector<double> reward_success;     // [s][a]
    std::vector<double> reward_failure;     // [s][a]
    std::vector<std::uint8_t> transition_pinned;
    std::vector<std::uint8_t> reward_pinned;

    std::size_t num_states() const { return structure.num_states; }
    std::size_t num_actions() const { return structure.num_actions; }
    std::size_t sa(StateIndex s, ActionIndex a) const { return structure.sa(s, a); }

    std::span<const double> counts_row(StateIndex s, ActionIndex a) const {
        return {transition_counts.data() + sa(s, a) * num_states(), num_states()};
    }
    bool transitions_known(StateIndex s, ActionIndex a) const { return transition_pinned[sa(s, a)] != 0; }
    bool rewards_known(StateIndex s, ActionIndex a) const { return reward_pinned[sa(s, a)] != 0; }

    double reward_mean(StateIndex s, ActionIndex a) const {
        const std::size_t i = sa(s, a);
        if (reward_pinned[i]) return structure.reward_param[i];
        return reward_success[i] / (reward_success[i] + reward_failure[i]);
    }

    friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

inline BeliefState init_belief(const ArlProblem& problem, BetaPrior reward_prior, double transition_alpha) {
    if (!(reward_prior.alpha > 0.0) || !(reward_prior.beta > 0.0) || !(transition_alpha > 0.0)) {
        throw std::invalid_argument("prior parameters must be positive");
    }
    const TabularMdp& mdp = problem.mdp;
    const std::size_t n_sa = mdp.num_states * mdp.num_actions;
    BeliefState b;
    b.structure = TabularMdp(mdp.num_states, mdp.num_actions, mdp.episode_len);
    b.structure.available_actions = mdp.available_actions;
    b.structure.initial_state = mdp.initial_state;
    b.structure.reward_scale = mdp.reward_scale;
    b.transition_counts.assign(n_sa * mdp.num_states, 0.0);
    b.reward_success.assign(n_sa, 0.0);
    b.reward_failure.assign(n_sa, 0.0);
    b.transition_pinned.assign(n_sa, 0);
    b.reward_pinned.assign(n_sa, 0);
    for (StateIndex s = 0; s < mdp.num_states; ++s) {
        for (ActionIndex a : mdp.available_actions[s]) {
            const std::size_t i = mdp.sa(s, a);
            if (problem.known_transitions) {
                b.transition_pinned[i] = 1;
                const auto truth = mdp.transition_row(s, a);
                std::copy(truth.begin(), truth.end(), b.structure.transition_row(s, a).begin());
            } else {
                std::fill_n(b.transition_counts.begin() + static_cast<std::ptrdiff_t>(i * mdp.num_states),
                            mdp.num_states, transition_alpha);
            }
            if (problem.known_rewards) {
                b.reward_pinned[i] = 1;
                b.structure.reward_param[i] = mdp.reward_param[i];
            } else {
                b.reward_success[i] = reward_prior.alpha;
                b.reward_failure[i] = reward_prior.beta;
            }
        }
    }
    return b;
}

/// Conjugate update. The successor always counts; the reward counts only when
/// it was observed (a null reward leaves the Beta counts untouched).
inline void update(BeliefState& belief, StateIndex s, ActionIndex a, const StepOutcome& outcome) {
    const std::size_t i = belief.sa(s, a);
    if (!belief.transition_pinned[i]) {
        belief.transition_counts[i * belief.num_states() + outcome.next_state] += 1.0;
    }
    if (outcome.observed_reward && !belief.reward_pinned[i]) {
        if (*outcome.observed_reward > 0.0) {
            belief.reward_success[i] += 1.0;
        } else {
            belief.reward_failure[i] += 1.0;
        }
    }
}

using SampledModel = TabularMdp;

/// Full model from the posterior. Draw order: for each state, for each
/// available action, the transition row (if unpinned) then the reward
/// parameter (if unpinned).
inline SampledModel sample_model(const BeliefState& belief, Rng& rng) {
    SampledModel m = belief.structure;
    for (StateIndex s = 0; s < m.num_states; ++s) {
        for (ActionIndex a : m.available_actions[s]) {
            const std::size_t i = m.sa(s, a);
            if (!belief.transition_pinned[i]) sample_dirichlet(rng, belief.counts_row(s, a), m.transition_row(s, a));
            if (!belief.reward_pinned[i]) {
                m.reward_param[i] = sample_beta(rng, belief.reward_success[i], belief.reward_failure[i]);
            }
        }
    }
    return m;
}

inline TabularMdp posterior_mean(const BeliefState& belief) {
    TabularMdp m = belief.structure;
    for (StateIndex s = 0; s < m.num_states; ++s) {
        for (ActionIndex a : m.available_actions[s]) {
            const std::size_t i = m.sa(s, a);
            if (!belief.transition_pinned[i]) {
                const auto counts = belief.counts_row(s, a);
                double total = 0.0;
                for (double c : counts) total += c;
                auto row = m.transition_row(s, a);
                for (std::size_t j = 0; j < row.size(); ++j) row[j] = counts[j] / total;
            }
            m.reward_param[i] = belief.reward_mean(s, a);
        }
    }
    return m;
}

/// How a simulation's model is drawn from the frozen root belief.
enum class SamplingMode {
    /// Whole model drawn when the simulation starts.
    eager,
    /// Each row drawn the first time the simulation touches it.
    lazy,
    /// Model integrated out: successive draws from one row follow the
    /// Dirichlet-multinomial (Polya urn) predictive, which has the same joint
    /// law as drawing the row once and sampling from it repeatedly.
    collapsed,
};

/// One model per simulation (root sampling) behind a draw-on-demand interface.
/// Holds a reference to the belief, which must stay frozen while in use.
class SimulationModel {
public:
    SimulationModel(const BeliefState& belief, SamplingMode mode)
        : belief_(belief), mode_(mode), model_(belief.structure) {
        const std::size_t n_sa = belief.num_states() * belief.num_actions();
        if (mode_ == SamplingMode::lazy) {
            transition_drawn_.assign(n_sa, 0);
            reward_drawn_.assign(n_sa, 0);
        }
        if (mode_ == SamplingMode::collapsed) {
            local_transition_.assign(belief.transition_counts.size(), 0.0);
            local_success_.assign(n_sa, 0.0);
            local_failure_.assign(n_sa, 0.0);
            row_total_.assign(n_sa, 0.0);
            touched_flag_.assign(n_sa, 0);
            for (std::size_t i = 0; i < n_sa; ++i) {
                for (std::size_t j = 0; j < belief.num_states(); ++j) {
                    row_total_[i] += belief.transition_counts[i * belief.num_states() + j];
                }
            }
        }
    }

    SamplingMode mode() const { return mode_; }

    /// Starts a new simulation with a fresh model.
    void begin(Rng& rng) {
        switch (mode_) {
            case SamplingMode::eager:
                model_ = sample_model(belief_, rng);
                break;
            case SamplingMode::lazy:
                std::fill(transition_drawn_.begin(), transition_drawn_.end(), 0);
                std::fill(reward_drawn_.begin(), reward_drawn_.end(), 0);
                break;
            case SamplingMode::collapsed:
                for (std::size_t i : touched_) {
                    local_success_[i] = 0.0;
                    local_failure_[i] = 0.0;
                    touched_flag_[i] = 0;
                    std::fill_n(local_transition_.begin() + static_cast<std::ptrdiff_t>(i * belief_.num_states()),
                                belief_.num_states(), 0.0);
                }
                touched_.clear();
                break;
        }
    }

    /// Whether (s,a) pays out in this simulation's model.
    bool reward_success(StateIndex s, ActionIndex a, Rng& rng) {
        const std::size_t i = belief_.sa(s, a);
        if (belief_.reward_pinned[i]) return bernoulli(rng, belief_.structure.reward_param[i]);
        switch (mode_) {
            case SamplingMode::lazy:
                if (!reward_drawn_[i]) {
                    model_.reward_param[i] = sample_beta(rng, belief_.reward_success[i], belief_.reward_failure[i]);
                    reward_drawn_[i] = 1;
                }
                [[fallthrough]];
            case SamplingMode::eager:
                return bernoulli(rng, model_.reward_param[i]);
            case SamplingMode::collapsed: {
                const double succ = belief_.reward_success[i] + local_success_[i];
                const double fail = belief_.reward_failure[i] + local_failure_[i];
                const bool hit = bernoulli(rng, succ / (succ + fail));
                touch(i);
                (hit ? local_success_[i] : local_failure_[i]) += 1.0;
                return hit;
            }
        }
        return false;
    }

    double reward(StateIndex s, ActionIndex a, bool success) const {
        return success ? belief_.structure.reward_scale[belief_.sa(s, a)] : 0.0;
    }

    StateIndex successor(StateIndex s, ActionIndex a, Rng& rng) {
        const std::size_t i = belief_.sa(s, a);
        if (belief_.transition_pinned[i]) return sample_categorical(rng, belief_.structure.transition_row(s, a));
        switch (mode_) {
            case SamplingMode::lazy:
                if (!transition_drawn_[i]) {
                    sample_dirichlet(rng, belief_.counts_row(s, a), model_.transition_row(s, a));
                    transition_drawn_[i] = 1;
                }
                [[fallthrough]];
            case SamplingMode::eager:
                return sample_categorical(rng, model_.transition_row(s, a));
            case SamplingMode::collapsed: {
                const std::size_t n = belief_.num_states();
                const double* base = belief_.transition_counts.data() + i * n;
                double* local = local_transition_.data() + i * n;
                double total = row_total_[i];
                for (std::size_t j = 0; j < n; ++j) total += local[j];
                double u = uniform01(rng) * total;
                std::size_t pick = n;
                for (std::size_t j = 0; j < n; ++j) {
                    const double w = base[j] + local[j];
                    if (u < w) {
                        pick = j;
                        break;
                    }
                    u -= w;
                }
                if (pick == n) {
                    for (pick = n; pick-- > 0;) {
                        if (base[pick] + local[pick] > 0.0) break;
                    }
                }
                touch(i);
                local[pick] += 1.0;
                return pick;
            }
        }
        return 0;
    }

    /// The eagerly drawn model (meaningful in eager mode only).
    const TabularMdp& model() const { return model_; }

private:
    void touch(std::size_t i) {
        if (!touched_flag_[i]) {
            touched_flag_[i] = 1;
            touched_.push_back(i);
        }
    }

    const BeliefState& belief_;
    SamplingMode mode_;
    TabularMdp model_;
    std::vector<std::uint8_t> transition_drawn_;
    std::vector<std::uint8_t> reward_drawn_;
    std::vector<double> local_transition_;
    std::vector<double> local_success_;
    std::vector<double> local_failure_;
    std::vector<double> row_total_;
    std::vector<std::uint8_t> touched_flag_;
    std::vector<std::size_t> touched_;
};

}  // namespace barl
