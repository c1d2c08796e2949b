#pragma once

// Monte-Carlo tree search over histories of a Bayes-adaptive MDP with joint
// (query, action) decisions.
//
// Every simulation draws one model from the root belief (root sampling), copies
// the real-data Q-table into a scratch rollout learner, and descends the tree
// by UCB. Queried edges branch on (reward, successor), unqueried edges on the
// successor only. A leaf is rolled out with a Boltzmann policy over the
// rollout learner and becomes an internal node once it has accumulated
// `expansion_threshold` rollouts. With `episodic_rollouts` the rollout learner
// is trained on rewards the simulation queried inside the tree, so rollouts
// below a simulated query exploit what it revealed.
//
// expansion_threshold = 1 and episodic_rollouts = false give plain BAMCP.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "barl/belief.hpp"
#include "barl/env.hpp"
#include "barl/qtable.hpp"
#include "barl/rng.hpp"

namespace barl {

struct PlannerConfig {
    std::size_t num_simulations = 10000;
    double ucb_constant = 3.0;
    /// Deepest simulated step index; unset means the remaining real steps - 1.
    std::optional<std::size_t> max_depth;
    std::size_t expansion_threshold = 8;
    bool episodic_rollouts = true;
    double softmax_temperature = 0.1;
    double qlearn_rate = 0.2;
    double qlearn_discount = 1.0;
    double query_cost = 0.5;
    /// Ablation: also train the rollout learner on unqueried simulated rewards.
    bool learn_from_unqueried = false;
    SamplingMode sampling = SamplingMode::eager;

    static PlannerConfig bamcp() {
        PlannerConfig cfg;
        cfg.expansion_threshold = 1;
        cfg.episodic_rollouts = false;
        return cfg;
    }

    static PlannerConfig bamcp_pp() { return PlannerConfig{}; }

    void validate() const {
        if (num_simulations < 1) throw std::invalid_argument("planner needs at least one simulation");
        if (expansion_threshold < 1) throw std::invalid_argument("expansion threshold must be >= 1");
        if (!(softmax_temperature > 0.0)) throw std::invalid_argument("softmax temperature must be positive");
        if (!(qlearn_rate > 0.0 && qlearn_rate <= 1.0)) throw std::invalid_argument("learning rate must be in (0,1]");
        if (!(qlearn_discount > 0.0 && qlearn_discount <= 1.0)) {
            throw std::invalid_argument("discount must be in (0,1]");
        }
        if (!(ucb_constant >= 0.0)) throw std::invalid_argument("UCB constant must be non-negative");
        if (!(query_cost >= 0.0)) throw std::invalid_argument("query cost must be non-negative");
    }
};

/// History-indexed search tree stored in flat arenas.
class SearchTree {
public:
    using NodeId = std::uint32_t;
    static constexpr NodeId none = std::numeric_limits<NodeId>::max();

    struct Edge {
        ActionPair act;
        std::uint32_t count = 0;
        double q = 0.0;
        NodeId first_child = none;
    };

    struct Node {
        StateIndex state = 0;
        /// Number of UCB selections made here (sum of edge counts).
        std::uint32_t visits = 0;
        /// Rollouts accumulated while the node was a leaf.
        std::uint32_t rollouts = 0;
        double rollout_sum = 0.0;
        std::uint32_t first_edge = 0;
        std::uint32_t num_edges = 0;
        bool expanded = false;
        /// Observation that leads here from the parent edge.
        std::uint32_t key = 0;
        NodeId next_sibling = none;
    };

    void clear() {
        nodes_.clear();
        edges_.clear();
    }

    void reserve(std::size_t nodes) { nodes_.reserve(nodes); }

    NodeId add_root(StateIndex state) {
        clear();
        nodes_.push_back(Node{.state = state});
        return 0;
    }

    /// Child of `edge` (index into the edge arena) reached by observation
    /// `key`, created on first use.
    NodeId child(std::uint32_t edge, std::uint32_t key, StateIndex state) {
        for (NodeId id = edges_[edge].first_child; id != none; id = nodes_[id].next_sibling) {
            if (nodes_[id].key == key) return id;
        }
        const auto id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(Node{.state = state, .key = key, .next_sibling = edges_[edge].first_child});
        edges_[edge].first_child = id;
        return id;
    }

    /// Turns a leaf into an internal node with edges (0,a) for every action,
    /// followed by (1,a) for every action when queries are allowed.
    void expand(NodeId id, std::span<const ActionIndex> actions, bool allow_queries) {
        Node& n = nodes_[id];
        if (n.expanded) return;
        n.expanded = true;
        n.first_edge = static_cast<std::uint32_t>(edges_.size());
        for (int q = 0; q < (allow_queries ? 2 : 1); ++q) {
            for (ActionIndex a : actions) edges_.push_back(Edge{.act = ActionPair{q == 1, a}});
        }
        nodes_[id].num_edges = static_cast<std::uint32_t>(edges_.size()) - nodes_[id].first_edge;
    }

    Node& node(NodeId id) { return nodes_[id]; }
    const Node& node(NodeId id) const { return nodes_[id]; }
    Edge& edge(std::uint32_t index) { return edges_[index]; }
    const Edge& edge(std::uint32_t index) const { return edges_[index]; }

    std::span<const Edge> edges(NodeId id) const {
        return {edges_.data() + nodes_[id].first_edge, nodes_[id].num_edges};
    }

    /// Children of an edge, in most-recent-first order.
    std::vector<NodeId> children(std::uint32_t edge) const {
        std::vector<NodeId> out;
        for (NodeId id = edges_[edge].first_child; id != none; id = nodes_[id].next_sibling) out.push_back(id);
        return out;
    }

    /// Mean of the rollouts gathered before expansion.
    double seed_value(NodeId id) const {
        const Node& n = nodes_[id];
        return n.rollouts == 0 ? 0.0 : n.rollout_sum / n.rollouts;
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
};

/// Child key: successor alone for unqueried edges, (successor, reward bit) for
/// queried edges.
constexpr std::uint32_t observation_key(bool query, StateIndex successor, bool success) {
    return query ? static_cast<std::uint32_t>(successor * 2 + (success ? 1 : 0))
                 : static_cast<std::uint32_t>(successor);
}

/// UCB1 over the node's edges: Q + u * sqrt(ln N / n), unvisited edges first,
/// ties uniform. Returns the local edge position.
inline std::size_t ucb_select(const SearchTree& tree, SearchTree::NodeId id, double ucb_constant, Rng& rng,
                              std::vector<double>& scratch) {
    const auto edges = tree.edges(id);
    if (edges.empty()) throw std::logic_error("UCB selection on an unexpanded node");
    const double log_n = std::log(static_cast<double>(std::max<std::uint32_t>(tree.node(id).visits, 1)));
    scratch.resize(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const auto& e = edges[k];
        scratch[k] = e.count == 0 ? INFINITY
                                  : e.q + ucb_constant * std::sqrt(log_n / static_cast<double>(e.count));
    }
    return argmax_random_tie(scratch, rng);
}

inline ActionPair ucb_select(const SearchTree& tree, SearchTree::NodeId id, const PlannerConfig& cfg, Rng& rng) {
    std::vector<double> scratch;
    return tree.edges(id)[ucb_select(tree, id, cfg.ucb_constant, rng, scratch)].act;
}

/// Adds the node's edges once it holds `threshold` rollouts.
inline bool maybe_expand(SearchTree& tree, SearchTree::NodeId id, std::size_t threshold,
                         std::span<const ActionIndex> actions, bool allow_queries) {
    auto& n = tree.node(id);
    if (n.expanded) return true;
    if (n.rollouts < threshold) return false;
    tree.expand(id, actions, allow_queries);
    return true;
}

/// One step of a simulated path: the edge taken and its immediate reward net
/// of any query cost.
struct PathStep {
    SearchTree::NodeId node;
    std::uint32_t edge;
    double step_return;
};

/// Running-mean update of every edge on the path with its suffix return.
inline void backup(SearchTree& tree, std::span<const PathStep> path, double leaf_return) {
    double suffix = leaf_return;
    for (std::size_t k = path.size(); k-- > 0;) {
        suffix += path[k].step_return;
        auto& e = tree.edge(path[k].edge);
        ++e.count;
        e.q += (suffix - e.q) / static_cast<double>(e.count);
        ++tree.node(path[k].node).visits;
    }
}

/// Where a search starts: current state, global step index and how many real
/// steps are left including this one.
struct SearchRoot {
    StateIndex state = 0;
    std::size_t time_step = 0;
    std::size_t steps_remaining = 1;
};

struct RootEntry {
    ActionPair act;
    std::uint32_t visits = 0;
    double q = 0.0;
};

class Planner {
public:
    /// Called after every simulation with the number completed so far.
    using Observer = std::function<void(std::size_t, const Planner&)>;

    explicit Planner(PlannerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const PlannerConfig& config() const { return cfg_; }
    const SearchTree& tree() const { return tree_; }
    void set_observer(Observer observer) { observer_ = std::move(observer); }

    ActionPair search(const SearchRoot& root, const BeliefState& belief, const QTable& q_m, Rng& rng) {
        if (root.steps_remaining == 0) throw std::invalid_argument("search with no steps remaining");
        structure_ = &belief.structure;
        allow_queries_ = false;
        for (auto pinned : belief.reward_pinned) allow_queries_ = allow_queries_ || !pinned;
        // Only available (s,a) pairs are unpinned; recheck against the structure.
        if (allow_queries_) {
            allow_queries_ = false;
            for (StateIndex s = 0; s < belief.num_states() && !allow_queries_; ++s) {
                for (ActionIndex a : belief.structure.available_actions[s]) {
                    if (!belief.rewards_known(s, a)) allow_queries_ = true;
                }
            }
        }
        d_max_ = root.steps_remaining - 1;
        if (cfg_.max_depth) d_max_ = std::min(d_max_, *cfg_.max_depth);
        t0_ = root.time_step;

        SimulationModel model(belief, cfg_.sampling);
        q_pi_ = q_m;
        tree_.add_root(root.state);
        tree_.reserve(cfg_.num_simulations + 1);
        for (std::size_t sim = 0; sim < cfg_.num_simulations; ++sim) {
            model.begin(rng);
            if (cfg_.episodic_rollouts) q_pi_.assign(q_m);
            simulate(model, cfg_.episodic_rollouts ? q_pi_ : q_m, rng);
            if (observer_) observer_(sim + 1, *this);
        }

        const auto edges = tree_.edges(0);
        if (edges.empty()) {
            return ActionPair{false, q_m.greedy(root.state, structure_->available_actions[root.state], rng)};
        }
        scratch_.resize(edges.size());
        for (std::size_t k = 0; k < edges.size(); ++k) scratch_[k] = edges[k].count == 0 ? -INFINITY : edges[k].q;
        return edges[argmax_random_tie(scratch_, rng)].act;
    }

    std::vector<RootEntry> root_table() const {
        std::vector<RootEntry> out;
        for (const auto& e : tree_.edges(0)) out.push_back(RootEntry{e.act, e.count, e.q});
        return out;
    }

    /// Best visited root Q, or the rollout mean if the root never expanded.
    double root_value() const {
        const auto edges = tree_.edges(0);
        double best = -INFINITY;
        for (const auto& e : edges) {
            if (e.count > 0) best = std::max(best, e.q);
        }
        return std::isfinite(best) ? best : tree_.seed_value(0);
    }

    /// Best visited root Q among query (or non-query) edges; NaN if none.
    double root_value(bool query) const {
        double best = -INFINITY;
        for (const auto& e : tree_.edges(0)) {
            if (e.count > 0 && e.act.query == query) best = std::max(best, e.q);
        }
        return std::isfinite(best) ? best : std::numeric_limits<double>::quiet_NaN();
    }

    /// Root (i,a) -> (N, Q) as comma-delimited text with a header row.
    void write_root_table(std::ostream& os) const {
        os << "query,action,visits,q\n";
        for (const auto& r : root_table()) {
            os << (r.act.query ? 1 : 0) << ',' << r.act.action << ',' << r.visits << ',' << r.q << '\n';
        }
    }

private:
    void learn(QTable& q, StateIndex s, ActionIndex a, double r, StateIndex successor, std::size_t t) {
        const bool last = structure_->ends_episode(t);
        const std::span<const ActionIndex> next =
            last ? std::span<const ActionIndex>{} : std::span<const ActionIndex>(structure_->available_actions[successor]);
        q_learning_step(q, s, a, r, successor, next, cfg_.qlearn_rate, cfg_.qlearn_discount);
    }

    void simulate(SimulationModel& model, const QTable& q_rollout, Rng& rng) {
        path_.clear();
        SearchTree::NodeId id = 0;
        std::size_t depth = 0;
        double leaf = 0.0;
        while (true) {
            const StateIndex s = tree_.node(id).state;
            if (!tree_.node(id).expanded) {
                leaf = rollout(model, q_rollout, s, depth, rng);
                auto& n = tree_.node(id);
                ++n.rollouts;
                n.rollout_sum += leaf;
                maybe_expand(tree_, id, cfg_.expansion_threshold, structure_->available_actions[s], allow_queries_);
                break;
            }
            const std::size_t local = ucb_select(tree_, id, cfg_.ucb_constant, rng, scratch_);
            const std::uint32_t edge = tree_.node(id).first_edge + static_cast<std::uint32_t>(local);
            const ActionPair act = tree_.edge(edge).act;
            const std::size_t t = t0_ + depth;
            const bool success = model.reward_success(s, act.action, rng);
            const double r = model.reward(s, act.action, success);
            const StateIndex successor = model.successor(s, act.action, rng);
            if (act.query) {
                if (cfg_.episodic_rollouts) learn(q_pi_, s, act.action, r, successor, t);
                path_.push_back(PathStep{id, edge, r - cfg_.query_cost});
            } else {
                if (cfg_.episodic_rollouts && cfg_.learn_from_unqueried) learn(q_pi_, s, act.action, r, successor, t);
                path_.push_back(PathStep{id, edge, r});
            }
            if (depth + 1 > d_max_) break;
            id = tree_.child(edge, observation_key(act.query, successor, success),
                             structure_->continuation(t, successor));
            ++depth;
        }
        backup(tree_, path_, leaf);
    }

    /// Unqueried Boltzmann rollout from `s` at `depth` through d_max.
    double rollout(SimulationModel& model, const QTable& q_rollout, StateIndex s, std::size_t depth, Rng& rng) {
        double total = 0.0;
        const bool learn_here = cfg_.episodic_rollouts && cfg_.learn_from_unqueried;
        for (; depth <= d_max_; ++depth) {
            const std::size_t t = t0_ + depth;
            const auto& actions = structure_->available_actions[s];
            const ActionIndex a = softmax_action(q_rollout, s, actions, cfg_.softmax_temperature, rng, weights_);
            const bool success = model.reward_success(s, a, rng);
            const double r = model.reward(s, a, success);
            const StateIndex successor = model.successor(s, a, rng);
            if (learn_here) learn(q_pi_, s, a, r, successor, t);
            total += r;
            s = structure_->continuation(t, successor);
        }
        return total;
    }

    PlannerConfig cfg_;
    SearchTree tree_;
    QTable q_pi_;
    const TabularMdp* structure_ = nullptr;
    bool allow_queries_ = true;
    std::size_t d_max_ = 0;
    std::size_t t0_ = 0;
    std::vector<PathStep> path_;
    std::vector<double> scratch_;
    std::vector<double> weights_;
    Observer observer_;
};

/// Seeds of the generator streams one planning run uses.
struct RunSeeds {
    std::uint64_t env;
    std::uint64_t agent;

    static RunSeeds from(std::uint64_t seed) { return {derive_seed(seed, "env"), derive_seed(seed, "agent")}; }
};

/// Plays the whole horizon: search, act in the real MDP, update the belief,
/// and train the real-data learner Q_M on queried rewards (on every reward when
/// rewards are known). Q_M starts i.i.d. uniform on [0,1).
inline Trace run_planner(const ArlProblem& problem, BeliefState belief, const PlannerConfig& cfg, RunSeeds seeds) {
    problem.validate();
    const TabularMdp& mdp = problem.mdp;
    Rng env_rng(seeds.env);
    Rng agent_rng(seeds.agent);
    Rng init_rng(derive_seed(seeds.agent, "q-init"));
    QTable q_m = QTable::random(mdp.num_states, mdp.num_actions, init_rng);
    Planner planner(cfg);
    Trace trace;
    const std::size_t total = problem.total_steps();
    trace.steps.reserve(total);
    StateIndex s = mdp.initial_state;
    for (std::size_t t = 0; t < total; ++t) {
        const ActionPair act = planner.search(SearchRoot{s, t, total - t}, belief, q_m, agent_rng);
        const StepOutcome out = step(problem, s, act, env_rng);
        update(belief, s, act.action, out);
        Reward learned = out.observed_reward;
        if (!learned && belief.rewards_known(s, act.action)) learned = belief.structure.expected_reward(s, act.action);
        if (learned) {
            const bool last = mdp.ends_episode(t);
            const std::span<const ActionIndex> next =
                last ? std::span<const ActionIndex>{} : std::span<const ActionIndex>(mdp.available_actions[out.next_state]);
            q_learning_step(q_m, s, act.action, *learned, out.next_state, next, cfg.qlearn_rate, cfg.qlearn_discount);
        }
        trace.steps.push_back(TraceStep{t, t / mdp.episode_len, s, act, out});
        s = mdp.continuation(t, out.next_state);
    }
    return trace;
}

}  // namespace barl
