#pragma once

// JSON documents for environments, problems, beliefs, planner settings and
// traces, plus the oracle fixture format (values with a provenance block).

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "barl/baselines.hpp"
#include "barl/belief.hpp"
#include "barl/env.hpp"
#include "barl/mcts.hpp"
#include "barl/oracle.hpp"

namespace barl {

using Json = nlohmann::json;

NLOHMANN_JSON_SERIALIZE_ENUM(SamplingMode, {{SamplingMode::eager, "eager"},
                                            {SamplingMode::lazy, "lazy"},
                                            {SamplingMode::collapsed, "collapsed"}})

NLOHMANN_JSON_SERIALIZE_ENUM(Heuristic::Kind, {{Heuristic::Kind::none, "none"},
                                               {Heuristic::Kind::first_n, "first_n"},
                                               {Heuristic::Kind::mcch, "mcch"}})

inline void to_json(Json& j, const TabularMdp& m) {
    j = Json{{"num_states", m.num_states},
             {"num_actions", m.num_actions},
             {"available_actions", m.available_actions},
             {"transition", m.transition},
             {"reward_param", m.reward_param},
             {"reward_scale", m.reward_scale},
             {"episode_len", m.episode_len},
             {"initial_state", m.initial_state}};
}

inline void from_json(const Json& j, TabularMdp& m) {
    m = TabularMdp(j.at("num_states").get<std::size_t>(), j.at("num_actions").get<std::size_t>(),
                   j.at("episode_len").get<std::size_t>());
    j.at("available_actions").get_to(m.available_actions);
    j.at("transition").get_to(m.transition);
    j.at("reward_param").get_to(m.reward_param);
    if (j.contains("reward_scale")) j.at("reward_scale").get_to(m.reward_scale);
    j.at("initial_state").get_to(m.initial_state);
    m.validate();
}

inline void to_json(Json& j, const ArlProblem& p) {
    j = Json{{"mdp", p.mdp},
             {"query_cost", p.query_cost},
             {"horizon", p.horizon},
             {"known_transitions", p.known_transitions},
             {"known_rewards", p.known_rewards}};
}

inline void from_json(const Json& j, ArlProblem& p) {
    j.at("mdp").get_to(p.mdp);
    j.at("query_cost").get_to(p.query_cost);
    j.at("horizon").get_to(p.horizon);
    j.at("known_transitions").get_to(p.known_transitions);
    j.at("known_rewards").get_to(p.known_rewards);
    p.validate();
}

inline void to_json(Json& j, const BetaPrior& b) { j = Json{{"alpha", b.alpha}, {"beta", b.beta}}; }

inline void from_json(const Json& j, BetaPrior& b) {
    j.at("alpha").get_to(b.alpha);
    j.at("beta").get_to(b.beta);
}

inline void to_json(Json& j, const BeliefState& b) {
    j = Json{{"structure", b.structure},
             {"transition_counts", b.transition_counts},
             {"reward_success", b.reward_success},
             {"reward_failure", b.reward_failure},
             {"transition_pinned", b.transition_pinned},
             {"reward_pinned", b.reward_pinned}};
}

inline void from_json(const Json& j, BeliefState& b) {
    j.at("structure").get_to(b.structure);
    j.at("transition_counts").get_to(b.transition_counts);
    j.at("reward_success").get_to(b.reward_success);
    j.at("reward_failure").get_to(b.reward_failure);
    j.at("transition_pinned").get_to(b.transition_pinned);
    j.at("reward_pinned").get_to(b.reward_pinned);
}

inline void to_json(Json& j, const PlannerConfig& c) {
    j = Json{{"num_simulations", c.num_simulations},
             {"ucb_constant", c.ucb_constant},
             {"max_depth", c.max_depth ? Json(*c.max_depth) : Json(nullptr)},
             {"expansion_threshold", c.expansion_threshold},
             {"episodic_rollouts", c.episodic_rollouts},
             {"softmax_temperature", c.softmax_temperature},
             {"qlearn_rate", c.qlearn_rate},
             {"qlearn_discount", c.qlearn_discount},
             {"query_cost", c.query_cost},
             {"learn_from_unqueried", c.learn_from_unqueried},
             {"sampling", c.sampling}};
}

/// Missing keys keep the value already in `c`, so a partial document
/// overrides a preset.
inline void from_json(const Json& j, PlannerConfig& c) {
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("num_simulations", c.num_simulations);
    opt("ucb_constant", c.ucb_constant);
    if (j.contains("max_depth")) {
        const auto& d = j.at("max_depth");
        c.max_depth = d.is_null() ? std::nullopt : std::optional<std::size_t>(d.get<std::size_t>());
    }
    opt("expansion_threshold", c.expansion_threshold);
    opt("episodic_rollouts", c.episodic_rollouts);
    opt("softmax_temperature", c.softmax_temperature);
    opt("qlearn_rate", c.qlearn_rate);
    opt("qlearn_discount", c.qlearn_discount);
    opt("query_cost", c.query_cost);
    opt("learn_from_unqueried", c.learn_from_unqueried);
    opt("sampling", c.sampling);
}

inline void to_json(Json& j, const Heuristic& h) { j = Json{{"kind", h.kind}, {"n", h.n}, {"mu", h.mu}}; }

inline void from_json(const Json& j, Heuristic& h) {
    if (j.contains("kind")) j.at("kind").get_to(h.kind);
    if (j.contains("n")) j.at("n").get_to(h.n);
    if (j.contains("mu")) j.at("mu").get_to(h.mu);
}

inline void to_json(Json& j, const ModelFreeParams& p) {
    j = Json{{"epsilon", p.epsilon},
             {"learn_rate", p.learn_rate},
             {"discount", p.discount},
             {"heuristic", p.heuristic}};
}

inline void from_json(const Json& j, ModelFreeParams& p) {
    if (j.contains("epsilon")) j.at("epsilon").get_to(p.epsilon);
    if (j.contains("learn_rate")) j.at("learn_rate").get_to(p.learn_rate);
    if (j.contains("discount")) j.at("discount").get_to(p.discount);
    if (j.contains("heuristic")) j.at("heuristic").get_to(p.heuristic);
}

inline void to_json(Json& j, const ActionPair& a) { j = Json{{"query", a.query}, {"action", a.action}}; }

inline void from_json(const Json& j, ActionPair& a) {
    j.at("query").get_to(a.query);
    j.at("action").get_to(a.action);
}

inline void to_json(Json& j, const TraceStep& s) {
    j = Json{{"t", s.t},
             {"episode", s.episode},
             {"state", s.state},
             {"act", s.act},
             {"next_state", s.outcome.next_state},
             {"observed_reward", s.outcome.observed_reward ? Json(*s.outcome.observed_reward) : Json(nullptr)},
             {"true_reward", s.outcome.true_reward}};
}

inline void from_json(const Json& j, TraceStep& s) {
    j.at("t").get_to(s.t);
    j.at("episode").get_to(s.episode);
    j.at("state").get_to(s.state);
    j.at("act").get_to(s.act);
    j.at("next_state").get_to(s.outcome.next_state);
    const auto& r = j.at("observed_reward");
    s.outcome.observed_reward = r.is_null() ? Reward{} : Reward{r.get<double>()};
    j.at("true_reward").get_to(s.outcome.true_reward);
}

inline void to_json(Json& j, const Trace& t) { j = Json{{"steps", t.steps}}; }
inline void from_json(const Json& j, Trace& t) { j.at("steps").get_to(t.steps); }

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline void write_json_file(const std::string& path, const Json& doc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Oracle fixtures

/// Enumerated bandit oracle values with a provenance block naming the
/// generator and its inputs.
inline Json bandit_fixture(const BanditSolution& sol, const std::vector<BetaPrior>& prior, std::size_t trials,
                           const std::string& generator) {
    Json root_values = Json::array();
    for (const auto& av : sol.root_action_values()) {
        root_values.push_back(Json{{"query", av.act.query}, {"action", av.act.action}, {"q", av.q}});
    }
    Json optimal = Json::array();
    for (const auto& act : sol.root_optimal_actions()) optimal.push_back(act);
    std::ostringstream value;
    value.precision(17);
    value << sol.value();
    return Json{{"provenance",
                 {{"generator", generator},
                  {"method", "exhaustive expectimax over Beta posterior counts"},
                  {"tie_tolerance", BanditSolution::tie_tolerance}}},
                {"prior", prior},
                {"trials", trials},
                {"query_cost", sol.query_cost()},
                {"value", sol.value()},
                {"value_text", value.str()},
                {"root_action_values", root_values},
                {"root_optimal_actions", optimal},
                {"first_action", sol.first_action()},
                {"structure_check", optimal_query_structure_check(sol)}};
}

}  // namespace barl
