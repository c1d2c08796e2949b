#pragma once

// Seeded experiment runs, query-frequency curves, summaries, gridsearch and
// CSV output.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "barl/baselines.hpp"
#include "barl/belief.hpp"
#include "barl/env.hpp"
#include "barl/mcts.hpp"
#include "barl/serialize.hpp"

namespace barl {

/// Environment family and its parameters. Fields a family does not use are
/// ignored.
struct EnvSpec {
    std::string family = "bandit";  // bandit | late_fork | early_fork | double_loop | random
    std::vector<double> arm_means{0.2, 0.8};
    std::size_t chain_len = 2;
    std::size_t loop_len = 4;
    bool known_transitions = false;
    std::size_t num_states = 5;
    std::size_t num_actions = 3;
    double reward_alpha = 0.5;
    double transition_alpha = 0.2;
    std::size_t episode_len = 5;
    /// Random family: replicate r runs on MDP r mod num_mdps.
    std::size_t num_mdps = 25;
};

struct PriorSpec {
    BetaPrior reward{0.5, 0.5};
    double transition_alpha = 0.5;
};

struct ExperimentConfig {
    EnvSpec env;
    std::string agent = "bamcp_pp";  // bamcp | bamcp_pp | egreedy | first_n | mcch
    PlannerConfig planner;
    ModelFreeParams model_free;
    PriorSpec prior;
    double query_cost = 0.5;
    /// Episodes (trials for bandits); one block of runs per entry.
    std::vector<std::size_t> horizons{30};
    std::size_t replicates = 1;
    std::uint64_t master_seed = 0;
    std::string out_dir = "out";
    /// Worker threads; 0 picks the hardware concurrency.
    std::size_t threads = 1;

    void validate() const;
};

inline const std::vector<std::string>& agent_names() {
    static const std::vector<std::string> names{"bamcp", "bamcp_pp", "egreedy", "first_n", "mcch"};
    return names;
}

inline const std::vector<std::string>& family_names() {
    static const std::vector<std::string> names{"bandit", "late_fork", "early_fork", "double_loop", "random"};
    return names;
}

inline bool is_planner_agent(const std::string& agent) { return agent == "bamcp" || agent == "bamcp_pp"; }

inline void ExperimentConfig::validate() const {
    const auto& agents = agent_names();
    const auto& families = family_names();
    if (std::find(agents.begin(), agents.end(), agent) == agents.end()) {
        throw std::invalid_argument("unknown agent '" + agent + "'");
    }
    if (std::find(families.begin(), families.end(), env.family) == families.end()) {
        throw std::invalid_argument("unknown environment family '" + env.family + "'");
    }
    if (env.family == "double_loop" && !is_planner_agent(agent)) {
        throw std::invalid_argument("agent '" + agent + "' needs queried rewards; the double loop has known rewards");
    }
    if (env.family == "random" && env.num_mdps == 0) throw std::invalid_argument("random family needs num_mdps >= 1");
    if (replicates < 1) throw std::invalid_argument("replicate count must be at least 1");
    if (horizons.empty()) throw std::invalid_argument("horizon grid is empty");
    for (std::size_t h : horizons) {
        if (h < 1) throw std::invalid_argument("horizons must be at least 1");
    }
    if (!(query_cost > 0.0)) throw std::invalid_argument("query cost must be positive");
    if (is_planner_agent(agent)) {
        planner.validate();
    } else {
        model_free.validate();
    }
}

// ---------------------------------------------------------------------------
// JSON mirror of the config

inline void to_json(Json& j, const EnvSpec& e) {
    j = Json{{"family", e.family},
             {"arm_means", e.arm_means},
             {"chain_len", e.chain_len},
             {"loop_len", e.loop_len},
             {"known_transitions", e.known_transitions},
             {"num_states", e.num_states},
             {"num_actions", e.num_actions},
             {"reward_alpha", e.reward_alpha},
             {"transition_alpha", e.transition_alpha},
             {"episode_len", e.episode_len},
             {"num_mdps", e.num_mdps}};
}

namespace detail {
template <class T>
void get_if(const Json& j, const char* key, T& field) {
    if (j.contains(key)) j.at(key).get_to(field);
}
}  // namespace detail

inline void from_json(const Json& j, EnvSpec& e) {
    using detail::get_if;
    get_if(j, "family", e.family);
    get_if(j, "arm_means", e.arm_means);
    get_if(j, "chain_len", e.chain_len);
    get_if(j, "loop_len", e.loop_len);
    get_if(j, "known_transitions", e.known_transitions);
    get_if(j, "num_states", e.num_states);
    get_if(j, "num_actions", e.num_actions);
    get_if(j, "reward_alpha", e.reward_alpha);
    get_if(j, "transition_alpha", e.transition_alpha);
    get_if(j, "episode_len", e.episode_len);
    get_if(j, "num_mdps", e.num_mdps);
}

inline void to_json(Json& j, const PriorSpec& p) {
    j = Json{{"reward", p.reward}, {"transition_alpha", p.transition_alpha}};
}

inline void from_json(const Json& j, PriorSpec& p) {
    detail::get_if(j, "reward", p.reward);
    detail::get_if(j, "transition_alpha", p.transition_alpha);
}

inline void to_json(Json& j, const ExperimentConfig& c) {
    j = Json{{"env", c.env},
             {"agent", c.agent},
             {"planner", c.planner},
             {"model_free", c.model_free},
             {"prior", c.prior},
             {"query_cost", c.query_cost},
             {"horizons", c.horizons},
             {"replicates", c.replicates},
             {"master_seed", c.master_seed},
             {"out_dir", c.out_dir},
             {"threads", c.threads}};
}

/// Missing keys keep the current value of `c`.
inline void from_json(const Json& j, ExperimentConfig& c) {
    using detail::get_if;
    get_if(j, "env", c.env);
    get_if(j, "agent", c.agent);
    get_if(j, "planner", c.planner);
    get_if(j, "model_free", c.model_free);
    get_if(j, "prior", c.prior);
    get_if(j, "query_cost", c.query_cost);
    get_if(j, "horizons", c.horizons);
    get_if(j, "replicates", c.replicates);
    get_if(j, "master_seed", c.master_seed);
    get_if(j, "out_dir", c.out_dir);
    get_if(j, "threads", c.threads);
}

// ---------------------------------------------------------------------------
// Runs

struct RunRecord {
    std::string task;
    std::string agent;
    std::size_t horizon = 0;
    std::size_t replicate = 0;
    double query_cost = 0.0;
    Trace trace;
    double total_return = 0.0;
    std::size_t queries = 0;
};

/// Short task label, e.g. "bandit-30", "late2-20", "rand-20".
inline std::string task_name(const EnvSpec& env, std::size_t horizon) {
    std::string base;
    if (env.family == "bandit") base = "bandit";
    else if (env.family == "late_fork") base = "late" + std::to_string(env.chain_len);
    else if (env.family == "early_fork") base = "early" + std::to_string(env.chain_len);
    else if (env.family == "double_loop") base = "loop" + std::to_string(env.loop_len);
    else base = "rand";
    return base + "-" + std::to_string(horizon);
}

/// The problem replicate `replicate` runs on.
inline ArlProblem build_problem(const ExperimentConfig& cfg, std::size_t horizon, std::size_t replicate) {
    const EnvSpec& e = cfg.env;
    if (e.family == "bandit") return make_bandit(e.arm_means, horizon, cfg.query_cost);
    if (e.family == "late_fork") return make_late_fork(e.chain_len, cfg.query_cost, horizon, e.known_transitions);
    if (e.family == "early_fork") return make_early_fork(e.chain_len, cfg.query_cost, horizon, e.known_transitions);
    if (e.family == "double_loop") return make_double_loop_problem(e.loop_len, horizon, cfg.query_cost);
    if (e.family == "random") {
        Rng rng = make_rng(cfg.master_seed, "mdp", replicate % e.num_mdps);
        return make_random_problem(
            sample_random_mdp(e.num_states, e.num_actions, e.reward_alpha, e.transition_alpha, rng, e.episode_len),
            cfg.query_cost, horizon);
    }
    throw std::invalid_argument("unknown environment family '" + e.family + "'");
}

inline RunSeeds replicate_seeds(std::uint64_t master_seed, std::size_t replicate) {
    return {derive_seed(master_seed, "env", replicate), derive_seed(master_seed, "agent", replicate)};
}

/// Planner settings the agent actually runs with: BAMCP forces k = 1 and
/// plain rollouts; the query cost always comes from the experiment.
inline PlannerConfig effective_planner(const ExperimentConfig& cfg) {
    PlannerConfig p = cfg.planner;
    p.query_cost = cfg.query_cost;
    if (cfg.agent == "bamcp") {
        p.expansion_threshold = 1;
        p.episodic_rollouts = false;
    }
    return p;
}

inline ModelFreeParams effective_model_free(const ExperimentConfig& cfg) {
    ModelFreeParams p = cfg.model_free;
    if (cfg.agent == "egreedy") p.heuristic.kind = Heuristic::Kind::none;
    if (cfg.agent == "first_n") p.heuristic.kind = Heuristic::Kind::first_n;
    if (cfg.agent == "mcch") p.heuristic.kind = Heuristic::Kind::mcch;
    return p;
}

inline RunRecord run_replicate(const ExperimentConfig& cfg, std::size_t horizon, std::size_t replicate) {
    const ArlProblem problem = build_problem(cfg, horizon, replicate);
    const RunSeeds seeds = replicate_seeds(cfg.master_seed, replicate);
    RunRecord rec;
    rec.task = task_name(cfg.env, horizon);
    rec.agent = cfg.agent;
    rec.horizon = horizon;
    rec.replicate = replicate;
    rec.query_cost = cfg.query_cost;
    if (is_planner_agent(cfg.agent)) {
        const BeliefState belief = init_belief(problem, cfg.prior.reward, cfg.prior.transition_alpha);
        rec.trace = run_planner(problem, belief, effective_planner(cfg), seeds);
    } else {
        Rng init_rng(derive_seed(seeds.agent, "q-init"));
        ModelFreeAgentState agent = make_model_free_agent(problem.mdp, effective_model_free(cfg), init_rng);
        rec.trace = run_model_free(problem, agent, seeds);
    }
    rec.total_return = return_of(rec.trace, cfg.query_cost);
    rec.queries = rec.trace.query_count();
    return rec;
}

/// Runs `count` independent jobs on up to `threads` workers; job k writes
/// slot k, so the result order never depends on scheduling.
template <class Job>
void parallel_for(std::size_t count, std::size_t threads, Job&& job) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) job(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < count;) {
                try {
                    job(k);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Every (horizon, replicate) run, ordered by horizon then replicate.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t per = cfg.replicates;
    std::vector<RunRecord> records(cfg.horizons.size() * per);
    parallel_for(records.size(), cfg.threads, [&](std::size_t k) {
        records[k] = run_replicate(cfg, cfg.horizons[k / per], k % per);
    });
    return records;
}

// ---------------------------------------------------------------------------
// Aggregates

/// Fraction of records that queried at each step.
inline std::vector<double> query_frequency_curve(std::span<const RunRecord> records) {
    if (records.empty()) return {};
    const std::size_t len = records.front().trace.steps.size();
    std::vector<std::size_t> hits(len, 0);
    for (const auto& rec : records) {
        if (rec.trace.steps.size() != len) throw std::invalid_argument("records have different horizons");
        for (std::size_t t = 0; t < len; ++t) hits[t] += rec.trace.steps[t].act.query ? 1 : 0;
    }
    std::vector<double> curve(len);
    for (std::size_t t = 0; t < len; ++t) curve[t] = static_cast<double>(hits[t]) / static_cast<double>(records.size());
    return curve;
}

struct SummaryRow {
    std::string task;
    std::string agent;
    double mean_return = 0.0;
    double sd_return = 0.0;
    double mean_queries = 0.0;
    std::size_t runs = 0;
};

namespace detail {
/// Sum in sorted order so the result does not depend on record order.
inline double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}
}  // namespace detail

/// Mean and sample SD of return (SD 0 for a single record) and mean queries.
inline SummaryRow summarize_group(std::span<const RunRecord> group) {
    if (group.empty()) throw std::invalid_argument("cannot summarize an empty group");
    SummaryRow row;
    row.task = group.front().task;
    row.agent = group.front().agent;
    row.runs = group.size();
    std::vector<double> returns;
    std::vector<double> queries;
    for (const auto& rec : group) {
        returns.push_back(rec.total_return);
        queries.push_back(static_cast<double>(rec.queries));
    }
    const double n = static_cast<double>(group.size());
    row.mean_return = detail::sorted_sum(returns) / n;
    row.mean_queries = detail::sorted_sum(queries) / n;
    if (group.size() > 1) {
        std::vector<double> sq;
        for (double r : returns) sq.push_back((r - row.mean_return) * (r - row.mean_return));
        row.sd_return = std::sqrt(detail::sorted_sum(sq) / (n - 1.0));
    }
    return row;
}

/// One row per (task, agent), sorted by task then agent.
inline std::vector<SummaryRow> summarize(std::span<const RunRecord> records) {
    std::map<std::pair<std::string, std::string>, std::vector<RunRecord>> groups;
    for (const auto& rec : records) groups[{rec.task, rec.agent}].push_back(rec);
    std::vector<SummaryRow> rows;
    for (const auto& [key, group] : groups) rows.push_back(summarize_group(group));
    return rows;
}

// ---------------------------------------------------------------------------
// Gridsearch

struct GridAxis {
    std::string name;
    std::vector<double> values;
};

using GridPoint = std::vector<std::pair<std::string, double>>;

struct GridEvaluation {
    GridPoint point;
    double mean_return = 0.0;
    double mean_queries = 0.0;
};

struct GridResult {
    GridPoint best;
    std::vector<GridEvaluation> evaluations;
};

/// Sets one named hyperparameter. Planner: u, k, temperature, alpha, gamma,
/// sims. Model-free: epsilon, learn_rate, n, mu.
inline void apply_parameter(ExperimentConfig& cfg, const std::string& name, double value) {
    auto count = [&] {
        if (!(value >= 0.0) || value != std::floor(value)) {
            throw std::invalid_argument("parameter '" + name + "' needs a non-negative integer");
        }
        return static_cast<std::size_t>(value);
    };
    if (name == "u") cfg.planner.ucb_constant = value;
    else if (name == "k") cfg.planner.expansion_threshold = count();
    else if (name == "temperature") cfg.planner.softmax_temperature = value;
    else if (name == "alpha") cfg.planner.qlearn_rate = value;
    else if (name == "gamma") cfg.planner.qlearn_discount = value;
    else if (name == "sims") cfg.planner.num_simulations = count();
    else if (name == "epsilon") cfg.model_free.epsilon = value;
    else if (name == "learn_rate") cfg.model_free.learn_rate = value;
    else if (name == "n") cfg.model_free.heuristic.n = count();
    else if (name == "mu") cfg.model_free.heuristic.mu = value;
    else throw std::invalid_argument("unknown grid parameter '" + name + "'");
}

/// Exhaustive search maximizing mean return over all runs of `task` (every
/// horizon, every replicate). Ties go to fewer mean queries, then to the
/// lexicographically smallest point.
inline GridResult gridsearch(std::span<const GridAxis> space, const ExperimentConfig& task) {
    if (space.empty()) throw std::invalid_argument("empty parameter grid");
    std::size_t points = 1;
    for (const auto& axis : space) {
        if (axis.values.empty()) throw std::invalid_argument("grid axis '" + axis.name + "' has no values");
        points *= axis.values.size();
    }
    GridResult result;
    for (std::size_t p = 0; p < points; ++p) {
        GridPoint point;
        ExperimentConfig cfg = task;
        std::size_t rest = p;
        for (std::size_t k = space.size(); k-- > 0;) {
            point.emplace_back(space[k].name, space[k].values[rest % space[k].values.size()]);
            rest /= space[k].values.size();
        }
        std::reverse(point.begin(), point.end());
        for (const auto& [name, value] : point) apply_parameter(cfg, name, value);
        const auto records = run_experiment(cfg);
        std::vector<double> returns;
        std::vector<double> queries;
        for (const auto& rec : records) {
            returns.push_back(rec.total_return);
            queries.push_back(static_cast<double>(rec.queries));
        }
        const double n = static_cast<double>(records.size());
        result.evaluations.push_back(
            GridEvaluation{point, detail::sorted_sum(returns) / n, detail::sorted_sum(queries) / n});
    }
    const auto better = [](const GridEvaluation& a, const GridEvaluation& b) {
        if (a.mean_return != b.mean_return) return a.mean_return > b.mean_return;
        if (a.mean_queries != b.mean_queries) return a.mean_queries < b.mean_queries;
        for (std::size_t k = 0; k < a.point.size(); ++k) {
            if (a.point[k].second != b.point[k].second) return a.point[k].second < b.point[k].second;
        }
        return false;
    };
    result.best = std::min_element(result.evaluations.begin(), result.evaluations.end(), better)->point;
    return result;
}

// ---------------------------------------------------------------------------
// CSV output

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double x) {
    if (x == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace detail {
inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}
}  // namespace detail

inline void write_runs_csv(const std::filesystem::path& path, std::span<const RunRecord> records) {
    auto out = detail::open_output(path);
    out << "replicate,episode,step,state,query,action,observed_reward,true_reward,cum_return\n";
    for (const auto& rec : records) {
        double cum = 0.0;
        for (const auto& st : rec.trace.steps) {
            cum += st.outcome.true_reward - (st.act.query ? rec.query_cost : 0.0);
            out << rec.replicate << ',' << st.episode << ',' << st.t << ',' << st.state << ','
                << (st.act.query ? 1 : 0) << ',' << st.act.action << ','
                << (st.outcome.observed_reward ? format_number(*st.outcome.observed_reward) : std::string()) << ','
                << format_number(st.outcome.true_reward) << ',' << format_number(cum) << '\n';
        }
    }
    detail::finish(out, path);
}

inline void write_curves_csv(const std::filesystem::path& path, std::span<const double> curve) {
    auto out = detail::open_output(path);
    out << "step,query_frequency\n";
    for (std::size_t t = 0; t < curve.size(); ++t) out << t << ',' << format_number(curve[t]) << '\n';
    detail::finish(out, path);
}

inline void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows) {
    auto out = detail::open_output(path);
    out << "task,agent,mean_return,sd_return,mean_queries\n";
    for (const auto& r : rows) {
        out << r.task << ',' << r.agent << ',' << format_number(r.mean_return) << ',' << format_number(r.sd_return)
            << ',' << format_number(r.mean_queries) << '\n';
    }
    detail::finish(out, path);
}

/// Writes runs.csv, curves.csv and summary.csv into `out_dir` (created if
/// needed), overwriting earlier output. Records must share one horizon.
inline void emit(std::span<const RunRecord> records, std::span<const double> curve, std::span<const SummaryRow> summaries,
                 const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
    write_runs_csv(out_dir / "runs.csv", records);
    write_curves_csv(out_dir / "curves.csv", curve);
    write_summary_csv(out_dir / "summary.csv", summaries);
}

inline void emit(std::span<const RunRecord> records, const std::filesystem::path& out_dir) {
    const auto curve = query_frequency_curve(records);
    const auto rows = summarize(records);
    emit(records, curve, rows, out_dir);
}

/// One parsed runs.csv row; `observed_reward` is nullopt for an empty field.
struct RunRow {
    std::size_t replicate = 0;
    std::size_t episode = 0;
    std::size_t step = 0;
    StateIndex state = 0;
    bool query = false;
    ActionIndex action = 0;
    Reward observed_reward;
    double true_reward = 0.0;
    double cum_return = 0.0;
};

inline std::vector<RunRow> read_runs_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "replicate,episode,step,state,query,action,observed_reward,true_reward,cum_return") {
        throw std::runtime_error(path.string() + ": unexpected header");
    }
    std::vector<RunRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 9) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 9 fields");
        try {
            RunRow r;
            r.replicate = std::stoull(f[0]);
            r.episode = std::stoull(f[1]);
            r.step = std::stoull(f[2]);
            r.state = std::stoull(f[3]);
            r.query = f[4] == "1";
            r.action = std::stoull(f[5]);
            if (!f[6].empty()) r.observed_reward = std::stod(f[6]);
            r.true_reward = std::stod(f[7]);
            r.cum_return = std::stod(f[8]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Root value trace

struct QTraceRow {
    std::size_t simulations = 0;
    double q_query = 0.0;
    double q_nonquery = 0.0;
};

/// Best root Q among query and among non-query actions after every `every`
/// simulations of one search from the problem's first step.
inline std::vector<QTraceRow> root_value_trace(const ArlProblem& problem, const BeliefState& belief,
                                               const PlannerConfig& cfg, std::uint64_t seed, std::size_t every) {
    if (every == 0) throw std::invalid_argument("trace interval must be positive");
    Rng agent_rng(derive_seed(seed, "agent"));
    Rng init_rng(derive_seed(derive_seed(seed, "agent"), "q-init"));
    const QTable q_m = QTable::random(problem.mdp.num_states, problem.mdp.num_actions, init_rng);
    Planner planner(cfg);
    std::vector<QTraceRow> rows;
    planner.set_observer([&](std::size_t done, const Planner& p) {
        if (done % every == 0 || done == cfg.num_simulations) rows.push_back({done, p.root_value(true), p.root_value(false)});
    });
    planner.search(SearchRoot{problem.mdp.initial_state, 0, problem.total_steps()}, belief, q_m, agent_rng);
    return rows;
}

inline void write_qtrace_csv(const std::filesystem::path& path, std::span<const QTraceRow> rows) {
    auto out = detail::open_output(path);
    out << "simulations,q_query,q_nonquery\n";
    auto num = [](double x) { return std::isnan(x) ? std::string() : format_number(x); };
    for (const auto& r : rows) out << r.simulations << ',' << num(r.q_query) << ',' << num(r.q_nonquery) << '\n';
    detail::finish(out, path);
}

}  // namespace barl
