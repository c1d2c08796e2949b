// Command-line front end: runs experiments, the bandit oracle and gridsearch,
// and writes CSV output.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "barl/barl.hpp"

namespace fs = std::filesystem;
using namespace barl;

namespace {

struct CommonFlags {
    std::string config;
    std::string agent;
    std::vector<std::size_t> horizons;
    double cost = 0.0;
    std::size_t sims = 0;
    std::uint64_t seed = 0;
    std::size_t replicates = 0;
    std::string out;
    std::size_t threads = 1;

    CLI::Option* cost_opt = nullptr;
    CLI::Option* sims_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* reps_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "JSON experiment config (fields mirror ExperimentConfig)")
        ->check(CLI::ExistingFile);
    app->add_option("--agent", f.agent, "bamcp | bamcp_pp | egreedy | first_n | mcch");
    app->add_option("--horizon", f.horizons, "Horizon(s) in episodes, comma separated")->delimiter(',');
    f.cost_opt = app->add_option("--cost", f.cost, "Query cost");
    f.sims_opt = app->add_option("--sims", f.sims, "Simulations per step");
    f.seed_opt = app->add_option("--seed", f.seed, "Master seed");
    f.reps_opt = app->add_option("--replicates", f.replicates, "Replicates per horizon");
    app->add_option("--out", f.out, "Output directory");
    f.threads_opt = app->add_option("--threads", f.threads, "Worker threads (0: all cores)");
}

/// Defaults, then the config file, then explicit flags.
ExperimentConfig resolve(const ExperimentConfig& defaults, const CommonFlags& f) {
    ExperimentConfig cfg = defaults;
    if (!f.config.empty()) {
        const Json doc = read_json_file(f.config);
        from_json(doc.contains("experiment") ? doc.at("experiment") : doc, cfg);
    }
    if (!f.agent.empty()) cfg.agent = f.agent;
    if (!f.horizons.empty()) cfg.horizons = f.horizons;
    if (f.cost_opt->count()) cfg.query_cost = f.cost;
    if (f.sims_opt->count()) cfg.planner.num_simulations = f.sims;
    if (f.seed_opt->count()) cfg.master_seed = f.seed;
    if (f.reps_opt->count()) cfg.replicates = f.replicates;
    if (!f.out.empty()) cfg.out_dir = f.out;
    if (f.threads_opt->count()) cfg.threads = f.threads;
    return cfg;
}

void print_summary(const std::vector<SummaryRow>& rows) {
    for (const auto& r : rows) {
        std::cout << r.task << ' ' << r.agent << " return " << format_number(r.mean_return) << " (sd "
                  << format_number(r.sd_return) << ") queries " << format_number(r.mean_queries) << '\n';
    }
}

/// Runs the experiment and writes one output directory per horizon (the out
/// directory itself when there is only one).
void run_and_emit(const ExperimentConfig& cfg, std::optional<std::size_t> qtrace_every) {
    cfg.validate();
    const auto records = run_experiment(cfg);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_json_file((out / "config.json").string(), Json(cfg));
    for (std::size_t h = 0; h < cfg.horizons.size(); ++h) {
        const std::span<const RunRecord> block(records.data() + h * cfg.replicates, cfg.replicates);
        const fs::path dir = cfg.horizons.size() == 1 ? out : out / ("h" + std::to_string(cfg.horizons[h]));
        const auto rows = summarize(block);
        emit(block, query_frequency_curve(block), rows, dir);
        if (qtrace_every) {
            const ArlProblem problem = build_problem(cfg, cfg.horizons[h], 0);
            const BeliefState belief = init_belief(problem, cfg.prior.reward, cfg.prior.transition_alpha);
            const auto trace =
                root_value_trace(problem, belief, effective_planner(cfg), replicate_seeds(cfg.master_seed, 0).agent,
                                 *qtrace_every);
            write_qtrace_csv(dir / "qtrace.csv", trace);
        }
        print_summary(rows);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian active-RL planners, baselines and experiment harness"};
    app.require_subcommand(1);

    CommonFlags bandit_f, fork_f, loop_f, random_f, grid_f;

    auto* bandit = app.add_subcommand("bandit", "Bernoulli bandit with query costs");
    add_common(bandit, bandit_f);
    std::vector<double> arms;
    bandit->add_option("--arms", arms, "Arm success probabilities, comma separated")->delimiter(',');
    std::size_t qtrace_every = 0;
    bandit->add_option("--qtrace", qtrace_every,
                       "Also write qtrace.csv: root Q(query)/Q(non-query) every N simulations of the first search");

    auto* fork = app.add_subcommand("fork", "Late or Early Fork chain MDP");
    add_common(fork, fork_f);
    std::string variant;
    fork->add_option("--variant", variant, "late | early")->check(CLI::IsMember({"late", "early"}));
    std::size_t chain = 0;
    auto* chain_opt = fork->add_option("--chain", chain, "Chain length N");
    bool known_transitions = false;
    fork->add_flag("--known-transitions", known_transitions, "Pin the transition model to the truth");

    auto* loop = app.add_subcommand("double-loop", "Double-Loop with known rewards and unknown transitions");
    add_common(loop, loop_f);
    std::size_t loop_len = 0;
    auto* loop_opt = loop->add_option("--loop", loop_len, "Loop length L");

    auto* random = app.add_subcommand("random", "MDPs drawn from the generating prior");
    add_common(random, random_f);
    std::size_t states = 0, actions = 0, mdps = 0, episode_len = 0;
    auto* states_opt = random->add_option("--states", states, "States per MDP");
    auto* actions_opt = random->add_option("--actions", actions, "Actions per MDP");
    auto* mdps_opt = random->add_option("--mdps", mdps, "Number of distinct MDPs");
    auto* episode_opt = random->add_option("--episode-len", episode_len, "Steps per episode");

    auto* oracle = app.add_subcommand("oracle", "Bayes-optimal value of a Beta(0.5,0.5) bandit by enumeration");
    std::size_t oracle_t = 6;
    double oracle_c = 0.05;
    std::size_t oracle_arms = 2;
    std::size_t oracle_cap = default_bandit_trial_cap;
    std::string oracle_out;
    oracle->add_option("--horizon", oracle_t, "Trials")->capture_default_str();
    oracle->add_option("--cost", oracle_c, "Query cost")->capture_default_str();
    oracle->add_option("--arms", oracle_arms, "Number of arms")->capture_default_str();
    oracle->add_option("--cap", oracle_cap, "Largest horizon to enumerate")->capture_default_str();
    oracle->add_option("--out", oracle_out, "Directory for oracle.json");

    auto* grid = app.add_subcommand("gridsearch", "Exhaustive hyperparameter search maximizing mean return");
    add_common(grid, grid_f);
    grid->get_option("--config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (bandit->parsed()) {
            ExperimentConfig defaults;
            defaults.env.family = "bandit";
            ExperimentConfig cfg = resolve(defaults, bandit_f);
            cfg.env.family = "bandit";
            if (!arms.empty()) cfg.env.arm_means = arms;
            run_and_emit(cfg, qtrace_every ? std::optional<std::size_t>(qtrace_every) : std::nullopt);
        } else if (fork->parsed()) {
            ExperimentConfig defaults;
            defaults.env.family = "late_fork";
            ExperimentConfig cfg = resolve(defaults, fork_f);
            if (!variant.empty()) cfg.env.family = variant == "late" ? "late_fork" : "early_fork";
            if (cfg.env.family != "late_fork" && cfg.env.family != "early_fork") {
                throw std::invalid_argument("fork needs env.family late_fork or early_fork");
            }
            if (chain_opt->count()) cfg.env.chain_len = chain;
            if (known_transitions) cfg.env.known_transitions = true;
            run_and_emit(cfg, std::nullopt);
        } else if (loop->parsed()) {
            ExperimentConfig defaults;
            defaults.env.family = "double_loop";
            defaults.agent = "bamcp";
            defaults.planner = PlannerConfig::bamcp();
            ExperimentConfig cfg = resolve(defaults, loop_f);
            cfg.env.family = "double_loop";
            if (loop_opt->count()) cfg.env.loop_len = loop_len;
            run_and_emit(cfg, std::nullopt);
        } else if (random->parsed()) {
            ExperimentConfig defaults;
            defaults.env.family = "random";
            defaults.prior.transition_alpha = defaults.env.transition_alpha;
            defaults.horizons = {20};
            ExperimentConfig cfg = resolve(defaults, random_f);
            cfg.env.family = "random";
            if (states_opt->count()) cfg.env.num_states = states;
            if (actions_opt->count()) cfg.env.num_actions = actions;
            if (mdps_opt->count()) cfg.env.num_mdps = mdps;
            if (episode_opt->count()) cfg.env.episode_len = episode_len;
            run_and_emit(cfg, std::nullopt);
        } else if (oracle->parsed()) {
            const std::vector<BetaPrior> prior(oracle_arms, BetaPrior{0.5, 0.5});
            const BanditSolution sol = bayes_optimal_bandit(prior, oracle_t, oracle_c, oracle_cap);
            const Json doc = bandit_fixture(sol, prior, oracle_t, "barl oracle");
            if (!oracle_out.empty()) {
                fs::create_directories(oracle_out);
                write_json_file((fs::path(oracle_out) / "oracle.json").string(), doc);
            }
            const ActionPair first = sol.first_action();
            std::cout << "value " << format_number(sol.value()) << " first_action query=" << first.query
                      << " action=" << first.action << '\n';
        } else if (grid->parsed()) {
            const Json doc = read_json_file(grid_f.config);
            if (!doc.contains("grid") || !doc.at("grid").is_object()) {
                throw std::invalid_argument(grid_f.config + ": needs a \"grid\" object of parameter lists");
            }
            const ExperimentConfig cfg = resolve(ExperimentConfig{}, grid_f);
            std::vector<GridAxis> space;
            for (const auto& [name, values] : doc.at("grid").items()) {
                space.push_back(GridAxis{name, values.get<std::vector<double>>()});
            }
            const GridResult result = gridsearch(space, cfg);
            const fs::path out(cfg.out_dir);
            fs::create_directories(out);
            std::ofstream csv(out / "gridsearch.csv", std::ios::trunc | std::ios::binary);
            if (!csv) throw std::runtime_error("cannot write " + (out / "gridsearch.csv").string());
            for (const auto& axis : space) csv << axis.name << ',';
            csv << "mean_return,mean_queries\n";
            for (const auto& ev : result.evaluations) {
                for (const auto& [name, value] : ev.point) csv << format_number(value) << ',';
                csv << format_number(ev.mean_return) << ',' << format_number(ev.mean_queries) << '\n';
            }
            Json best = Json::object();
            for (const auto& [name, value] : result.best) best[name] = value;
            write_json_file((out / "best.json").string(), best);
            std::cout << "best " << best.dump() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return EXIT_FAILURE;
    }
    return EXIT_SUCCESS;
}
