// One search from the first step of a two-arm query-cost bandit, next to the
// exact Bayes-optimal root values.

#include <iostream>

#include "barl/barl.hpp"

int main() {
    using namespace barl;
    const double cost = 0.05;
    const std::size_t trials = 4;
    const ArlProblem problem = make_bandit({0.2, 0.8}, trials, cost);
    const BeliefState belief = init_belief(problem, BetaPrior{0.5, 0.5}, 0.5);

    PlannerConfig cfg;
    cfg.num_simulations = 50000;
    cfg.query_cost = cost;
    Planner planner(cfg);
    Rng rng(derive_seed(7, "agent"));
    Rng init(derive_seed(7, "q-init"));
    const QTable q_m = QTable::random(1, 2, init);
    const ActionPair act = planner.search(SearchRoot{0, 0, trials}, belief, q_m, rng);

    std::cout << "search picked query=" << act.query << " action=" << act.action << "\n";
    planner.write_root_table(std::cout);

    const BanditSolution exact = bayes_optimal_bandit({{0.5, 0.5}, {0.5, 0.5}}, trials, cost);
    std::cout << "exact value " << exact.value() << "\n";
    for (const auto& av : exact.root_action_values()) {
        std::cout << "  query=" << av.act.query << " action=" << av.act.action << " q=" << av.q << "\n";
    }
}
