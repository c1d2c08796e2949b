#include <gtest/gtest.h>

#include <cmath>

#include "barl/env.hpp"
#include "barl/oracle.hpp"

using namespace barl;

TEST(Bandit, TwoArmShape) {
    const ArlProblem p = make_bandit({0.2, 0.8}, 40, 0.5);
    EXPECT_EQ(p.mdp.num_states, 1u);
    EXPECT_EQ(p.mdp.num_actions, 2u);
    EXPECT_EQ(p.mdp.episode_len, 1u);
    EXPECT_EQ(p.horizon, 40u);
    EXPECT_EQ(p.total_steps(), 40u);
    EXPECT_DOUBLE_EQ(p.query_cost, 0.5);
    EXPECT_DOUBLE_EQ(p.mdp.transition_row(0, 0)[0], 1.0);
    EXPECT_DOUBLE_EQ(p.mdp.transition_row(0, 1)[0], 1.0);
    EXPECT_FALSE(p.known_rewards);
}

TEST(Bandit, DeterministicArmNeverQueryingEarnsTrials) {
    const ArlProblem p = make_bandit({1.0}, 5, 0.5);
    Rng rng(1);
    Trace trace;
    StateIndex s = 0;
    for (std::size_t t = 0; t < p.total_steps(); ++t) {
        const auto out = step(p, s, {false, 0}, rng);
        trace.steps.push_back({t, t, s, {false, 0}, out});
        s = p.mdp.continuation(t, out.next_state);
    }
    EXPECT_DOUBLE_EQ(return_of(trace, p.query_cost), 5.0);
}

TEST(Bandit, IdenticalArmsGiveHalfPerTrial) {
    const ArlProblem p = make_bandit({0.5, 0.5}, 10, 0.5);
    EXPECT_DOUBLE_EQ(value_iteration(p.mdp, 10).value, 5.0);
}

TEST(Bandit, Errors) {
    EXPECT_THROW(make_bandit(std::vector<double>{}, 3, 0.5), std::invalid_argument);
    EXPECT_THROW(make_bandit({1.2}, 3, 0.5), std::invalid_argument);
    EXPECT_THROW(make_bandit({-0.1, 0.5}, 3, 0.5), std::invalid_argument);
    EXPECT_THROW(make_bandit({0.5}, 0, 0.5), std::invalid_argument);
}

TEST(LateFork, ThreeStatesForTwoForcedSteps) {
    const ArlProblem p = make_late_fork(2, 0.5, 10, false);
    EXPECT_EQ(p.mdp.num_states, 3u);
    EXPECT_EQ(p.mdp.episode_len, 3u);
    EXPECT_EQ(p.mdp.available_actions[0].size(), 1u);
    EXPECT_EQ(p.mdp.available_actions[1].size(), 1u);
    EXPECT_EQ(p.mdp.available_actions[2].size(), 2u);
}

TEST(LateFork, SmallestInstanceReachesForkOnSecondStep) {
    const ArlProblem p = make_late_fork(1, 0.5, 4, false);
    EXPECT_EQ(p.mdp.num_states, 2u);
    Rng rng(3);
    const auto out = step(p, 0, {false, 0}, rng);
    EXPECT_EQ(out.next_state, 1u);
    EXPECT_EQ(p.mdp.available_actions[1].size(), 2u);
}

TEST(LateFork, Late4_30) {
    const ArlProblem p = make_late_fork(4, 0.5, 30, false);
    EXPECT_EQ(p.mdp.num_states, 5u);
    EXPECT_EQ(p.total_steps(), 150u);
    EXPECT_THROW(make_late_fork(0, 0.5, 30, false), std::invalid_argument);
}

TEST(LateFork, ExactlyOneChoiceStatePerEpisode) {
    for (std::size_t n = 1; n <= 6; ++n) {
        const ArlProblem p = make_late_fork(n, 0.5, 2, false);
        std::size_t forks = 0;
        for (const auto& acts : p.mdp.available_actions) forks += acts.size() == 2;
        EXPECT_EQ(forks, 1u);
        EXPECT_EQ(p.mdp.available_actions[n].size(), 2u);
    }
}

TEST(EarlyFork, TenStatesForN5) {
    const ArlProblem p = make_early_fork(5, 0.5, 50, false);
    EXPECT_EQ(p.mdp.num_states, 10u);
    EXPECT_EQ(p.mdp.episode_len, 5u);
    EXPECT_EQ(p.total_steps(), 250u);
    for (StateIndex s = 1; s < p.mdp.num_states; ++s) EXPECT_EQ(p.mdp.available_actions[s].size(), 1u);
    EXPECT_EQ(p.mdp.available_actions[0].size(), 2u);
}

TEST(EarlyFork, SmallestInstance) {
    const ArlProblem p = make_early_fork(2, 0.5, 1, false);
    EXPECT_EQ(p.mdp.num_states, 4u);
    Rng rng(5);
    // fork -> branch 1's single chain state -> terminal
    const auto a = step(p, 0, {false, 1}, rng);
    EXPECT_EQ(a.next_state, 2u);
    const auto b = step(p, 2, {false, 0}, rng);
    EXPECT_EQ(b.next_state, 3u);
    EXPECT_TRUE(p.mdp.ends_episode(1));
    EXPECT_THROW(make_early_fork(1, 0.5, 1, false), std::invalid_argument);
}

TEST(EarlyFork, EpisodeVisitsFiveStates) {
    const ArlProblem p = make_early_fork(5, 0.5, 3, false);
    Rng rng(9);
    StateIndex s = p.mdp.initial_state;
    for (std::size_t t = 0; t < p.total_steps(); ++t) {
        if (t % 5 == 0) EXPECT_EQ(s, 0u);
        const auto out = step(p, s, {false, p.mdp.available_actions[s][0]}, rng);
        s = p.mdp.continuation(t, out.next_state);
    }
}

TEST(DoubleLoop, Shape) {
    const TabularMdp m = make_double_loop(4);
    EXPECT_EQ(m.num_states, 9u);
    EXPECT_EQ(m.episode_len, 5u);
    EXPECT_DOUBLE_EQ(m.max_reward(), 2.0);
    EXPECT_THROW(make_double_loop(1), std::invalid_argument);
    const TabularMdp big = make_double_loop(10);
    EXPECT_EQ(big.num_states, 21u);
    const ArlProblem p = make_double_loop_problem(4, 10);
    EXPECT_TRUE(p.known_rewards);
    EXPECT_FALSE(p.known_transitions);
}

TEST(DoubleLoop, L2OptimalCircuitEarnsTwo) {
    const TabularMdp m = make_double_loop(2);
    EXPECT_EQ(m.num_states, 5u);
    EXPECT_DOUBLE_EQ(value_iteration(m, m.episode_len).value, 2.0);
    EXPECT_DOUBLE_EQ(value_iteration(m, 4 * m.episode_len).value, 8.0);
}

TEST(RandomMdp, RowsAndRewardsValid) {
    Rng rng(42);
    const TabularMdp m = sample_random_mdp(5, 3, 0.5, 0.2, rng);
    EXPECT_NO_THROW(m.validate());
    EXPECT_EQ(m.num_states, 5u);
    EXPECT_EQ(m.num_actions, 3u);
    for (const auto& acts : m.available_actions) EXPECT_EQ(acts.size(), 3u);
}

TEST(RandomMdp, SameSeedSameMdp) {
    Rng a(42);
    Rng b(42);
    EXPECT_EQ(sample_random_mdp(5, 3, 0.5, 0.2, a), sample_random_mdp(5, 3, 0.5, 0.2, b));
}

TEST(RandomMdp, HugeConcentrationIsNearlyUniform) {
    Rng rng(11);
    const TabularMdp m = sample_random_mdp(4, 2, 0.5, 1e6, rng);
    for (double p : m.transition) EXPECT_NEAR(p, 0.25, 0.01);
}

TEST(RandomMdp, Errors) {
    Rng rng(1);
    EXPECT_THROW(sample_random_mdp(5, 3, 0.0, 0.2, rng), std::invalid_argument);
    EXPECT_THROW(sample_random_mdp(5, 3, 0.5, -1.0, rng), std::invalid_argument);
}

TEST(Step, QueryRevealsReward) {
    const ArlProblem p = make_bandit({1.0}, 1, 0.5);
    Rng rng(2);
    const auto out = step(p, 0, {true, 0}, rng);
    ASSERT_TRUE(out.observed_reward.has_value());
    EXPECT_DOUBLE_EQ(*out.observed_reward, 1.0);
    EXPECT_DOUBLE_EQ(out.true_reward, 1.0);
}

TEST(Step, UnqueriedRewardIsNull) {
    const ArlProblem p = make_bandit({0.3, 0.9}, 1, 0.5);
    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        const auto out = step(p, 0, {false, static_cast<ActionIndex>(k % 2)}, rng);
        EXPECT_FALSE(out.observed_reward.has_value());
    }
}

TEST(Step, QueriedObservationMatchesTruth) {
    const ArlProblem p = make_bandit({0.3, 0.9}, 1, 0.5);
    Rng rng(4);
    for (int k = 0; k < 200; ++k) {
        const auto out = step(p, 0, {true, static_cast<ActionIndex>(k % 2)}, rng);
        ASSERT_TRUE(out.observed_reward.has_value());
        EXPECT_EQ(*out.observed_reward, out.true_reward);
    }
}

TEST(Step, LateForkChainIsDeterministic) {
    const ArlProblem p = make_late_fork(3, 0.5, 1, false);
    Rng rng(8);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(step(p, 0, {false, 0}, rng).next_state, 1u);
}

TEST(Step, UnavailableActionThrows) {
    const ArlProblem p = make_late_fork(2, 0.5, 1, false);
    Rng rng(1);
    EXPECT_THROW(step(p, 0, {false, 1}, rng), std::invalid_argument);
}

TEST(Step, BernoulliConcentration) {
    const ArlProblem p = make_bandit({0.37}, 1, 0.5);
    Rng rng(2024);
    const int n = 10000;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += step(p, 0, {false, 0}, rng).true_reward;
    EXPECT_LE(std::abs(sum / n - 0.37), 4.0 * std::sqrt(0.25 / n));
}

TEST(ReturnOf, EmptyTrace) { EXPECT_EQ(return_of(Trace{}, 0.5), 0.0); }

TEST(ReturnOf, HandArithmetic) {
    Trace tr;
    const double rewards[] = {1, 0, 1};
    const bool queries[] = {true, false, false};
    for (std::size_t t = 0; t < 3; ++t) {
        StepOutcome out;
        out.true_reward = rewards[t];
        if (queries[t]) out.observed_reward = rewards[t];
        tr.steps.push_back({t, t, 0, {queries[t], 0}, out});
    }
    EXPECT_EQ(return_of(tr, 0.5), 1.5);
}

TEST(ReturnOf, NeverQueryingBestArmAveragesItsMean) {
    const ArlProblem p = make_bandit({0.2, 0.8}, 40, 0.5);
    Rng rng(6);
    double total = 0.0;
    const int runs = 2000;
    for (int r = 0; r < runs; ++r) {
        Trace tr;
        for (std::size_t t = 0; t < 40; ++t) tr.steps.push_back({t, t, 0, {false, 1}, step(p, 0, {false, 1}, rng)});
        total += return_of(tr, 0.5);
    }
    // SD of one run is sqrt(40 * 0.16) ~ 2.53
    EXPECT_NEAR(total / runs, 32.0, 4.0 * 2.53 / std::sqrt(runs));
}

TEST(ReturnOf, ArithmeticIdentityIsExact) {
    const ArlProblem p = make_late_fork(2, 0.5, 20, false);
    Rng rng(77);
    Trace tr;
    StateIndex s = 0;
    for (std::size_t t = 0; t < p.total_steps(); ++t) {
        const auto& acts = p.mdp.available_actions[s];
        const ActionPair act{uniform01(rng) < 0.4, acts[uniform_index(rng, acts.size())]};
        const auto out = step(p, s, act, rng);
        tr.steps.push_back({t, t / 3, s, act, out});
        s = p.mdp.continuation(t, out.next_state);
    }
    double truth = 0.0;
    for (const auto& st : tr.steps) truth += st.outcome.true_reward;
    // Rewards and costs are dyadic here, so the identity holds bit for bit.
    EXPECT_EQ(return_of(tr, 0.5) + 0.5 * static_cast<double>(tr.query_count()), truth);
}

TEST(Constructors, Pure) {
    EXPECT_EQ(make_late_fork(3, 0.5, 7, true), make_late_fork(3, 0.5, 7, true));
    EXPECT_EQ(make_early_fork(4, 0.5, 7, false), make_early_fork(4, 0.5, 7, false));
    EXPECT_EQ(make_double_loop(5), make_double_loop(5));
}

TEST(Seeds, DeriveIsStableAndLabelSensitive) {
    EXPECT_EQ(derive_seed(1, "env"), derive_seed(1, "env"));
    EXPECT_NE(derive_seed(1, "env"), derive_seed(1, "agent"));
    EXPECT_NE(derive_seed(1, "env", 0), derive_seed(1, "env", 1));
    // Reference values of the published splitmix64 finalizer.
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(fnv1a64(""), 0xCBF29CE484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
}
