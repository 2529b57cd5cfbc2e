#include <gtest/gtest.h>

#include <map>

#include "oracles.hpp"
#include "wolb/ga.hpp"

using namespace wolb;
using namespace wolb::ga;

namespace {

GAConfig small_config(int p = 1) {
    GAConfig c;
    c.pop_n = 20;
    c.generations_g = 10;
    c.block_p = p;
    c.cap_l = 750;
    return c;
}

ReleasePlan plan_of(std::vector<std::int64_t> genes) {
    ReleasePlan r;
    r.horizon_t = static_cast<int>(genes.size());
    r.genes = std::move(genes);
    return r;
}

}  // namespace

TEST(Plan, ValidityRules) {
    auto r = plan_of({0, 750, 10});
    EXPECT_TRUE(r.valid(750));
    r.genes[0] = 751;
    EXPECT_FALSE(r.valid(750));
    r.genes[0] = -1;
    EXPECT_FALSE(r.valid(750));

    ReleasePlan b;
    b.horizon_t = 14;
    b.block_p = 7;
    b.genes.assign(14, 0);
    b.offsets = {2, 6};
    b.genes[2] = 5250;
    b.genes[13] = 100;
    EXPECT_TRUE(b.valid(750));
    b.genes[3] = 1;
    EXPECT_FALSE(b.valid(750));
    b.genes[3] = 0;
    b.genes[2] = 5251;
    EXPECT_FALSE(b.valid(750));
}

TEST(Plan, ScheduleHasNonzeroGenesOnly) {
    const auto s = plan_of({0, 5, 0, 7}).to_schedule();
    ASSERT_EQ(s.entries.size(), 2u);
    EXPECT_DOUBLE_EQ(s.entries[0].time, 2);
    EXPECT_EQ(s.entries[1].size, 7);
    EXPECT_EQ(s.rule, RuleTag::ga);
}

TEST(Init, BoundsAndBlockStructure) {
    for (int p : {1, 7, 14}) {
        auto cfg = small_config(p);
        Rng rng(3);
        for (const auto& r : init_population(cfg, 28, rng)) {
            EXPECT_TRUE(r.valid(cfg.cap_l));
            EXPECT_LE(r.release_count(), static_cast<std::size_t>(28 / p));
        }
    }
    Rng rng(1);
    EXPECT_THROW(random_plan(small_config(7), 10, rng), DomainError);
}

TEST(Init, OffsetsUniformWithinBlock) {
    auto cfg = small_config(7);
    Rng rng(11);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[random_plan(cfg, 7, rng).offsets[0]];
    for (int h : hits) EXPECT_NEAR(h, 1000, 150);
}

TEST(Init, Deterministic) {
    auto cfg = small_config();
    Rng a(42), b(42);
    EXPECT_EQ(init_population(cfg, 14, a), init_population(cfg, 14, b));
}

TEST(Tournament, SingletonPopulation) {
    Population pop{{plan_of({1}), {}}};
    Rng rng(1);
    EXPECT_EQ(&tournament_select(pop, rng), &pop[0]);
    EXPECT_THROW(tournament_select(Population{}, rng), DomainError);
}

// With distinct fitnesses ranked k = 0 (best) .. n-1, a binary tournament with
// replacement picks rank k with probability (2(n-k) - 1) / n^2.
TEST(Tournament, SelectionFrequencies) {
    const int n = 5;
    Population pop;
    for (int k = 0; k < n; ++k) {
        Individual i{plan_of({k}), {}};
        i.report.fitness_f = 1.0 / (k + 1);
        pop.push_back(i);
    }
    Rng rng(2024);
    std::map<const Individual*, int> hits;
    const int draws = 200000;
    for (int i = 0; i < draws; ++i) ++hits[&tournament_select(pop, rng)];
    for (int k = 0; k < n; ++k) {
        const double expect = (2.0 * (n - k) - 1) / (n * n);
        EXPECT_NEAR(hits[&pop[k]] / static_cast<double>(draws), expect, 0.005) << "rank " << k;
    }
}

TEST(Tournament, TieGoesToFirstDraw) {
    Population pop{{plan_of({1}), {}}, {plan_of({2}), {}}};
    pop[0].report.fitness_f = pop[1].report.fitness_f = 0.5;
    Rng probe(9), rng(9);
    const auto r = std::uniform_int_distribution<std::int64_t>(0, 1)(probe);
    EXPECT_EQ(&tournament_select(pop, rng), &pop[r]);
}

TEST(Crossover, SwapsMiddleSegment) {
    const auto a = plan_of({1, 2, 3, 4, 5, 6, 7});
    const auto b = plan_of({10, 20, 30, 40, 50, 60, 70});
    const auto [c, d] = crossover_at(a, b, 2, 5);
    EXPECT_EQ(c.genes, (std::vector<std::int64_t>{1, 2, 30, 40, 50, 6, 7}));
    EXPECT_EQ(d.genes, (std::vector<std::int64_t>{10, 20, 3, 4, 5, 60, 70}));
}

TEST(Crossover, IdenticalParentsUnchanged) {
    const auto a = plan_of({1, 2, 3, 4});
    const auto [c, d] = crossover_at(a, a, 0, 4);
    EXPECT_EQ(c, a);
    EXPECT_EQ(d, a);
}

TEST(Crossover, InvalidCutsRejected) {
    const auto a = plan_of({1, 2, 3, 4});
    EXPECT_THROW(crossover_at(a, a, 2, 2), DomainError);
    EXPECT_THROW(crossover_at(a, a, 0, 5), DomainError);
    EXPECT_THROW(crossover_at(a, plan_of({1, 2}), 0, 1), DomainError);
}

TEST(Crossover, PreservesPositionalMultiset) {
    for (int p : {1, 7}) {
        auto cfg = small_config(p);
        Rng rng(5);
        for (int i = 0; i < 200; ++i) {
            const auto a = random_plan(cfg, 28, rng), b = random_plan(cfg, 28, rng);
            const auto [c, d] = crossover(a, b, rng);
            for (int t = 0; t < 28; ++t) {
                std::multiset<std::int64_t> before{a.genes[t], b.genes[t]}, after{c.genes[t], d.genes[t]};
                EXPECT_EQ(before, after);
            }
            EXPECT_TRUE(c.valid(cfg.cap_l));
            EXPECT_TRUE(d.valid(cfg.cap_l));
        }
    }
}

TEST(Mutation, ZeroRateIsIdentity) {
    auto cfg = small_config();
    cfg.mutation_rate = 0;
    Rng rng(8);
    const auto a = random_plan(cfg, 14, rng);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(mutate(a, cfg, rng), a);
}

TEST(Mutation, BlockReleaseStaysInPlaceWithoutRelocation) {
    auto cfg = small_config(14);
    cfg.mutation_rate = 1;
    Rng rng(21);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_plan(cfg, 28, rng);
        const auto b = mutate(a, cfg, rng);
        EXPECT_EQ(a.offsets, b.offsets);
        EXPECT_TRUE(b.valid(cfg.cap_l));
    }
}

TEST(Mutation, RelocationMovesReleaseDay) {
    auto cfg = small_config(14);
    cfg.mutation_rate = 1;
    cfg.relocation_mutation = true;
    Rng rng(22);
    int moved = 0;
    for (int i = 0; i < 200; ++i) {
        const auto a = random_plan(cfg, 14, rng);
        const auto b = mutate(a, cfg, rng);
        moved += a.offsets != b.offsets;
        EXPECT_TRUE(b.valid(cfg.cap_l));
    }
    EXPECT_GT(moved, 150);
}

TEST(Operators, InvariantsOverRandomApplications) {
    Rng rng(77);
    for (int p : {1, 7, 14}) {
        auto cfg = small_config(p);
        cfg.mutation_rate = 0.5;
        cfg.relocation_mutation = p == 7;
        auto a = random_plan(cfg, 42, rng), b = random_plan(cfg, 42, rng);
        for (int i = 0; i < 1000; ++i) {
            if (i % 2 == 0) {
                std::tie(a, b) = crossover(a, b, rng);
            } else {
                a = mutate(a, cfg, rng);
                b = mutate(b, cfg, rng);
            }
            ASSERT_TRUE(a.valid(cfg.cap_l));
            ASSERT_TRUE(b.valid(cfg.cap_l));
        }
    }
}

TEST(Fitness, Arithmetic) {
    const auto ctx = make_context(presets::wmel(), 750);
    const auto all_zero = plan_of(std::vector<std::int64_t>(14, 0));
    const auto r = fitness(all_zero, ctx);
    EXPECT_FALSE(r.feasible);
    EXPECT_DOUBLE_EQ(r.fitness_f, 1.0 / (0 + 1 * 750 * 14));

    const auto full = plan_of(std::vector<std::int64_t>(14, 750));
    const auto f = fitness(full, ctx, true);
    EXPECT_TRUE(f.feasible);
    EXPECT_DOUBLE_EQ(f.j_value, 750 * 14);
    EXPECT_DOUBLE_EQ(f.fitness_f, 1.0 / (750 * 14));
    ASSERT_TRUE(f.entry_time);
    EXPECT_LE(*f.entry_time, 14);
}

TEST(Fitness, FinalStateMatchesRk4) {
    const auto p = presets::wmel();
    const auto ctx = make_context(p, 750);
    const auto plan = plan_of({700, 0, 650, 300, 0, 750, 10});
    oracle::V2 z{wild_carrying_level(p), 0};
    for (int t = 1; t <= 7; ++t) {
        z = oracle::rk4(p, z, t - 1, t, 2000);
        z[1] += static_cast<double>(plan.genes[t - 1]);
    }
    const auto s = final_state(plan, ctx);
    EXPECT_NEAR(s.x, z[0], 1e-5 * z[0]);
    EXPECT_NEAR(s.y, z[1], 1e-5 * z[1]);
}

// Any feasible plan with J < pLT outranks every infeasible plan.
TEST(Fitness, PenaltyDominance) {
    auto cfg = small_config();
    const auto ctx = make_context(presets::wmel(), 750);
    Rng rng(4);
    double best_infeasible = 0, worst_feasible = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 300; ++i) {
        auto plan = random_plan(cfg, 15, rng);
        for (auto& g : plan.genes) g = std::min<std::int64_t>(750, g + 350);
        const auto r = fitness(plan, ctx);
        if (r.feasible && r.j_value < 750 * 15)
            worst_feasible = std::min(worst_feasible, r.fitness_f);
        else if (!r.feasible)
            best_infeasible = std::max(best_infeasible, r.fitness_f);
    }
    ASSERT_GT(best_infeasible, 0);
    ASSERT_TRUE(std::isfinite(worst_feasible));
    EXPECT_GT(worst_feasible, best_infeasible);
}

TEST(Run, ElitismAndPopulationSize) {
    auto cfg = small_config();
    cfg.generations_g = 30;
    const auto ctx = make_context(presets::wmel(), 750);
    auto st = initial_state(cfg, 16, ctx);
    double prev = summarize(st).best_fitness;
    for (int g = 0; g < cfg.generations_g; ++g) {
        evolve(st, cfg, ctx);
        EXPECT_EQ(st.pop.size(), static_cast<std::size_t>(cfg.pop_n));
        const double now = summarize(st).best_fitness;
        EXPECT_GE(now, prev);
        prev = now;
    }
}

TEST(Run, DeterministicAcrossThreadCounts) {
    auto cfg = small_config(7);
    cfg.generations_g = 15;
    const auto ctx = make_context(presets::wmel(), 750);
    cfg.threads = 1;
    const auto a = run_ga(cfg, 14, ctx);
    cfg.threads = 4;
    const auto b = run_ga(cfg, 14, ctx);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].best_fitness, b.history[i].best_fitness);
        EXPECT_EQ(a.history[i].feasible_count, b.history[i].feasible_count);
    }
    EXPECT_EQ(a.best.plan, b.best.plan);
}

TEST(Run, OneDayHorizonInfeasible) {
    const auto ctx = make_context(presets::wmel(), 750);
    const auto r = run_ga(small_config(), 1, ctx);
    EXPECT_FALSE(r.best.report.feasible);
}

TEST(Run, ConfigValidation) {
    auto cfg = small_config();
    cfg.elite_m = cfg.pop_n;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = small_config();
    cfg.mutation_rate = 1.5;
    EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(EpsilonLoop, ShrinksUntilInfeasible) {
    auto cfg = small_config(7);
    cfg.pop_n = 30;
    cfg.generations_g = 20;
    const auto ctx = make_context(presets::wmel(), 750);
    EpsilonLoopConfig ec{.epsilon_0 = 21, .step = 7, .max_rounds = 5, .restarts_per_epsilon = 1};
    const auto r = epsilon_loop(ec, cfg, ctx);
    ASSERT_TRUE(r.feasible);
    EXPECT_LE(r.horizon, 21);
    EXPECT_FALSE(r.rounds.back().feasible);
    EXPECT_TRUE(r.best.report.feasible);
    EXPECT_TRUE(r.best.plan.valid(750));
    ASSERT_TRUE(r.best.report.entry_time);
    EXPECT_THROW(epsilon_loop({.epsilon_0 = 20, .step = 7}, cfg, ctx), DomainError);
}

TEST(EpsilonLoop, DefaultHorizon) {
    EXPECT_EQ(default_epsilon(14, 1), 15);
    EXPECT_EQ(default_epsilon(14, 7), 21);
    EXPECT_EQ(default_epsilon(14, 14), 28);
    EXPECT_EQ(default_epsilon(64, 7), 77);
    EXPECT_NE(derived_seed(1, 0, 0), derived_seed(1, 0, 1));
    EXPECT_NE(derived_seed(1, 0, 0), derived_seed(1, 1, 0));
}
