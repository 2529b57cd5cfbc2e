#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "wolb/equilibria.hpp"
#include "wolb/errors.hpp"
#include "wolb/sim.hpp"

namespace wolb::ga {

using Rng = std::mt19937_64;

/// Daily release quantities u(1..T). For p > 1 each block of p days holds at
/// most one nonzero gene, at the position recorded in `offsets`.
struct ReleasePlan {
    std::vector<std::int64_t> genes;
    std::vector<int> offsets;  ///< per block, position of the release day (p > 1 only)
    int horizon_t = 0;
    int block_p = 1;

    int blocks() const { return horizon_t / block_p; }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto g : genes) s += g;
        return s;
    }

    std::size_t release_count() const {
        return static_cast<std::size_t>(
            std::count_if(genes.begin(), genes.end(), [](std::int64_t g) { return g > 0; }));
    }

    /// Bounds and block structure.
    bool valid(double cap_l) const {
        if (block_p < 1 || horizon_t < 1 || horizon_t % block_p != 0) return false;
        if (genes.size() != static_cast<std::size_t>(horizon_t)) return false;
        const double hi = block_p * cap_l;
        for (auto g : genes)
            if (g < 0 || static_cast<double>(g) > hi) return false;
        if (block_p == 1) return offsets.empty();
        if (offsets.size() != static_cast<std::size_t>(blocks())) return false;
        for (int b = 0; b < blocks(); ++b) {
            if (offsets[b] < 0 || offsets[b] >= block_p) return false;
            for (int k = 0; k < block_p; ++k)
                if (k != offsets[b] && genes[b * block_p + k] != 0) return false;
        }
        return true;
    }

    /// Releases as a schedule (nonzero genes only).
    ImpulseSchedule to_schedule() const {
        ImpulseSchedule s;
        s.period_m = block_p;
        s.rule = RuleTag::ga;
        for (int t = 1; t <= horizon_t; ++t)
            if (genes[t - 1] > 0) s.entries.push_back({static_cast<double>(t), genes[t - 1]});
        return s;
    }

    friend bool operator==(const ReleasePlan&, const ReleasePlan&) = default;
};

struct GAConfig {
    int pop_n = 100;
    int generations_g = 100;
    int elite_m = 1;
    double cap_l = 750;
    int block_p = 1;
    double mutation_rate = 0.05;
    std::uint64_t rng_seed = 1;
    unsigned threads = 1;             ///< fitness evaluation workers
    bool relocation_mutation = false;  ///< also move the release day within mutated blocks

    void validate() const {
        if (pop_n < 1) throw DomainError("population size must be positive");
        if (elite_m < 0 || (pop_n > 1 && elite_m >= pop_n))
            throw DomainError("elite size must be below the population size");
        if (generations_g < 0) throw DomainError("generation count must be nonnegative");
        if (!(cap_l > 0)) throw DomainError("capacity L must be positive");
        if (block_p < 1) throw DomainError("block period must be at least 1");
        if (!(mutation_rate >= 0 && mutation_rate <= 1)) throw DomainError("mutation rate must lie in [0,1]");
    }
};

/// Everything fitness needs besides the plan.
struct FitnessContext {
    StrainParams params;
    SecureRegion target;
    double initial_x = 0;
    SimOptions sim;
    double cap_l = 750;
};

inline FitnessContext make_context(const StrainParams& p, double cap_l,
                                   std::optional<double> initial_x = std::nullopt) {
    FitnessContext c;
    c.params = p;
    c.target = secure_region(equilibria(p));
    c.initial_x = initial_x.value_or(wild_carrying_level(p));
    c.cap_l = cap_l;
    return c;
}

struct FitnessReport {
    double j_value = 0;
    bool feasible = false;
    double fitness_f = 0;
    std::optional<double> entry_time;
    State final_state;
    bool simulated = false;  ///< false when the simulation failed
};

/// State at t = T after applying gene t as a jump at day t, u = 0 in between.
inline State final_state(const ReleasePlan& plan, const FitnessContext& ctx) {
    State s{ctx.initial_x, 0.0};
    for (int t = 1; t <= plan.horizon_t; ++t) {
        s = propagate(ctx.params, s, t - 1, t, ctx.sim);
        s.y += static_cast<double>(plan.genes[t - 1]);
    }
    return s;
}

/// F = 1 / (J + p L T I), I = 0 iff x(T) < x_u and y(T) > y_u.
inline FitnessReport fitness(const ReleasePlan& plan, const FitnessContext& ctx,
                             bool with_entry_time = false) {
    FitnessReport r;
    r.j_value = static_cast<double>(plan.total());
    try {
        r.final_state = final_state(plan, ctx);
        r.simulated = true;
    } catch (const std::exception&) {
        return r;
    }
    r.feasible = ctx.target.contains(r.final_state);
    const double penalty = plan.block_p * ctx.cap_l * plan.horizon_t;
    const double den = r.j_value + (r.feasible ? 0.0 : penalty);
    r.fitness_f = den > 0 ? 1.0 / den : std::numeric_limits<double>::infinity();
    if (with_entry_time) {
        SimOptions so = ctx.sim;
        so.t_end = plan.horizon_t;
        const auto tr = simulate_impulsive(ctx.params, {ctx.initial_x, 0.0}, plan.to_schedule(), so);
        r.entry_time = first_basin_entry(tr, ctx.target);
    }
    return r;
}

struct Individual {
    ReleasePlan plan;
    FitnessReport report;
};

using Population = std::vector<Individual>;

namespace detail {

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline std::int64_t gene_cap(const GAConfig& cfg, int p) {
    return static_cast<std::int64_t>(std::floor(p * cfg.cap_l));
}

inline void require_horizon(int horizon_t, int p) {
    if (horizon_t < p || horizon_t % p != 0)
        throw DomainError("horizon must be a positive multiple of the block period");
}

}  // namespace detail

inline ReleasePlan random_plan(const GAConfig& cfg, int horizon_t, Rng& rng) {
    detail::require_horizon(horizon_t, cfg.block_p);
    ReleasePlan r;
    r.horizon_t = horizon_t;
    r.block_p = cfg.block_p;
    r.genes.assign(horizon_t, 0);
    const std::int64_t hi = detail::gene_cap(cfg, cfg.block_p);
    if (cfg.block_p == 1) {
        for (auto& g : r.genes) g = detail::uniform_int(rng, 0, hi);
        return r;
    }
    r.offsets.resize(r.blocks());
    for (int b = 0; b < r.blocks(); ++b) {
        r.offsets[b] = static_cast<int>(detail::uniform_int(rng, 0, cfg.block_p - 1));
        r.genes[b * cfg.block_p + r.offsets[b]] = detail::uniform_int(rng, 0, hi);
    }
    return r;
}

inline std::vector<ReleasePlan> init_population(const GAConfig& cfg, int horizon_t, Rng& rng) {
    std::vector<ReleasePlan> out;
    out.reserve(cfg.pop_n);
    for (int i = 0; i < cfg.pop_n; ++i) out.push_back(random_plan(cfg, horizon_t, rng));
    return out;
}

/// Binary tournament; ties go to the first draw.
inline const Individual& tournament_select(const Population& pop, Rng& rng) {
    if (pop.empty()) throw DomainError("tournament on an empty population");
    const auto n = static_cast<std::int64_t>(pop.size());
    const auto r = detail::uniform_int(rng, 0, n - 1);
    const auto s = detail::uniform_int(rng, 0, n - 1);
    return pop[r].report.fitness_f >= pop[s].report.fitness_f ? pop[r] : pop[s];
}

/// Two-point crossover exchanging genes r1+1 .. r2 (1-based), i.e. the
/// half-open index range [r1, r2). Cut points are multiples of p.
inline std::pair<ReleasePlan, ReleasePlan> crossover_at(const ReleasePlan& a, const ReleasePlan& b,
                                                        int r1, int r2) {
    if (a.horizon_t != b.horizon_t || a.block_p != b.block_p)
        throw DomainError("crossover parents differ in horizon or period");
    const int p = a.block_p;
    if (r1 < 0 || r2 > a.horizon_t || r1 >= r2 || r1 % p != 0 || r2 % p != 0)
        throw DomainError("crossover points must satisfy 0 <= r1 < r2 <= T, multiples of p");
    ReleasePlan c = a, d = b;
    for (int i = r1; i < r2; ++i) std::swap(c.genes[i], d.genes[i]);
    if (p > 1)
        for (int k = r1 / p; k < r2 / p; ++k) std::swap(c.offsets[k], d.offsets[k]);
    return {std::move(c), std::move(d)};
}

inline std::pair<ReleasePlan, ReleasePlan> crossover(const ReleasePlan& a, const ReleasePlan& b, Rng& rng) {
    const int blocks = a.blocks();
    const auto c1 = static_cast<int>(detail::uniform_int(rng, 0, blocks - 1));
    const auto c2 = static_cast<int>(detail::uniform_int(rng, c1 + 1, blocks));
    return crossover_at(a, b, c1 * a.block_p, c2 * a.block_p);
}

namespace detail {

// Reassigns genes r3..r4 (p = 1) or the release of blocks r3..r4 (p > 1);
// both ranges are 1-based with r3 in [1, n-1] and r4 in [r3, n].
inline void mutate_in_place(ReleasePlan& plan, const GAConfig& cfg, Rng& rng) {
    const int p = plan.block_p;
    const int n = plan.blocks();
    const int r3 = static_cast<int>(uniform_int(rng, 1, std::max(n - 1, 1)));
    const int r4 = static_cast<int>(uniform_int(rng, r3, n));
    const std::int64_t hi = gene_cap(cfg, p);
    for (int k = r3 - 1; k < r4; ++k) {
        if (p == 1) {
            plan.genes[k] = uniform_int(rng, 0, hi);
            continue;
        }
        const std::int64_t value = uniform_int(rng, 0, hi);
        plan.genes[k * p + plan.offsets[k]] = 0;
        if (cfg.relocation_mutation) plan.offsets[k] = static_cast<int>(uniform_int(rng, 0, p - 1));
        plan.genes[k * p + plan.offsets[k]] = value;
    }
}

inline bool maybe_mutate(ReleasePlan& plan, const GAConfig& cfg, Rng& rng) {
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= cfg.mutation_rate) return false;
    mutate_in_place(plan, cfg, rng);
    return true;
}

}  // namespace detail

/// With probability mutation_rate, reassigns a random run of genes (p = 1) or
/// the releases of a random run of blocks (p > 1); otherwise a copy.
inline ReleasePlan mutate(const ReleasePlan& plan, const GAConfig& cfg, Rng& rng) {
    ReleasePlan out = plan;
    detail::maybe_mutate(out, cfg, rng);
    return out;
}

/// Evaluates every individual; results do not depend on the thread count.
inline void evaluate(std::vector<Individual>& items, const FitnessContext& ctx, unsigned threads) {
    const std::size_t n = items.size();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads <= 1) {
        for (auto& it : items) it.report = fitness(it.plan, ctx);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) items[i].report = fitness(items[i].plan, ctx);
        });
    for (auto& th : pool) th.join();
}

struct PopulationState {
    Population pop;
    std::vector<Individual> elite;  ///< best elite_m individuals
    int generation = 0;
    Rng rng;
};

namespace detail {

inline void sort_and_truncate(Population& pop, std::size_t n) {
    std::stable_sort(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
        return a.report.fitness_f > b.report.fitness_f;
    });
    if (pop.size() > n) pop.resize(n);
}

inline void store_elite(PopulationState& st, int m) {
    st.elite.assign(st.pop.begin(), st.pop.begin() + std::min<std::size_t>(std::max(m, 1), st.pop.size()));
}

}  // namespace detail

inline PopulationState initial_state(const GAConfig& cfg, int horizon_t, const FitnessContext& ctx) {
    cfg.validate();
    PopulationState st;
    st.rng.seed(cfg.rng_seed);
    for (auto& plan : init_population(cfg, horizon_t, st.rng)) st.pop.push_back({std::move(plan), {}});
    evaluate(st.pop, ctx, cfg.threads);
    detail::sort_and_truncate(st.pop, st.pop.size());
    detail::store_elite(st, cfg.elite_m);
    return st;
}

/// One generation: N tournament picks paired for crossover, mutation applied
/// to parents and offspring, then the N best of the union survive.
inline void evolve(PopulationState& st, const GAConfig& cfg, const FitnessContext& ctx) {
    const std::size_t n = st.pop.size();
    std::vector<const Individual*> selected;
    selected.reserve(n);
    for (std::size_t k = 0; k < n; ++k) selected.push_back(&tournament_select(st.pop, st.rng));

    std::vector<Individual> fresh;
    for (std::size_t k = 0; k < n; k += 2) {
        const auto& a = selected[k]->plan;
        const auto& b = (k + 1 < n ? selected[k + 1] : selected[0])->plan;
        auto [c, d] = crossover(a, b, st.rng);
        fresh.push_back({std::move(c), {}});
        fresh.push_back({std::move(d), {}});
    }
    const std::size_t offspring = fresh.size();
    for (std::size_t i = 0; i < n + offspring; ++i) {
        ReleasePlan m = i < n ? st.pop[i].plan : fresh[i - n].plan;
        if (detail::maybe_mutate(m, cfg, st.rng)) fresh.push_back({std::move(m), {}});
    }
    evaluate(fresh, ctx, cfg.threads);
    for (auto& f : fresh) st.pop.push_back(std::move(f));
    detail::sort_and_truncate(st.pop, n);
    detail::store_elite(st, cfg.elite_m);
    ++st.generation;
}

struct HistoryRow {
    int generation = 0;
    double best_fitness = 0;
    double best_j = 0;
    std::size_t feasible_count = 0;
};

inline HistoryRow summarize(const PopulationState& st) {
    HistoryRow h;
    h.generation = st.generation;
    h.best_fitness = st.elite.front().report.fitness_f;
    h.best_j = st.elite.front().report.j_value;
    h.feasible_count = static_cast<std::size_t>(std::count_if(
        st.pop.begin(), st.pop.end(), [](const Individual& i) { return i.report.feasible; }));
    return h;
}

struct GAResult {
    Individual best;
    std::vector<HistoryRow> history;
};

inline GAResult run_ga(const GAConfig& cfg, int horizon_t, const FitnessContext& ctx) {
    detail::require_horizon(horizon_t, cfg.block_p);
    auto st = initial_state(cfg, horizon_t, ctx);
    GAResult res;
    res.history.push_back(summarize(st));
    for (int g = 0; g < cfg.generations_g; ++g) {
        evolve(st, cfg, ctx);
        res.history.push_back(summarize(st));
    }
    res.best = st.elite.front();
    return res;
}

struct EpsilonLoopConfig {
    int epsilon_0 = 14;  ///< initial horizon, multiple of p
    int step = 1;        ///< reduction per round, multiple of p
    int max_rounds = 200;
    int restarts_per_epsilon = 3;
};

/// One period beyond the impulsive daily count, rounded up to a multiple of p,
/// so that the first round starts from a comfortably feasible horizon.
inline int default_epsilon(int daily_count, int p) { return (daily_count + 2 * p - 1) / p * p; }

struct EpsilonRound {
    int horizon = 0;
    bool feasible = false;
    double best_j = 0;
    std::size_t releases = 0;
};

struct EpsilonResult {
    bool feasible = false;
    int horizon = 0;                  ///< smallest feasible horizon T*_p
    Individual best;                  ///< plan found at that horizon
    std::vector<HistoryRow> history;  ///< of the run that produced `best`
    std::vector<EpsilonRound> rounds;
};

/// Seed of restart r in round k, spread with a SplitMix64 step.
inline std::uint64_t derived_seed(std::uint64_t base, int round, int restart) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(round) * 1024u +
                                                     static_cast<std::uint64_t>(restart) + 1u);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Shrinks the horizon bound by `step` for as long as the GA still finds a
/// feasible plan, keeping the best plan of the last feasible horizon.
inline EpsilonResult epsilon_loop(const EpsilonLoopConfig& ec, const GAConfig& cfg,
                                  const FitnessContext& ctx) {
    const int p = cfg.block_p;
    if (ec.epsilon_0 % p != 0 || ec.step % p != 0 || ec.step <= 0)
        throw DomainError("epsilon_0 and step must be positive multiples of p");
    EpsilonResult out;
    int eps = ec.epsilon_0;
    for (int round = 0; round < ec.max_rounds && eps >= p; ++round, eps -= ec.step) {
        std::optional<GAResult> best;
        for (int r = 0; r < std::max(ec.restarts_per_epsilon, 1); ++r) {
            GAConfig c = cfg;
            c.rng_seed = derived_seed(cfg.rng_seed, round, r);
            auto res = run_ga(c, eps, ctx);
            if (!res.best.report.feasible) continue;
            if (!best || res.best.report.j_value < best->best.report.j_value) best = std::move(res);
        }
        EpsilonRound row;
        row.horizon = eps;
        row.feasible = best.has_value();
        if (best) {
            row.best_j = best->best.report.j_value;
            row.releases = best->best.plan.release_count();
        }
        out.rounds.push_back(row);
        if (!best) break;
        out.feasible = true;
        out.horizon = eps;
        out.best = std::move(best->best);
        out.history = std::move(best->history);
    }
    if (out.feasible) out.best.report = fitness(out.best.plan, ctx, true);
    return out;
}

}  // namespace wolb::ga
