#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "wolb/errors.hpp"
#include "wolb/ga.hpp"
#include "wolb/io.hpp"
#include "wolb/ocp.hpp"
#include "wolb/params.hpp"
#include "wolb/sim.hpp"

namespace wolb {

/// One run configuration: strain, initial state, capacity, frequency and the
/// per-stage options. Loaded from an INI file, then overridden by CLI flags.
struct Scenario {
    std::string strain = "wmel";
    std::vector<std::pair<std::string, std::string>> param_overrides;
    std::optional<double> initial_wild;  ///< default ln(Q_x)/sigma
    std::optional<double> cap_l;         ///< default per strain
    int frequency_p = 1;
    std::uint64_t seed = 1;
    std::string output_dir;

    ocp::OCPConfig ocp;
    ga::GAConfig ga;
    std::optional<int> epsilon_0;
    int restarts_per_epsilon = 3;
    SimOptions sim;

    StrainParams params() const {
        StrainParams p = preset_by_name(strain);
        for (const auto& [k, v] : param_overrides)
            if (!set_param(p, k, v)) throw ParseError("unknown parameter '" + k + "'");
        p.validate();
        return p;
    }

    double capacity() const { return cap_l.value_or(presets::default_capacity(strain)); }

    double x0() const { return initial_wild.value_or(wild_carrying_level(params())); }

    ocp::OCPConfig ocp_config() const {
        auto c = ocp;
        c.cap_l = capacity();
        c.initial_x = initial_wild;
        return c;
    }

    ga::GAConfig ga_config() const {
        auto c = ga;
        c.cap_l = capacity();
        c.block_p = frequency_p;
        c.rng_seed = seed;
        return c;
    }

    std::string resolved_output_dir() const {
        if (!output_dir.empty()) return output_dir;
        if (const char* env = std::getenv("WOLB_OUTPUT_DIR"); env && *env) return env;
        return "out";
    }

    /// Canonical description used for the config hash.
    nlohmann::json to_json() const {
        const auto p = params();
        nlohmann::json j;
        j["strain"] = strain;
        j["params"] = {{"rho_n", p.rho_n}, {"rho_w", p.rho_w}, {"delta_n", p.delta_n},
                       {"delta_w", p.delta_w}, {"sigma", p.sigma}, {"nu", p.nu},
                       {"eta", p.eta}, {"omega", p.omega}};
        j["initial_wild"] = x0();
        j["cap_l"] = capacity();
        j["frequency_p"] = frequency_p;
        j["seed"] = seed;
        j["ocp"] = {{"weight_p", ocp.weight_p}, {"grid_n", ocp.grid_n}, {"tol_bc", ocp.tol_bc},
                    {"tol_h", ocp.tol_h}, {"tol_costate", ocp.tol_costate},
                    {"max_outer_iterations", ocp.max_outer_iterations}, {"t_max", ocp.t_max}};
        j["ga"] = {{"pop_n", ga.pop_n}, {"generations_g", ga.generations_g}, {"elite_m", ga.elite_m},
                   {"mutation_rate", ga.mutation_rate}, {"relocation_mutation", ga.relocation_mutation},
                   {"restarts_per_epsilon", restarts_per_epsilon}};
        if (epsilon_0) j["ga"]["epsilon_0"] = *epsilon_0;
        j["sim"] = {{"rel_tol", sim.rel_tol}, {"abs_tol", sim.abs_tol}, {"t_end", sim.t_end},
                    {"dense_output_stride", sim.dense_output_stride}};
        return j;
    }

    std::string config_hash() const { return io::hex64(io::fnv1a(to_json().dump())); }
};

namespace detail {

template <class T>
T ini_get(const boost::property_tree::ptree& t, const std::string& key) {
    const auto raw = t.get<std::string>(key);
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (raw == "true" || raw == "1" || raw == "yes") return true;
            if (raw == "false" || raw == "0" || raw == "no") return false;
            throw ParseError("not a boolean: '" + raw + "'");
        } else if constexpr (std::is_integral_v<T>) {
            const double v = parse_decimal_or_rational(raw);
            if (v != static_cast<double>(static_cast<long long>(v))) throw ParseError("not an integer: '" + raw + "'");
            return static_cast<T>(v);
        } else {
            return static_cast<T>(parse_decimal_or_rational(raw));
        }
    } catch (const ParseError& e) {
        throw ParseError("config key '" + key + "': " + e.what());
    }
}

template <class T>
void ini_assign(const boost::property_tree::ptree& t, const std::string& key, T& out) {
    if (t.get_child_optional(key)) out = ini_get<T>(t, key);
}

template <class T>
void ini_assign(const boost::property_tree::ptree& t, const std::string& key, std::optional<T>& out) {
    if (t.get_child_optional(key)) out = ini_get<T>(t, key);
}

}  // namespace detail

/// Applies an INI document to `s`. Sections: [scenario], [params], [ocp],
/// [ga], [sim]. Unknown sections or keys are rejected.
inline void apply_ini(Scenario& s, std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
    const std::vector<std::pair<std::string, std::vector<std::string>>> known{
        {"scenario", {"strain", "initial_wild", "cap_l", "frequency", "seed", "output_dir"}},
        {"params", {"rho_n", "rho_w", "delta_n", "delta_w", "sigma", "nu", "eta", "omega"}},
        {"ocp", {"weight_p", "grid_n", "tol_bc", "tol_h", "tol_costate", "max_outer_iterations", "t_max",
                 "terminal_x"}},
        {"ga", {"pop_n", "generations", "elite_m", "mutation_rate", "threads", "relocation_mutation",
                "epsilon_0", "restarts_per_epsilon"}},
        {"sim", {"rel_tol", "abs_tol", "t_end", "dense_output_stride"}},
    };
    for (const auto& [section, body] : tree) {
        auto it = std::find_if(known.begin(), known.end(), [&](const auto& k) { return k.first == section; });
        if (it == known.end()) throw ParseError("unknown config section [" + section + "]");
        for (const auto& [key, _] : body)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ParseError("unknown config key '" + key + "' in [" + section + "]");
    }
    if (auto sc = tree.get_child_optional("scenario")) {
        if (sc->get_child_optional("strain")) s.strain = sc->get<std::string>("strain");
        if (sc->get_child_optional("output_dir")) s.output_dir = sc->get<std::string>("output_dir");
        detail::ini_assign(*sc, "initial_wild", s.initial_wild);
        detail::ini_assign(*sc, "cap_l", s.cap_l);
        detail::ini_assign(*sc, "frequency", s.frequency_p);
        detail::ini_assign(*sc, "seed", s.seed);
    }
    if (auto pr = tree.get_child_optional("params"))
        for (const auto& [key, v] : *pr) s.param_overrides.emplace_back(key, v.data());
    if (auto o = tree.get_child_optional("ocp")) {
        detail::ini_assign(*o, "weight_p", s.ocp.weight_p);
        detail::ini_assign(*o, "grid_n", s.ocp.grid_n);
        detail::ini_assign(*o, "tol_bc", s.ocp.tol_bc);
        detail::ini_assign(*o, "tol_h", s.ocp.tol_h);
        detail::ini_assign(*o, "tol_costate", s.ocp.tol_costate);
        detail::ini_assign(*o, "max_outer_iterations", s.ocp.max_outer_iterations);
        detail::ini_assign(*o, "t_max", s.ocp.t_max);
        detail::ini_assign(*o, "terminal_x", s.ocp.terminal_x);
    }
    if (auto g = tree.get_child_optional("ga")) {
        detail::ini_assign(*g, "pop_n", s.ga.pop_n);
        detail::ini_assign(*g, "generations", s.ga.generations_g);
        detail::ini_assign(*g, "elite_m", s.ga.elite_m);
        detail::ini_assign(*g, "mutation_rate", s.ga.mutation_rate);
        detail::ini_assign(*g, "threads", s.ga.threads);
        detail::ini_assign(*g, "relocation_mutation", s.ga.relocation_mutation);
        detail::ini_assign(*g, "epsilon_0", s.epsilon_0);
        detail::ini_assign(*g, "restarts_per_epsilon", s.restarts_per_epsilon);
    }
    if (auto m = tree.get_child_optional("sim")) {
        detail::ini_assign(*m, "rel_tol", s.sim.rel_tol);
        detail::ini_assign(*m, "abs_tol", s.sim.abs_tol);
        detail::ini_assign(*m, "t_end", s.sim.t_end);
        detail::ini_assign(*m, "dense_output_stride", s.sim.dense_output_stride);
    }
}

inline void apply_ini_file(Scenario& s, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open config '" + path + "'");
    apply_ini(s, f);
}

}  // namespace wolb
