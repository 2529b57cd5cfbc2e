#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "wolb/errors.hpp"

namespace wolb {

/// Biological constants of the two-population wild / infected mosquito model.
/// Rates are per day, sigma is per individual.
struct StrainParams {
    std::string name;
    double rho_n = 0;    ///< fecundity of wild insects
    double rho_w = 0;    ///< fecundity of infected insects
    double delta_n = 0;  ///< wild mortality
    double delta_w = 0;  ///< infected mortality
    double sigma = 0;    ///< competition coefficient
    double nu = 0;       ///< maternal transmission probability
    double eta = 0;      ///< cytoplasmic incompatibility probability
    double omega = 0;    ///< infection-loss rate

    /// Throws DomainError when a field is out of range or the strain is not
    /// less fit than the wild type (rho_n > rho_w, delta_n < delta_w).
    void validate() const {
        auto require = [this](bool ok, const char* what) {
            if (!ok) throw DomainError("strain '" + name + "': " + what);
        };
        for (double v : {rho_n, rho_w, delta_n, delta_w, sigma})
            require(std::isfinite(v) && v > 0, "rates and sigma must be strictly positive");
        require(nu >= 0 && nu <= 1, "nu must lie in [0,1]");
        require(eta >= 0 && eta <= 1, "eta must lie in [0,1]");
        require(std::isfinite(omega) && omega >= 0, "omega must be nonnegative");
        require(rho_n > rho_w, "wild fecundity must exceed infected fecundity");
        require(delta_n < delta_w, "wild mortality must be below infected mortality");
    }
};

/// Basic offspring numbers of the model.
struct OffspringNumbers {
    double q_x = 0;   ///< wild offspring per wild individual
    double q_y = 0;   ///< infected offspring per infected individual
    double q_yx = 0;  ///< wild offspring per infected individual
    double q_c = 0;   ///< composite number controlling coexistence
    bool viable = false;
};

inline OffspringNumbers offspring_numbers(const StrainParams& p) {
    OffspringNumbers q;
    q.q_x = p.rho_n / p.delta_n;
    q.q_y = p.nu * p.rho_w / (p.omega + p.delta_w);
    q.q_yx = ((1.0 - p.nu) * p.rho_w + p.omega * q.q_y) / p.delta_n;
    q.q_c = (q.q_yx + q.q_y + p.eta * q.q_x) / q.q_x;
    q.viable = q.q_x > q.q_y && q.q_y > 1.0;
    return q;
}

/// Carrying level of the wild-only equilibrium, ln(Q_x)/sigma.
inline double wild_carrying_level(const StrainParams& p) {
    return std::log(offspring_numbers(p).q_x) / p.sigma;
}

/// Parses "4.55", "1e-3" or a rational "1/28" / "0.1/140".
inline double parse_decimal_or_rational(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    auto number = [&](std::string_view s) {
        s = trim(s);
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
            throw ParseError("not a number: '" + std::string(s) + "'");
        return v;
    };
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return number(text);
    const double den = number(text.substr(slash + 1));
    if (den == 0) throw ParseError("zero denominator in '" + std::string(text) + "'");
    return number(text.substr(0, slash)) / den;
}

namespace presets {

inline StrainParams wmel() {
    StrainParams p;
    p.name = "wmel";
    p.rho_n = 4.55;
    p.rho_w = 0.9 * 4.55;
    p.delta_n = 1.0 / 28.0;
    p.delta_w = (1.0 / 28.0) / 0.9;
    p.sigma = 0.1 / 140.0;
    p.nu = 0.95;
    p.eta = 0.98;
    p.omega = 0.001;
    return p;
}

inline StrainParams wmelpop() {
    StrainParams p;
    p.name = "wmelpop";
    p.rho_n = 4.55;
    p.rho_w = 0.5 * 4.55;
    p.delta_n = 1.0 / 28.0;
    p.delta_w = (1.0 / 28.0) / 0.5;
    p.sigma = 0.1 / 140.0;
    p.nu = 0.99;
    p.eta = 0.95;
    p.omega = 0.00015;
    return p;
}

/// Daily release capacity used with each preset.
inline double default_capacity(std::string_view strain) {
    return strain == "wmelpop" ? 1000.0 : 750.0;
}

}  // namespace presets

/// Looks up a preset by name; throws DomainError("unknown strain ...").
inline StrainParams preset_by_name(std::string_view name) {
    if (name == "wmel") return presets::wmel();
    if (name == "wmelpop") return presets::wmelpop();
    throw DomainError("unknown strain '" + std::string(name) + "'");
}

/// Overrides a single field by name. Returns false for unknown keys.
inline bool set_param(StrainParams& p, std::string_view key, std::string_view value) {
    if (key == "name") {
        p.name = std::string(value);
        return true;
    }
    double* field = nullptr;
    if (key == "rho_n") field = &p.rho_n;
    else if (key == "rho_w") field = &p.rho_w;
    else if (key == "delta_n") field = &p.delta_n;
    else if (key == "delta_w") field = &p.delta_w;
    else if (key == "sigma") field = &p.sigma;
    else if (key == "nu") field = &p.nu;
    else if (key == "eta") field = &p.eta;
    else if (key == "omega") field = &p.omega;
    if (!field) return false;
    *field = parse_decimal_or_rational(value);
    return true;
}

}  // namespace wolb
