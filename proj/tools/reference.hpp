#pragma once

// Published reference indicators used by `--reproduce`. Read-only.

#include <array>
#include <string_view>

namespace wolb::reference {

struct OptimalControl {
    std::string_view strain;
    double t_star;
    double total;
};

// Optimal time (figure captions) and area under u* for each strain.
inline constexpr std::array<OptimalControl, 2> ocp{{
    {"wmel", 13.72, 5961},
    {"wmelpop", 64.87, 33125},
}};

struct Cell {
    std::string_view strain;
    int frequency;
    int releases;
    double total;
};

// Impulsive strategies (table2): daily, weekly, fortnightly.
inline constexpr std::array<Cell, 6> table2{{
    {"wmel", 1, 14, 5966},
    {"wmel", 7, 2, 5966},
    {"wmel", 14, 1, 5966},
    {"wmelpop", 1, 65, 33169},
    {"wmelpop", 7, 9, 35574},
    {"wmelpop", 14, 5, 41804},
}};

// Genetic algorithm strategies (table4).
inline constexpr std::array<Cell, 6> table4{{
    {"wmel", 1, 11, 5436},
    {"wmel", 7, 2, 5226},
    {"wmel", 14, 1, 4956},
    {"wmelpop", 1, 60, 24481},
    {"wmelpop", 7, 9, 27259},
    {"wmelpop", 14, 5, 31323},
}};

}  // namespace wolb::reference
