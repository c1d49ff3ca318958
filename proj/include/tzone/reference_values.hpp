#pragma once

#include <array>

namespace tzone::reference {

// Reference optimal bands for the EUR/DKK case study (five decimals).
struct CostRow {
    double c, a_star, b_star;
};

inline constexpr std::array<CostRow, 10> cost_table{{
    {1.0, 1.93729, 2.08193},
    {0.5, 1.95302, 2.0662},
    {0.1, 1.97703, 2.04218},
    {0.05, 1.98383, 2.03539},
    {0.04, 1.98569, 2.03352},
    {0.035, 1.98674, 2.03247},
    {0.034, 1.98696, 2.03225},
    {0.0335, 1.98707, 2.03214},
    {0.033, 1.98719, 2.03202},
    {0.03, 1.98789, 2.03132},
}};

// theta = m + delta, c = 0.0335.
struct ParityRow {
    double delta, a_star, b_star;
};

inline constexpr std::array<ParityRow, 4> parity_table{{
    {0.0, 1.98707, 2.03214},
    {0.01, 1.99709, 2.04215},
    {0.02, 2.0071, 2.05217},
    {0.03, 2.01712, 2.06218},
}};

inline constexpr double tolerance = 1e-4;

// Narrative values reported for the uncontrolled exit problem.
inline constexpr double max_exit_time_symmetric = 31.11;  // years
inline constexpr double exit_time_at_2_01_delta_002 = 0.23;
inline constexpr double max_exit_time_delta_002 = 1.26;
inline constexpr double argmax_exit_time_delta_002 = 2.048;

// Intervention thresholds of +-2.25% around the central parity 7.46038.
inline constexpr double parity_level = 7.46038;
inline constexpr double band_half_width = 0.0225;

}  // namespace tzone::reference
