#pragma once

// Physical constants, 2019 SI values (elementary charge and speed of
// light are exact by definition).

namespace trapdet::constants {

inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double joules_per_ev = 1.602176634e-19;       // J/eV
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double speed_of_light = 299792458.0;          // m/s

}  // namespace trapdet::constants
