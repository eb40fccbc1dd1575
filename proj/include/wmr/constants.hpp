#pragma once

namespace wmr::constants {

// Shared physical constants (CODATA). Written once here so every golden
// value agrees bit-for-bit.
inline constexpr double kStefanBoltzmann = 5.670374419e-8;  // W/m^2K^4
inline constexpr double kGasConstant = 8.314462618;         // J/mol K
inline constexpr double kStandardGravity = 9.80665;         // m/s^2
inline constexpr double kFaraday = 96485.33212;             // C/mol
inline constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace wmr::constants
