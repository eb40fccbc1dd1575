#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wmr/constants.hpp"
#include "wmr/errors.hpp"

namespace wmr::solvers {

namespace detail {

inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw DomainError(std::string(name) + " not finite");
}

inline void require_positive(double v, const char* name) {
  require_finite(v, name);
  if (v <= 0) throw DomainError(std::string(name) + " must be > 0");
}

}  // namespace detail

// Cantilever with end load: delta = F L^3 / (3 E I)
inline double beam_deflection(double F, double L, double E, double I) {
  detail::require_finite(F, "F");
  detail::require_positive(L, "L");
  detail::require_positive(E, "E");
  detail::require_positive(I, "I");
  return F * L * L * L / (3.0 * E * I);
}

// Euler critical load: P_cr = pi^2 E I / (K L)^2
inline double euler_buckling(double E, double I, double L, double K) {
  detail::require_positive(E, "E");
  detail::require_positive(I, "I");
  detail::require_positive(L, "L");
  detail::require_positive(K, "K");
  const double kl = K * L;
  return constants::kPi * constants::kPi * E * I / (kl * kl);
}

// Fourier conduction: q = k A dT / L
inline double conduction(double k, double A, double dT, double L) {
  detail::require_positive(k, "k");
  detail::require_positive(A, "A");
  detail::require_finite(dT, "dT");
  detail::require_positive(L, "L");
  return k * A * dT / L;
}

// Newton cooling: q = h A dT
inline double convection(double h, double A, double dT) {
  detail::require_positive(h, "h");
  detail::require_positive(A, "A");
  detail::require_finite(dT, "dT");
  return h * A * dT;
}

// Stefan-Boltzmann: q = eps sigma A (T^4 - T_amb^4)
inline double radiation(double eps, double A, double T, double T_amb) {
  detail::require_finite(eps, "eps");
  if (eps < 0 || eps > 1) throw DomainError("eps must be in [0,1]");
  detail::require_positive(A, "A");
  detail::require_positive(T, "T");
  detail::require_positive(T_amb, "T_amb");
  const double t4 = T * T * T * T;
  const double ta4 = T_amb * T_amb * T_amb * T_amb;
  return eps * constants::kStefanBoltzmann * A * (t4 - ta4);
}

// Arrhenius: k = A exp(-Ea / (R T))
inline double arrhenius_rate(double A, double Ea, double T) {
  detail::require_finite(A, "A");
  detail::require_finite(Ea, "Ea");
  if (A < 0) throw DomainError("A must be >= 0");
  if (Ea < 0) throw DomainError("Ea must be >= 0");
  detail::require_positive(T, "T");
  return A * std::exp(-Ea / (constants::kGasConstant * T));
}

inline constexpr double kRunawayDefaultDt = 0.1;        // s
inline constexpr std::uint64_t kRunawayStepBudget = 10'000'000;

// Zero-order adiabatic self-heating: dT/dt = dT_ad * k(T), integrated with
// fixed-step RK4 until T >= T_max. Returns the time of the first step that
// crosses T_max. Throws NoRunaway if the step budget runs out first.
inline double time_to_runaway(double T0, double dT_ad, double A, double Ea,
                              double T_max, double dt = kRunawayDefaultDt,
                              std::uint64_t step_budget = kRunawayStepBudget) {
  detail::require_positive(T0, "T0");
  detail::require_positive(dt, "dt");
  if (dT_ad <= 0) throw DomainError("dT_ad must be > 0");
  if (T0 >= T_max) throw DomainError("T0 must be < T_max");
  auto rate = [&](double T) { return dT_ad * arrhenius_rate(A, Ea, T); };
  double T = T0;
  for (std::uint64_t step = 0; step < step_budget; ++step) {
    const double k1 = rate(T);
    const double k2 = rate(T + 0.5 * dt * k1);
    const double k3 = rate(T + 0.5 * dt * k2);
    const double k4 = rate(T + dt * k3);
    T += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (T >= T_max) return static_cast<double>(step + 1) * dt;
  }
  throw NoRunaway("T_max not reached within step budget");
}

struct ScaleupResult {
  double Re1, Re2, P1, P2, N2;
};

// Constant power-per-volume scale-up: Re = rho N D^2 / mu, P = Np rho N^3 D^5,
// N2 = N1 (D1/D2)^(2/3)
inline ScaleupResult scaleup(double N1, double D1, double D2, double rho,
                             double mu, double Np) {
  detail::require_positive(N1, "N1");
  detail::require_positive(D1, "D1");
  detail::require_positive(D2, "D2");
  detail::require_positive(rho, "rho");
  detail::require_positive(mu, "mu");
  detail::require_positive(Np, "Np");
  ScaleupResult r;
  r.N2 = N1 * std::pow(D1 / D2, 2.0 / 3.0);
  r.Re1 = rho * N1 * D1 * D1 / mu;
  r.Re2 = rho * r.N2 * D2 * D2 / mu;
  r.P1 = Np * rho * N1 * N1 * N1 * std::pow(D1, 5);
  r.P2 = Np * rho * r.N2 * r.N2 * r.N2 * std::pow(D2, 5);
  return r;
}

// Arps decline: q = qi (1 + b Di t)^(-1/b), exponential branch at b = 0
inline double arps_decline(double qi, double Di, double b, double t) {
  detail::require_positive(qi, "qi");
  detail::require_finite(Di, "Di");
  if (Di < 0) throw DomainError("Di must be >= 0");
  if (b < 0 || b > 1) throw DomainError("b must be in [0,1]");
  detail::require_finite(t, "t");
  if (t < 0) throw DomainError("t must be >= 0");
  if (b == 0) return qi * std::exp(-Di * t);
  return qi * std::pow(1.0 + b * Di * t, -1.0 / b);
}

// Paris fatigue life, closed form for m != 2:
// N = (af^(1-m/2) - a0^(1-m/2)) / (C (Y dsigma sqrt(pi))^m (1 - m/2))
inline double paris_cycles(double a0, double af, double C, double m_exp,
                           double dsigma, double Y) {
  detail::require_positive(a0, "a0");
  detail::require_positive(af, "af");
  if (a0 >= af) throw DomainError("a0 must be < af");
  detail::require_positive(C, "C");
  detail::require_positive(m_exp, "m_exp");
  if (m_exp == 2.0) throw UnsupportedExponent("m_exp = 2 not supported");
  detail::require_positive(dsigma, "dsigma");
  detail::require_positive(Y, "Y");
  const double e = 1.0 - m_exp / 2.0;
  const double num = std::pow(af, e) - std::pow(a0, e);
  const double den = C * std::pow(Y * dsigma * std::sqrt(constants::kPi), m_exp) * e;
  return num / den;
}

// Stokes settling: v = 2 r^2 (rho_p - rho_f) g / (9 mu)
inline double stokes_velocity(double r, double rho_p, double rho_f, double mu) {
  detail::require_positive(r, "r");
  detail::require_positive(rho_p, "rho_p");
  detail::require_positive(rho_f, "rho_f");
  detail::require_positive(mu, "mu");
  return 2.0 * r * r * (rho_p - rho_f) * constants::kStandardGravity / (9.0 * mu);
}

// Faraday mass loss: m = I t M / (n F), n a positive integer
inline double faraday_mass_loss(double I, double t, double M, int n) {
  detail::require_positive(I, "I");
  detail::require_finite(t, "t");
  if (t < 0) throw DomainError("t must be >= 0");
  detail::require_positive(M, "M");
  if (n <= 0) throw DomainError("n must be a positive integer");
  return I * t * M / (static_cast<double>(n) * constants::kFaraday);
}

// ---------------------------------------------------------------------------
// Catalog: every solver exposed with a named input/output schema so the
// registry can register each as a PhysicsSolver nano model and the CLI can
// enumerate physics coverage.

using ValueMap = std::map<std::string, double>;

struct SolverDef {
  std::string name;
  std::vector<std::string> inputs;   // "field:unit"
  std::vector<std::string> outputs;  // "field:unit"
  std::function<ValueMap(const ValueMap&)> fn;
};

inline double arg(const ValueMap& in, const std::string& key) {
  auto it = in.find(key);
  if (it == in.end()) throw SchemaError("missing solver input: " + key);
  return it->second;
}

inline const std::vector<SolverDef>& catalog() {
  static const std::vector<SolverDef> defs = {
      {"beam_deflection",
       {"F:N", "L:m", "E:Pa", "I:m4"},
       {"delta:m"},
       [](const ValueMap& in) -> ValueMap {
         return {{"delta", beam_deflection(arg(in, "F"), arg(in, "L"),
                                           arg(in, "E"), arg(in, "I"))}};
       }},
      {"euler_buckling",
       {"E:Pa", "I:m4", "L:m", "K:1"},
       {"P_cr:N"},
       [](const ValueMap& in) -> ValueMap {
         return {{"P_cr", euler_buckling(arg(in, "E"), arg(in, "I"),
                                         arg(in, "L"), arg(in, "K"))}};
       }},
      {"conduction",
       {"k:W/mK", "A:m2", "dT:K", "L:m"},
       {"q:W"},
       [](const ValueMap& in) -> ValueMap {
         return {{"q", conduction(arg(in, "k"), arg(in, "A"), arg(in, "dT"),
                                  arg(in, "L"))}};
       }},
      {"convection",
       {"h:W/m2K", "A:m2", "dT:K"},
       {"q:W"},
       [](const ValueMap& in) -> ValueMap {
         return {{"q", convection(arg(in, "h"), arg(in, "A"), arg(in, "dT"))}};
       }},
      {"radiation",
       {"eps:1", "A:m2", "T:K", "T_amb:K"},
       {"q:W"},
       [](const ValueMap& in) -> ValueMap {
         return {{"q", radiation(arg(in, "eps"), arg(in, "A"), arg(in, "T"),
                                 arg(in, "T_amb"))}};
       }},
      {"arrhenius_rate",
       {"A:1/s", "Ea:J/mol", "T:K"},
       {"k:1/s"},
       [](const ValueMap& in) -> ValueMap {
         return {{"k", arrhenius_rate(arg(in, "A"), arg(in, "Ea"), arg(in, "T"))}};
       }},
      {"time_to_runaway",
       {"T0:K", "dT_ad:K", "A:1/s", "Ea:J/mol", "T_max:K", "dt:s"},
       {"t:s"},
       [](const ValueMap& in) -> ValueMap {
         double dt = in.count("dt") ? arg(in, "dt") : kRunawayDefaultDt;
         return {{"t", time_to_runaway(arg(in, "T0"), arg(in, "dT_ad"),
                                       arg(in, "A"), arg(in, "Ea"),
                                       arg(in, "T_max"), dt)}};
       }},
      {"scaleup",
       {"N1:1/s", "D1:m", "D2:m", "rho:kg/m3", "mu:Pas", "Np:1"},
       {"Re1:1", "Re2:1", "P1:W", "P2:W", "N2:1/s"},
       [](const ValueMap& in) -> ValueMap {
         auto r = scaleup(arg(in, "N1"), arg(in, "D1"), arg(in, "D2"),
                          arg(in, "rho"), arg(in, "mu"), arg(in, "Np"));
         return {{"Re1", r.Re1}, {"Re2", r.Re2}, {"P1", r.P1},
                 {"P2", r.P2}, {"N2", r.N2}};
       }},
      {"arps_decline",
       {"qi:vol/t", "Di:1/t", "b:1", "t:t"},
       {"q:vol/t"},
       [](const ValueMap& in) -> ValueMap {
         return {{"q", arps_decline(arg(in, "qi"), arg(in, "Di"), arg(in, "b"),
                                    arg(in, "t"))}};
       }},
      {"paris_cycles",
       {"a0:m", "af:m", "C:1", "m_exp:1", "dsigma:MPa", "Y:1"},
       {"N:cycles"},
       [](const ValueMap& in) -> ValueMap {
         return {{"N", paris_cycles(arg(in, "a0"), arg(in, "af"), arg(in, "C"),
                                    arg(in, "m_exp"), arg(in, "dsigma"),
                                    arg(in, "Y"))}};
       }},
      {"stokes_velocity",
       {"r:m", "rho_p:kg/m3", "rho_f:kg/m3", "mu:Pas"},
       {"v:m/s"},
       [](const ValueMap& in) -> ValueMap {
         return {{"v", stokes_velocity(arg(in, "r"), arg(in, "rho_p"),
                                       arg(in, "rho_f"), arg(in, "mu"))}};
       }},
      {"faraday_mass_loss",
       {"I:A", "t:s", "M:g/mol", "n:1"},
       {"m:g"},
       [](const ValueMap& in) -> ValueMap {
         double n = arg(in, "n");
         if (n != std::floor(n)) throw DomainError("n must be an integer");
         return {{"m", faraday_mass_loss(arg(in, "I"), arg(in, "t"),
                                         arg(in, "M"), static_cast<int>(n))}};
       }},
  };
  return defs;
}

inline const SolverDef& find(const std::string& name) {
  for (const auto& d : catalog())
    if (d.name == name) return d;
  throw UnknownModel("no such solver: " + name);
}

}  // namespace wmr::solvers
