#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "core.hpp"
#include "operators.hpp"

namespace penqvi {

/// Which quantity the penalty is applied to:
///   MagnitudeGap  k_eps(|Lu| - G)
///   PowerGap      k_eps(|Lu|^p - G^p)
enum class PenaltyVariant { MagnitudeGap, PowerGap };

struct PenaltyParams {
  double epsilon = 0.1;
  double delta = 1e-4;
  PenaltyVariant variant = PenaltyVariant::MagnitudeGap;
  //! Values of epsilon below this are rejected unless allow_small_epsilon is set.
  double min_epsilon = 0.05;
  bool allow_small_epsilon = false;
  //! Saturation of k_eps once small epsilons are allowed.
  double saturation = 1e12;

  //! Upper bound applied to k_eps; unbounded apart from double overflow by default.
  double cap() const {
    return allow_small_epsilon ? saturation : std::numeric_limits<double>::max();
  }

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParameterError("penalty epsilon must lie in (0, 1)");
    if (!(delta >= 0.0 && delta < 1.0)) throw ParameterError("penalty delta must lie in [0, 1)");
    if (epsilon < min_epsilon && !allow_small_epsilon)
      throw ParameterError("penalty epsilon " + std::to_string(epsilon) +
                           " is below the overflow guard; set allow_small_epsilon to override");
    if (allow_small_epsilon && !(saturation > 0.0)) throw ParameterError("penalty saturation must be positive");
  }
};

namespace detail {

inline void require_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("epsilon must lie in (0, 1)");
}

//! e^x - 1 saturated at cap, without overflowing on the way.
inline double capped_expm1(double x, double cap) {
  if (x >= std::log1p(cap)) return cap;
  return std::expm1(x);
}

}  // namespace detail

/// Exponential penalty:
///   0                   s <= 0
///   e^(s/eps) - 1       0 <= s <= 1/eps
///   e^(1/eps^2) - 1     s >= 1/eps
inline double k_eps(double s, double eps, double cap = std::numeric_limits<double>::max()) {
  detail::require_epsilon(eps);
  if (!(s > 0.0)) return 0.0;
  const double arg = std::min(s, 1.0 / eps) / eps;
  return detail::capped_expm1(arg, cap);
}

inline double k_eps_delta(double s, double eps, double delta,
                          double cap = std::numeric_limits<double>::max()) {
  if (!(delta >= 0.0 && delta < 1.0)) throw ParameterError("delta must lie in [0, 1)");
  return delta + k_eps(s, eps, cap);
}

/// Derivative of k_eps used by Newton. At the kinks s = 0 and s = 1/eps the
/// value of the exponential branch is taken.
inline double k_eps_derivative(double s, double eps, double cap = std::numeric_limits<double>::max()) {
  detail::require_epsilon(eps);
  if (s < 0.0 || s > 1.0 / eps) return 0.0;
  const double k = detail::capped_expm1(s / eps, cap);
  if (k >= cap) return 0.0;
  return (k + 1.0) / eps;
}

//! Antiderivative of k_eps vanishing at 0.
inline double phi_eps(double s, double eps, double cap = std::numeric_limits<double>::max()) {
  detail::require_epsilon(eps);
  if (!(s > 0.0)) return 0.0;
  const double knee = 1.0 / eps;
  const double exp_cut = std::log1p(cap) * eps;  // k_eps hits the cap here
  const double top = std::min(knee, exp_cut);
  const double head = std::min(s, top);
  double value = eps * std::expm1(head / eps) - head;
  if (s > top) value += (s - top) * k_eps(top, eps, cap);
  return value;
}

/// Penalty coefficient K = delta + k_eps(gap) of the penalised stress
/// K(|xi|) (|xi|^2 + mu^2)^((p-2)/2) xi, with its derivative in |xi|^2.
inline RadialCoefficient penalty_coefficient(double r2, double g, const PenaltyParams& params, double p) {
  const double cap = params.cap();
  const double r = std::sqrt(r2);
  double gap, dgap_dr2;
  if (params.variant == PenaltyVariant::MagnitudeGap) {
    gap = r - g;
    dgap_dr2 = r > 0.0 ? 0.5 / r : 0.0;
  } else {
    gap = std::pow(r, p) - std::pow(g, p);
    dgap_dr2 = r > 0.0 ? 0.5 * p * std::pow(r, p - 2.0) : 0.0;
  }
  return {params.delta + k_eps(gap, params.epsilon, cap),
          k_eps_derivative(gap, params.epsilon, cap) * dgap_dr2};
}

//! The argument handed to k_eps at one evaluation point.
inline double penalty_gap(double magnitude, double g, const PenaltyParams& params, double p) {
  return params.variant == PenaltyVariant::MagnitudeGap ? magnitude - g
                                                        : std::pow(magnitude, p) - std::pow(g, p);
}

//! Pointwise (delta + k_eps(gap)) (|xi|^2 + mu^2)^((p-2)/2) xi.
inline EdgeField penalty_stress(const EdgeField& lu, const ConstraintField& g, const PenaltyParams& params,
                                const MaterialLaw& law) {
  detail::require_size(g.size(), lu.points(), "penalty_stress");
  EdgeField out(lu.points(), lu.components);
  for (std::size_t j = 0; j < lu.points(); ++j) {
    const auto xi = lu.at(j);
    const double r2 = squared_norm(xi);
    if (r2 == 0.0) continue;
    const double c = penalty_coefficient(r2, g[j], params, law.p).c * power_coefficient(r2, law.p, law.mu).c;
    auto o = out.at(j);
    for (std::size_t k = 0; k < xi.size(); ++k) o[k] = c * xi[k];
  }
  return out;
}

//! h^d sum_j k_eps(gap_j): the spatial penalty mass at one time node.
inline double penalty_mass(const EdgeField& lu, const ConstraintField& g, const PenaltyParams& params,
                           double p, const Grid& grid) {
  detail::require_size(g.size(), lu.points(), "penalty_mass");
  double s = 0.0;
  for (std::size_t j = 0; j < lu.points(); ++j)
    s += k_eps(penalty_gap(lu.magnitude(j), g[j], params, p), params.epsilon, params.cap());
  return grid.cell_volume() * s;
}

}  // namespace penqvi
