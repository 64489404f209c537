#pragma once

/**
 * @file
 * @brief Continuously stirred tank reactor with energy balance and reaction A -> B.
 *
 * State x = (concentration [mol/m^3], temperature [K]); input u = cooling
 * jacket temperature [K].
 */

#include "ncsmpc/common.hpp"
#include "ncsmpc/dynamics.hpp"

namespace ncsmpc {

struct CstrParameters
{
  double q{100.0};           ///< flow rate [m^3/s]
  double V{100.0};           ///< volume [m^3]
  double k0{7.2e10};         ///< pre-exponential factor [1/s]
  double Ea{8750.0};         ///< activation energy over gas constant [K]
  double h{5e4};             ///< heat of reaction [J/mol]
  double rho{1000.0};        ///< mixture density [kg/m^3]
  double c{0.239};           ///< mixture heat capacity [J/(kg K)]
  double alpha_ht{5e4};      ///< heat transfer [W/K]
  double x1f{1.0};           ///< feed concentration [mol/m^3]
  double x2f{350.0};         ///< feed temperature [K]

  /// Throws InvalidArgument unless every parameter is strictly positive.
  void validate() const;
};

/// Target operating point used throughout: x* = (0.5, 350), u* = 300.
inline Vector cstr_target_state() { return Vector{{0.5, 350.0}}; }
inline Vector cstr_target_input() { return Vector{{300.0}}; }

/// Throws DomainError if the temperature x2 is not positive.
Vector cstr_vector_field(const Vector & x, double u, const CstrParameters & p = {});

/// Weighted quadratic distance to (x*, u*): (x2*/x1*)^2 (x1-x1*)^2 + (x2-x2*)^2 + 1e-3 (u-u*)^2.
double cstr_stage_cost(const Vector & x, double u);

/// Plant with X = [0, 1] x [0, inf), U = [250, 450] and the target as equilibrium.
PlantModel make_cstr_model(const CstrParameters & p = {});

StageCost make_cstr_stage_cost();

/**
 * @brief Stage-integral truncation level for suboptimality estimates on CSTR runs.
 *
 * The target is only an approximate equilibrium (see equilibrium_residual), so
 * the closed loop settles where the stage cost is about 1e-6 rather than 0.
 * Steps whose stage integral lies below this level carry no information about
 * the transient and are truncated.
 */
inline constexpr double cstr_alpha_truncation = 1e-5;

}  // namespace ncsmpc
