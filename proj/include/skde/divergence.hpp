#pragma once

#include "skde/types.hpp"

namespace skde {

// Densities are clamped to this floor before any logarithm so that far-tail
// evaluations stay finite instead of producing -inf.
inline constexpr Scalar kDensityFloor = 1e-300;

enum class FamilyKind { BetaPower, KL };

/**
 * A strictly convex generator U together with its derivative u = U' and the
 * inverse link xi = u^{-1}.  Two families are supported:
 *
 *   BetaPower(beta), 0 < beta <= 1:
 *     U(t)  = (1 + beta t)^{(beta+1)/beta} / (beta + 1)
 *     u(t)  = (1 + beta t)^{1/beta}
 *     xi(t) = (t^beta - 1) / beta
 *
 *   KL (the beta -> 0 limit):
 *     U = u = exp,  xi = log
 */
class DivergenceFamily {
 public:
  static DivergenceFamily beta_power(Scalar beta);
  static DivergenceFamily kl();

  FamilyKind kind() const { return kind_; }
  /// Exponent of the power family; meaningless for KL.
  Scalar beta() const { return beta_; }
  bool is_beta(Scalar b) const;

  Scalar U(Scalar t) const;
  Scalar u(Scalar t) const;
  Scalar u_prime(Scalar t) const;
  Scalar xi(Scalar t) const;

 private:
  DivergenceFamily(FamilyKind kind, Scalar beta) : kind_(kind), beta_(beta) {}
  FamilyKind kind_;
  Scalar beta_;
};

enum class FamilyMap { U, u, xi };

/// Uniform entry point over the three family maps.
Scalar family_eval(const DivergenceFamily& fam, FamilyMap map, Scalar t);

/// U(xi(g)) in closed form: g^{beta+1}/(beta+1) for the power family, g for KL.
/// This is the integrand of the convex term of the empirical loss.
Scalar u_loss_integrand(const DivergenceFamily& fam, Scalar g);

/// Pointwise integrand of the divergence between density values f and g:
///   U(xi(g)) - U(xi(f)) - f (xi(g) - xi(f))  >=  0.
/// Computed in cancellation-free form per family; exactly 0.5 (f-g)^2 at beta = 1.
Scalar divergence_integrand(const DivergenceFamily& fam, Scalar f, Scalar g);

/// Empirical loss split into its two addends; value = sample_term + integral_term.
struct LossValue {
  Scalar value = 0.0;
  Scalar sample_term = 0.0;
  Scalar integral_term = 0.0;

  static LossValue of(Scalar sample_term, Scalar integral_term) {
    return {sample_term + integral_term, sample_term, integral_term};
  }
};

}  // namespace skde
