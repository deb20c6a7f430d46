#include "skde/divergence.hpp"

#include <cmath>

namespace skde {

DivergenceFamily DivergenceFamily::beta_power(Scalar beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw ArgumentError("beta must lie in (0, 1]");
  return DivergenceFamily(FamilyKind::BetaPower, beta);
}

DivergenceFamily DivergenceFamily::kl() { return DivergenceFamily(FamilyKind::KL, 0.0); }

bool DivergenceFamily::is_beta(Scalar b) const {
  return kind_ == FamilyKind::BetaPower && beta_ == b;
}

Scalar DivergenceFamily::U(Scalar t) const {
  if (kind_ == FamilyKind::KL) return std::exp(t);
  const Scalar base = 1.0 + beta_ * t;
  if (base < 0.0) throw DomainError("U: 1 + beta t must be non-negative");
  if (beta_ == 1.0) return 0.5 * base * base;
  return std::pow(base, (beta_ + 1.0) / beta_) / (beta_ + 1.0);
}

Scalar DivergenceFamily::u(Scalar t) const {
  if (kind_ == FamilyKind::KL) return std::exp(t);
  const Scalar base = 1.0 + beta_ * t;
  if (base < 0.0) throw DomainError("u: 1 + beta t must be non-negative");
  if (beta_ == 1.0) return base;
  return std::pow(base, 1.0 / beta_);
}

Scalar DivergenceFamily::u_prime(Scalar t) const {
  if (kind_ == FamilyKind::KL) return std::exp(t);
  const Scalar base = 1.0 + beta_ * t;
  if (base < 0.0) throw DomainError("u_prime: 1 + beta t must be non-negative");
  if (beta_ == 1.0) return 1.0;
  return std::pow(base, (1.0 - beta_) / beta_);
}

Scalar DivergenceFamily::xi(Scalar t) const {
  if (kind_ == FamilyKind::KL) {
    if (t <= 0.0) throw DomainError("xi: log requires a positive argument");
    return std::log(t);
  }
  if (t < 0.0) throw DomainError("xi: negative density value");
  if (beta_ == 1.0) return t - 1.0;
  return (std::pow(t, beta_) - 1.0) / beta_;
}

Scalar family_eval(const DivergenceFamily& fam, FamilyMap map, Scalar t) {
  switch (map) {
    case FamilyMap::U:
      return fam.U(t);
    case FamilyMap::u:
      return fam.u(t);
    case FamilyMap::xi:
      return fam.xi(t);
  }
  throw ArgumentError("family_eval: unknown map");
}

Scalar u_loss_integrand(const DivergenceFamily& fam, Scalar g) {
  if (g < 0.0) throw DomainError("u_loss_integrand: negative density value");
  if (fam.kind() == FamilyKind::KL) return g;
  const Scalar beta = fam.beta();
  if (beta == 1.0) return 0.5 * g * g;
  return std::pow(g, beta + 1.0) / (beta + 1.0);
}

Scalar divergence_integrand(const DivergenceFamily& fam, Scalar f, Scalar g) {
  if (f < 0.0 || g < 0.0) throw DomainError("divergence_integrand: negative density value");
  if (fam.kind() == FamilyKind::KL) {
    if (f == 0.0) return g;  // f log f -> 0 limit
    const Scalar gc = std::max(g, kDensityFloor);
    return g - f + f * (std::log(f) - std::log(gc));
  }
  const Scalar beta = fam.beta();
  if (beta == 1.0) {
    const Scalar diff = f - g;
    return 0.5 * diff * diff;
  }
  if (f == 0.0) return std::pow(g, beta + 1.0) / (beta + 1.0);
  if (g == 0.0) return std::pow(f, beta + 1.0) / (beta * (beta + 1.0));
  // f^{beta+1} [ expm1((beta+1) t)/(beta+1) - expm1(beta t)/beta ],  t = log(g/f).
  // Both bracket terms are O(t) while their difference is O(t^2); expm1 keeps
  // the absolute error of the bracket near machine precision of the terms.
  const Scalar t = std::log(g) - std::log(f);
  const Scalar bracket =
      std::expm1((beta + 1.0) * t) / (beta + 1.0) - std::expm1(beta * t) / beta;
  return std::pow(f, beta + 1.0) * bracket;
}

}  // namespace skde
