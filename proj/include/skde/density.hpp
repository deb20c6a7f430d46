#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "skde/divergence.hpp"
#include "skde/integrate.hpp"
#include "skde/types.hpp"

namespace skde {

/// Default half-width of auto-resolved integration boxes, in units of the
/// largest bandwidth / marginal standard deviation.  Six sigmas keep the mass
/// captured by the box within 1e-6 of 1 in every supported dimension.
inline constexpr Scalar kBoxMargin = 6.0;

/// Isotropic Gaussian dictionary word: N(center, h^2 I).
struct GaussianWord {
  Vector center;
  Scalar h = 1.0;

  int dim() const { return static_cast<int>(center.size()); }
};

Scalar log_density(const GaussianWord& w, const Vector& x);
Scalar eval_density(const GaussianWord& w, const Vector& x);

/// closed form for \int N(c_a, h_a^2 I) N(c_b, h_b^2 I) dx
Scalar gaussian_cross_integral(const GaussianWord& a, const GaussianWord& b);

/// Full-covariance Gaussian mixture; the simulation targets live here.
struct MixtureComponent {
  Scalar weight = 1.0;
  Vector mean;
  Matrix cov;
};

struct MixtureDensity {
  std::vector<MixtureComponent> components;

  int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }
};

/// Throws ArgumentError unless weights are positive and sum to 1 within 1e-12
/// and every covariance is symmetric positive definite.
void validate_mixture(const MixtureDensity& m);

Scalar eval_density(const MixtureDensity& m, const Vector& x);

/// Weighted sum of full-covariance Gaussians; weights need not sum to 1, so
/// scaled results of xi-space combination stay representable exactly.
struct GaussianSum {
  std::vector<Scalar> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covs;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  Scalar mass() const;
};

Scalar eval_density(const GaussianSum& s, const Vector& x);

Scalar mvn_density(const Vector& x, const Vector& mean, const Matrix& cov);
Scalar mvn_cross_integral(const Vector& mean_a, const Matrix& cov_a, const Vector& mean_b,
                          const Matrix& cov_b);
/// \int a b dx for two Gaussian sums, in closed form.
Scalar l2_inner(const GaussianSum& a, const GaussianSum& b);

GaussianSum to_gaussian_sum(const GaussianWord& w);
GaussianSum to_gaussian_sum(const MixtureDensity& m);

/// One convex-combination term in xi scale: weight on dictionary word `word`.
struct XiTerm {
  Index word = 0;
  Scalar weight = 0.0;
};

/**
 * Convex combination held in xi scale: the density is
 *   u( sum_l weight_l xi(phi_{word_l}) ).
 * Terms are kept sorted by word index with no duplicates, so evaluation order
 * (and hence round-off) is reproducible.
 */
struct XiCombination {
  explicit XiCombination(DivergenceFamily fam) : family(fam) {}

  DivergenceFamily family;
  std::vector<XiTerm> terms;

  Scalar weight_sum() const;
};

Scalar eval_density(const XiCombination& c, std::span<const GaussianWord> words, const Vector& x);

/**
 * One stagewise update in xi scale: scale every existing weight by (1 - pi)
 * and give weight pi to `word`, merging if the word is already present.
 * pi must lie in [0, 1]; zero-weight terms are dropped.
 */
XiCombination combine_stage(const XiCombination& prev, Index word, Scalar pi);

/// The exact Gaussian-sum form of a combination when one exists: any
/// combination at beta = 1 (weights summing to 1), any KL combination (a single
/// scaled Gaussian), or a single-word combination in any family.
std::optional<GaussianSum> combination_gaussian_sum(const XiCombination& c,
                                                    std::span<const GaussianWord> words);

/**
 * Type-erased positive function with optional exact structure attached.
 * `analytic_mass` is the true integral over R^d when known; `gaussian_sum`
 * is an exact closed form enabling L2 inner products without quadrature.
 */
class DensityHandle {
 public:
  using EvalFn = std::function<Scalar(const Vector&)>;

  DensityHandle(int dim, EvalFn eval, std::optional<Scalar> analytic_mass = std::nullopt,
                std::optional<GaussianSum> sum = std::nullopt);

  static DensityHandle of(const GaussianWord& w);
  static DensityHandle of(const MixtureDensity& m);
  static DensityHandle of(const XiCombination& c, std::span<const GaussianWord> words);

  Scalar operator()(const Vector& x) const;
  int dim() const { return dim_; }
  const std::optional<Scalar>& analytic_mass() const { return mass_; }
  const GaussianSum* gaussian_sum() const { return sum_.get(); }

 private:
  int dim_;
  EvalFn eval_;
  std::optional<Scalar> mass_;
  std::shared_ptr<const GaussianSum> sum_;
};

Box bounding_box(std::span<const GaussianWord> words, Scalar margin = kBoxMargin);
Box bounding_box(const MixtureDensity& m, Scalar margin = kBoxMargin);
Box bounding_box(const GaussianSum& s, Scalar margin = kBoxMargin);

/// Fill in empty bounds from a fallback box; leaves explicit bounds untouched.
IntegratorSpec resolve_bounds(IntegratorSpec spec, const Box& fallback);

/// Integrate a handle over spec.bounds.  If the handle knows its analytic
/// mass, the grid total must match it within 1e-3, else CoverageError.
Scalar integrate_density(const DensityHandle& f, const IntegratorSpec& spec);

}  // namespace skde
