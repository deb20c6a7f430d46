#pragma once

#include <vector>

#include "skde/dictionary.hpp"
#include "skde/simulate.hpp"

namespace skde {

/**
 * Closed-form second moment of the log-ratio of two words under a third:
 *   J(a, b, c) = E_{X ~ phi_a} [ (log phi_b(X) - log phi_c(X))^2 ]
 *              = 2 d C1^2 + |C2|^2 + (d C1 + C3)^2
 * with the affine-in-z decomposition log(phi_b/phi_c)(X_a + h_a z) =
 * C1 |z|^2 + C2 . z + C3.
 */
struct TripleCurvature {
  Scalar c1 = 0.0;
  Vector c2;
  Scalar c3 = 0.0;
  Scalar j = 0.0;
};

TripleCurvature triple_curvature(const GaussianWord& a, const GaussianWord& b,
                                        const GaussianWord& c);

/// Quadrature oracle for the same quantity; bounds default to an 8-sigma box
/// around the weighting word.
Scalar j_quadrature_oracle(const GaussianWord& a, const GaussianWord& b, const GaussianWord& c,
                           IntegratorSpec spec = {});

/**
 * Dictionary-level KL bound dominating every J(a, b, c):
 *   2 d r^4 + 4 (r^2 / h_min)^2 R^2 + (d r^2 + R^2 / h_min^2 + d log r)^2
 * with r = h_max / h_min and R the largest center distance.  A one-word
 * dictionary gives 2d + d^2.
 */
struct BklBound {
  Scalar value = 0.0;
  Scalar h_min = 0.0;
  Scalar h_max = 0.0;
  Scalar h_ratio = 0.0;
  Scalar radius_sq = 0.0;
};

BklBound bkl_upper_bound(const Dictionary& dict);

/// sup over words of |empirical mean of xi(phi) - E_f xi(phi)|, with the
/// population term in closed form for Gaussian-mixture f.
struct NuSupResult {
  Scalar value = 0.0;
  Index word = -1;
};

NuSupResult nu_n_sup(const Dictionary& dict, const DivergenceFamily& fam, const MixtureDensity& f,
                     const Eigen::Ref<const Matrix>& samples);

/**
 * Replicated comparison of the achieved divergence against the sum of its
 * upper-bound terms:
 *
 *   lhs  <=  hull_term + nu_term + b_term + epsilon
 *
 * averaged over replicates, where hull_term is the best single-word divergence
 * (an upper bound on the infimum over the convex hull), nu_term twice the
 * empirical-process sup, and b_term theta^2 / (M + theta - 1) times the
 * dictionary KL bound.  The b_term is exact reasoning only under KL; for power
 * families it is reported with `b_term_heuristic` set.
 */
struct RiskBoundReport {
  Scalar lhs = 0.0;
  Scalar hull_term = 0.0;
  Scalar nu_term = 0.0;
  Scalar b_term = 0.0;
  Scalar epsilon = 0.0;
  bool pass = false;
  bool b_term_heuristic = false;
  int replicates = 0;
  Scalar mass_mean = 0.0;      // mean normalizing mass of the raw estimates
  Scalar mass_dev_mean = 0.0;  // mean |1 - 1/mass|
};

RiskBoundReport risk_bound_check(const ScenarioSpec& spec);

}  // namespace skde
