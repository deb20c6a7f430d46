#pragma once

#include "skde/density.hpp"
#include "skde/divergence.hpp"
#include "skde/integrate.hpp"

namespace skde {

/**
 * Empirical loss of a candidate density g against a sample:
 *   -(1/n) sum_i xi(g(X_i))  +  \int U(xi(g)).
 *
 * The integral term is closed-form whenever possible: 0.5 \int g^2 via Gaussian
 * cross integrals at beta = 1 when g carries an exact Gaussian-sum form, and
 * the analytic mass of g under KL.  Otherwise it falls back to quadrature on
 * spec (bounds auto-resolved from g's Gaussian structure when left empty), with
 * grid coverage checked against g's analytic mass when known.
 */
LossValue empirical_u_loss(const DivergenceFamily& fam, const DensityHandle& g,
                           const Eigen::Ref<const Matrix>& samples, const IntegratorSpec& spec);

/**
 * Divergence between two densities, integrated in a single pass of the
 * pointwise integrand U(xi(g)) - U(xi(f)) - f (xi(g) - xi(f)), which is
 * non-negative everywhere; a result below -1e-9 raises NumericIntegrityError.
 * At beta = 1 with exact Gaussian-sum forms on both sides this reduces to
 * 0.5 \int (f - g)^2 in closed form.
 */
Scalar u_divergence(const DivergenceFamily& fam, const DensityHandle& f, const DensityHandle& g,
                    const IntegratorSpec& spec);

}  // namespace skde
