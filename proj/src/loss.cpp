#include "skde/loss.hpp"

#include <cmath>

#include "skde/parallel.hpp"

namespace skde {

namespace {

// Fill in empty bounds from the Gaussian structure of the given handles.
IntegratorSpec resolve_from_handles(IntegratorSpec spec,
                                    std::initializer_list<const DensityHandle*> handles) {
  if (!spec.bounds.empty()) return spec;
  Box box;
  for (const DensityHandle* h : handles)
    if (h->gaussian_sum()) box = box_union(box, bounding_box(*h->gaussian_sum()));
  if (box.empty())
    throw ArgumentError("integrator bounds are unresolved and no handle offers a bounding box");
  spec.bounds = std::move(box);
  return spec;
}

Scalar clamped_xi(const DivergenceFamily& fam, Scalar v) {
  if (fam.kind() == FamilyKind::KL) return fam.xi(std::max(v, kDensityFloor));
  return fam.xi(v);
}

void check_coverage(Scalar grid_mass, Scalar expected) {
  if (std::abs(grid_mass - expected) > 1e-3 * std::max(Scalar(1), std::abs(expected)))
    throw CoverageError("integration box captures " + std::to_string(grid_mass) +
                        " of an expected mass " + std::to_string(expected) +
                        "; widen the bounds or raise the resolution");
}

}  // namespace

LossValue empirical_u_loss(const DivergenceFamily& fam, const DensityHandle& g,
                           const Eigen::Ref<const Matrix>& samples, const IntegratorSpec& spec) {
  const Index n = samples.rows();
  if (n < 1) throw ArgumentError("empirical_u_loss: empty sample");
  if (static_cast<int>(samples.cols()) != g.dim())
    throw ArgumentError("empirical_u_loss: sample dimension mismatch");

  const Scalar sample_term = -deterministic_sum(n, [&](Index i) {
                               thread_local Vector x;
                               x = samples.row(i).transpose();
                               return clamped_xi(fam, g(x));
                             }) /
                             static_cast<Scalar>(n);

  // Closed-form convex term when the structure allows it.
  if (fam.is_beta(1.0) && g.gaussian_sum() != nullptr) {
    const Scalar integral = 0.5 * l2_inner(*g.gaussian_sum(), *g.gaussian_sum());
    return LossValue::of(sample_term, integral);
  }
  if (fam.kind() == FamilyKind::KL && g.analytic_mass()) {
    return LossValue::of(sample_term, *g.analytic_mass());
  }

  const IntegratorSpec resolved = resolve_from_handles(spec, {&g});
  if (resolved.mode == IntegratorMode::TensorGrid) {
    GridQuadrature grid(resolved);
    // One pass accumulates the convex term and the grid mass of g together.
    const auto sums = deterministic_sums<2>(grid.size(), [&](Index idx, std::array<Scalar, 2>& a) {
      thread_local Vector x;
      grid.node(idx, x);
      const Scalar w = grid.weight(idx);
      const Scalar v = g(x);
      const Scalar integrand = u_loss_integrand(fam, v);
      if (!std::isfinite(integrand)) throw NumericIntegrityError("empirical_u_loss: non-finite integrand");
      a[0] = w * integrand;
      a[1] = w * v;
    });
    if (g.analytic_mass()) check_coverage(sums[1], *g.analytic_mass());
    return LossValue::of(sample_term, sums[0]);
  }
  const Scalar integral =
      integrate([&](const Vector& x) { return u_loss_integrand(fam, g(x)); }, resolved);
  return LossValue::of(sample_term, integral);
}

Scalar u_divergence(const DivergenceFamily& fam, const DensityHandle& f, const DensityHandle& g,
                    const IntegratorSpec& spec) {
  if (f.dim() != g.dim()) throw ArgumentError("u_divergence: dimension mismatch");

  Scalar value = 0.0;
  if (fam.is_beta(1.0) && f.gaussian_sum() != nullptr && g.gaussian_sum() != nullptr) {
    const auto& fs = *f.gaussian_sum();
    const auto& gs = *g.gaussian_sum();
    value = 0.5 * (l2_inner(fs, fs) - 2.0 * l2_inner(fs, gs) + l2_inner(gs, gs));
  } else {
    const IntegratorSpec resolved = resolve_from_handles(spec, {&f, &g});
    if (resolved.mode == IntegratorMode::TensorGrid) {
      GridQuadrature grid(resolved);
      const auto sums = deterministic_sums<3>(grid.size(), [&](Index idx, std::array<Scalar, 3>& a) {
        thread_local Vector x;
        grid.node(idx, x);
        const Scalar w = grid.weight(idx);
        const Scalar fv = f(x);
        const Scalar gv = g(x);
        const Scalar integrand = divergence_integrand(fam, fv, gv);
        if (!std::isfinite(integrand)) throw NumericIntegrityError("u_divergence: non-finite integrand");
        a[0] = w * integrand;
        a[1] = w * fv;
        a[2] = w * gv;
      });
      if (f.analytic_mass()) check_coverage(sums[1], *f.analytic_mass());
      if (g.analytic_mass()) check_coverage(sums[2], *g.analytic_mass());
      value = sums[0];
    } else {
      value = integrate([&](const Vector& x) { return divergence_integrand(fam, f(x), g(x)); }, resolved);
    }
  }
  if (value < -1e-9)
    throw NumericIntegrityError("u_divergence produced " + std::to_string(value) +
                                ", below the non-negativity tolerance");
  return value;
}

}  // namespace skde
