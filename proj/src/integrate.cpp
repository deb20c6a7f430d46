#include "skde/integrate.hpp"

#include <algorithm>
#include <cmath>

#include "skde/rng.hpp"

namespace skde {

namespace {

void check_bounds(const Box& bounds) {
  if (bounds.empty()) throw ArgumentError("integrator bounds are unresolved (empty box)");
  for (const auto& [lo, hi] : bounds) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw ArgumentError("integrator bounds must be finite");
    if (!(lo < hi)) throw ArgumentError("integrator bounds require lo < hi on every axis");
  }
}

Scalar box_volume(const Box& bounds) {
  Scalar v = 1.0;
  for (const auto& [lo, hi] : bounds) v *= hi - lo;
  return v;
}

}  // namespace

Box box_union(const Box& a, const Box& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.size() != b.size()) throw ArgumentError("box_union: dimension mismatch");
  Box out(a.size());
  for (std::size_t p = 0; p < a.size(); ++p)
    out[p] = {std::min(a[p].lo, b[p].lo), std::max(a[p].hi, b[p].hi)};
  return out;
}

int default_resolution(int dim) {
  if (dim <= 2) return 512;
  return 96;
}

GridQuadrature::GridQuadrature(const IntegratorSpec& spec) {
  if (spec.mode != IntegratorMode::TensorGrid)
    throw ArgumentError("GridQuadrature requires TensorGrid mode");
  check_bounds(spec.bounds);
  const int d = static_cast<int>(spec.bounds.size());
  if (d > 3) throw ArgumentError("tensor grids support dimensions 1 through 3");
  if (spec.resolution < 32) throw ArgumentError("tensor grids need at least 32 nodes per axis");
  axes_.resize(static_cast<std::size_t>(d));
  axis_weights_.resize(static_cast<std::size_t>(d));
  total_ = 1;
  for (int p = 0; p < d; ++p) {
    const auto [lo, hi] = spec.bounds[static_cast<std::size_t>(p)];
    const int n = spec.resolution;
    const Scalar step = (hi - lo) / static_cast<Scalar>(n - 1);
    auto& nodes = axes_[static_cast<std::size_t>(p)];
    auto& weights = axis_weights_[static_cast<std::size_t>(p)];
    nodes.resize(static_cast<std::size_t>(n));
    weights.assign(static_cast<std::size_t>(n), step);
    for (int i = 0; i < n; ++i) nodes[static_cast<std::size_t>(i)] = lo + step * static_cast<Scalar>(i);
    nodes.back() = hi;
    weights.front() = 0.5 * step;
    weights.back() = 0.5 * step;
    total_ *= n;
  }
  if (total_ > (Index{1} << 25))
    throw ArgumentError("tensor grid too large; lower the resolution for this dimension");
}

void GridQuadrature::node(Index g, Vector& out) const {
  const int d = dim();
  out.resize(d);
  for (int p = d - 1; p >= 0; --p) {
    const auto n = static_cast<Index>(axes_[static_cast<std::size_t>(p)].size());
    out(p) = axes_[static_cast<std::size_t>(p)][static_cast<std::size_t>(g % n)];
    g /= n;
  }
}

Scalar GridQuadrature::weight(Index g) const {
  const int d = dim();
  Scalar w = 1.0;
  for (int p = d - 1; p >= 0; --p) {
    const auto n = static_cast<Index>(axis_weights_[static_cast<std::size_t>(p)].size());
    w *= axis_weights_[static_cast<std::size_t>(p)][static_cast<std::size_t>(g % n)];
    g /= n;
  }
  return w;
}

Matrix GridQuadrature::nodes_matrix() const {
  Matrix out(total_, dim());
  Vector x;
  for (Index g = 0; g < total_; ++g) {
    node(g, x);
    out.row(g) = x.transpose();
  }
  return out;
}

ArrayX GridQuadrature::weights_array() const {
  ArrayX out(total_);
  for (Index g = 0; g < total_; ++g) out(g) = weight(g);
  return out;
}

Scalar GridQuadrature::sum(const std::function<Scalar(const Vector&)>& fn) const {
  return deterministic_sum(total_, [&](Index g) {
    thread_local Vector x;
    node(g, x);
    const Scalar v = weight(g) * fn(x);
    if (!std::isfinite(v)) throw NumericIntegrityError("integrate: non-finite integrand value");
    return v;
  });
}

Scalar integrate(const std::function<Scalar(const Vector&)>& fn, const IntegratorSpec& spec) {
  if (spec.mode == IntegratorMode::TensorGrid) {
    GridQuadrature grid(spec);
    return grid.sum(fn);
  }
  check_bounds(spec.bounds);
  if (spec.samples < 1) throw ArgumentError("MonteCarlo integration needs at least 1 sample");
  const auto d = static_cast<Index>(spec.bounds.size());
  // Draws are generated sequentially from one stream so the point set is a
  // function of (seed, samples) alone; the reduction over rows is chunked.
  Matrix points(spec.samples, d);
  RandomStream stream(spec.seed);
  for (Index i = 0; i < points.rows(); ++i)
    for (Index p = 0; p < d; ++p) {
      const auto [lo, hi] = spec.bounds[static_cast<std::size_t>(p)];
      points(i, p) = lo + stream.uniform() * (hi - lo);
    }
  const Scalar mean = deterministic_sum(points.rows(), [&](Index i) {
                        thread_local Vector x;
                        x = points.row(i).transpose();
                        const Scalar v = fn(x);
                        if (!std::isfinite(v)) throw NumericIntegrityError("integrate: non-finite integrand value");
                        return v;
                      }) /
                      static_cast<Scalar>(points.rows());
  return mean * box_volume(spec.bounds);
}

}  // namespace skde
