#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "skde/parallel.hpp"
#include "skde/types.hpp"

namespace skde {

enum class IntegratorMode { TensorGrid, MonteCarlo };

struct AxisBounds {
  Scalar lo = 0.0;
  Scalar hi = 0.0;
};

/// Axis-aligned integration box, one entry per dimension.
using Box = std::vector<AxisBounds>;

Box box_union(const Box& a, const Box& b);

struct IntegratorSpec {
  IntegratorMode mode = IntegratorMode::TensorGrid;
  Box bounds;                  // empty means "resolve from context" at call sites
  int resolution = 512;        // nodes per axis (TensorGrid)
  long samples = 100000;       // draw count (MonteCarlo)
  std::uint64_t seed = 0;      // stream seed (MonteCarlo)
};

/// Sensible per-axis resolution by dimension; tensor grids in d = 3 get a
/// coarser default so node counts stay bounded.
int default_resolution(int dim);

/**
 * Tensor-product trapezoid rule on an axis-aligned box, d in {1, 2, 3}.
 * Nodes are enumerated by a flat index with axis 0 slowest.  Exact for
 * constants: the weights sum to the box volume up to round-off.
 */
class GridQuadrature {
 public:
  explicit GridQuadrature(const IntegratorSpec& spec);

  int dim() const { return static_cast<int>(axes_.size()); }
  Index size() const { return total_; }
  const std::vector<Scalar>& axis(int p) const { return axes_[static_cast<std::size_t>(p)]; }

  void node(Index g, Vector& out) const;
  Scalar weight(Index g) const;

  /// All nodes as a size() x dim() matrix; intended for moderate grids only.
  Matrix nodes_matrix() const;
  /// All weights in flat-index order.
  ArrayX weights_array() const;

  /// Deterministic weighted sum of fn over the grid (thread-count invariant).
  Scalar sum(const std::function<Scalar(const Vector&)>& fn) const;

 private:
  std::vector<std::vector<Scalar>> axes_;
  std::vector<std::vector<Scalar>> axis_weights_;
  Index total_ = 0;
};

/**
 * Integrate fn over spec.bounds.  TensorGrid uses the trapezoid rule above;
 * MonteCarlo uses `samples` uniform draws from the seeded stream times the box
 * volume.  Both reductions are chunked and pairwise, so the value is bit-stable
 * for a fixed spec regardless of the thread budget.  A non-finite integrand
 * value raises NumericIntegrityError.
 */
Scalar integrate(const std::function<Scalar(const Vector&)>& fn, const IntegratorSpec& spec);

}  // namespace skde
