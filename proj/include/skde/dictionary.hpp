#pragma once

#include <utility>
#include <vector>

#include "skde/density.hpp"
#include "skde/types.hpp"

namespace skde {

enum class LadderVariant { B1, B2, Explicit };

/// Bandwidth ladder, sorted non-increasing.  `exponent` is the shrink rate
/// 1/(d+4) actually used; `extrapolated` marks dimensions other than 2, where
/// that rate extends the d = 2 rule rather than matching a tabulated one.
struct BandwidthLadder {
  LadderVariant variant = LadderVariant::B1;
  std::vector<Scalar> values;
  Scalar eta = 0.0;
  int j_max = 0;
  Scalar exponent = 0.0;
  bool extrapolated = false;
};

/// Normal-scale plug-in surrogate from the dictionary points:
/// per-axis sample SD times m^{-1/(d+4)}, combined by geometric mean.
struct ReferenceBandwidth {
  Scalar h = 0.0;
  Vector per_axis;  // SD_p * m^{-1/(d+4)}
  Vector sd;        // raw per-axis sample SDs
  Scalar exponent = 0.0;
  bool extrapolated = false;
};

ReferenceBandwidth reference_bandwidth(const Eigen::Ref<const Matrix>& points);

/// Ladder h_j = h_ref (m/j)^{1/(d+4)}, j = 1..j_max; h_1 is the raw geometric
/// mean of the per-axis SDs.
BandwidthLadder build_b1(const Eigen::Ref<const Matrix>& points, int j_max = 5);

/// Ladder h_j = gm(SD) (2 / (1 + eta (j-1)))^{1/(d+4)}, j = 1..j_max.
/// eta = 0 collapses the ladder to a single repeated value.
BandwidthLadder build_b2(const Eigen::Ref<const Matrix>& points, Scalar eta, int j_max = 10);

/// Ladder with caller-supplied bandwidths, kept in the given order.
BandwidthLadder explicit_ladder(std::vector<Scalar> values);

/**
 * Gaussian-word dictionary: every ladder bandwidth at every center, stored
 * center-major, so the word at flat index s = i |B| + j is centered at point i
 * with bandwidth values[j].
 */
struct Dictionary {
  std::vector<GaussianWord> words;
  BandwidthLadder ladder;
  Index center_count = 0;

  Index size() const { return static_cast<Index>(words.size()); }
  Index level_count() const { return static_cast<Index>(ladder.values.size()); }
  int dim() const { return words.empty() ? 0 : words.front().dim(); }

  Index flat_index(Index center, Index level) const;
  std::pair<Index, Index> split_index(Index s) const;  // (center, level)
};

Dictionary build_dictionary(const Eigen::Ref<const Matrix>& centers, const BandwidthLadder& ladder);

}  // namespace skde
