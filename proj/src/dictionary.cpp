#include "skde/dictionary.hpp"

#include <cmath>
#include <string>

namespace skde {

ReferenceBandwidth reference_bandwidth(const Eigen::Ref<const Matrix>& points) {
  const Index m = points.rows();
  const Index d = points.cols();
  if (m < 2) throw DegenerateDataError("reference_bandwidth: need at least 2 points");
  if (d < 1) throw ArgumentError("reference_bandwidth: points have no columns");

  ReferenceBandwidth out;
  out.exponent = 1.0 / (static_cast<Scalar>(d) + 4.0);
  out.extrapolated = (d != 2);
  out.sd.resize(d);
  out.per_axis.resize(d);
  const Scalar shrink = std::pow(static_cast<Scalar>(m), -out.exponent);
  Scalar log_gm = 0.0;
  for (Index p = 0; p < d; ++p) {
    const Scalar mean = points.col(p).mean();
    const Scalar ss = (points.col(p).array() - mean).square().sum();
    const Scalar sd = std::sqrt(ss / static_cast<Scalar>(m - 1));
    if (!(sd > 0.0))
      throw DegenerateDataError("reference_bandwidth: axis " + std::to_string(p) + " has zero variance");
    out.sd(p) = sd;
    out.per_axis(p) = sd * shrink;
    log_gm += std::log(out.per_axis(p));
  }
  out.h = std::exp(log_gm / static_cast<Scalar>(d));
  return out;
}

BandwidthLadder build_b1(const Eigen::Ref<const Matrix>& points, int j_max) {
  if (j_max < 1) throw ArgumentError("build_b1: j_max must be >= 1");
  const ReferenceBandwidth ref = reference_bandwidth(points);
  BandwidthLadder ladder;
  ladder.variant = LadderVariant::B1;
  ladder.j_max = j_max;
  ladder.exponent = ref.exponent;
  ladder.extrapolated = ref.extrapolated;
  const auto m = static_cast<Scalar>(points.rows());
  ladder.values.reserve(static_cast<std::size_t>(j_max));
  for (int j = 1; j <= j_max; ++j)
    ladder.values.push_back(ref.h * std::pow(m / static_cast<Scalar>(j), ref.exponent));
  return ladder;
}

BandwidthLadder build_b2(const Eigen::Ref<const Matrix>& points, Scalar eta, int j_max) {
  if (j_max < 1) throw ArgumentError("build_b2: j_max must be >= 1");
  if (!(eta >= 0.0)) throw ArgumentError("build_b2: eta must be >= 0");
  const ReferenceBandwidth ref = reference_bandwidth(points);
  const Index d = points.cols();
  Scalar log_gm_sd = 0.0;
  for (Index p = 0; p < d; ++p) log_gm_sd += std::log(ref.sd(p));
  const Scalar gm_sd = std::exp(log_gm_sd / static_cast<Scalar>(d));
  BandwidthLadder ladder;
  ladder.variant = LadderVariant::B2;
  ladder.eta = eta;
  ladder.j_max = j_max;
  ladder.exponent = ref.exponent;
  ladder.extrapolated = ref.extrapolated;
  ladder.values.reserve(static_cast<std::size_t>(j_max));
  for (int j = 1; j <= j_max; ++j) {
    const Scalar spread = 2.0 / (1.0 + eta * static_cast<Scalar>(j - 1));
    ladder.values.push_back(gm_sd * std::pow(spread, ref.exponent));
  }
  return ladder;
}

BandwidthLadder explicit_ladder(std::vector<Scalar> values) {
  if (values.empty()) throw ArgumentError("explicit_ladder: at least one bandwidth required");
  for (const Scalar h : values)
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("explicit_ladder: bandwidths must be positive");
  BandwidthLadder ladder;
  ladder.variant = LadderVariant::Explicit;
  ladder.j_max = static_cast<int>(values.size());
  ladder.values = std::move(values);
  return ladder;
}

Index Dictionary::flat_index(Index center, Index level) const {
  if (center < 0 || center >= center_count) throw ArgumentError("Dictionary: center index out of range");
  if (level < 0 || level >= level_count()) throw ArgumentError("Dictionary: ladder index out of range");
  return center * level_count() + level;
}

std::pair<Index, Index> Dictionary::split_index(Index s) const {
  if (s < 0 || s >= size()) throw ArgumentError("Dictionary: flat index out of range");
  return {s / level_count(), s % level_count()};
}

Dictionary build_dictionary(const Eigen::Ref<const Matrix>& centers, const BandwidthLadder& ladder) {
  if (centers.rows() < 1) throw ArgumentError("build_dictionary: no centers");
  if (ladder.values.empty()) throw ArgumentError("build_dictionary: empty ladder");
  for (const Scalar h : ladder.values)
    if (!(h > 0.0) || !std::isfinite(h)) throw ArgumentError("build_dictionary: ladder bandwidths must be positive");

  Dictionary dict;
  dict.ladder = ladder;
  dict.center_count = centers.rows();
  dict.words.reserve(static_cast<std::size_t>(centers.rows()) * ladder.values.size());
  for (Index i = 0; i < centers.rows(); ++i)
    for (const Scalar h : ladder.values)
      dict.words.push_back({centers.row(i).transpose(), h});
  return dict;
}

}  // namespace skde
