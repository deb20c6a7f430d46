#pragma once

#include <vector>

#include "skde/dictionary.hpp"
#include "skde/loss.hpp"

namespace skde {

enum class TieBreak { LowestIndex };

/// Stage steps pi_k = theta / (k + theta) (so pi_0 = 1) and the induced final
/// weights q_l = pi_l prod_{t>l} (1 - pi_t), which sum to 1.
struct MixingCoefficients {
  std::vector<Scalar> pi;
  std::vector<Scalar> q;
};

MixingCoefficients mixing_coefficients(int stages, Scalar theta);

struct FitConfig {
  explicit FitConfig(DivergenceFamily fam) : family(fam) {}

  static IntegratorSpec default_fit_integ() {
    IntegratorSpec s;
    s.resolution = 128;
    return s;
  }

  int stages = 100;
  Scalar theta = 2.0;
  /// Slack the stage selection is allowed.  Selection here is an exact argmin;
  /// the value is carried into bound reports unchanged.
  Scalar epsilon = 0.0;
  DivergenceFamily family;
  /// Quadrature for the convex loss term where no closed form exists
  /// (beta strictly between 0 and 1).  Empty bounds resolve to the dictionary
  /// box; the resolution deliberately trades accuracy for stage throughput.
  IntegratorSpec integ = default_fit_integ();
  TieBreak tie_break = TieBreak::LowestIndex;
  /// 1-based stage counts whose combinations are recorded along the way.
  std::vector<int> snapshot_stages;
};

struct StageSnapshot {
  int stage;
  XiCombination combination;
};

struct StagewiseEstimate {
  explicit StagewiseEstimate(DivergenceFamily fam) : combination(fam) {}

  XiCombination combination;
  std::vector<Index> chosen;
  std::vector<LossValue> loss_trace;
  std::vector<StageSnapshot> snapshots;
};

/**
 * Greedy stagewise minimization of the empirical loss over the dictionary.
 *
 * Stage k evaluates, for every word, the loss of the candidate obtained by
 * moving the current combination a step pi_k toward that word in xi scale, and
 * keeps the best word (ties to the lowest index).  Stage loss values come from
 * family-specialized closed or cached forms: Gaussian cross integrals at
 * beta = 1, a single scaled-Gaussian closed form under KL, and per-word tables
 * of phi^beta on a fixed grid otherwise.  stage_loss_probe reproduces these
 * values bit-for-bit, so the argmin property is machine-checkable.
 */
StagewiseEstimate fit(const Dictionary& dict, const Eigen::Ref<const Matrix>& samples,
                      const FitConfig& cfg);

/// Loss that fit would assign to stepping `prev` toward `word` with step pi.
LossValue stage_loss_probe(const Dictionary& dict, const XiCombination& prev, Scalar pi, Index word,
                           const Eigen::Ref<const Matrix>& samples, const FitConfig& cfg);

/// Estimate rescaled to integrate to 1; gamma is the mass before rescaling.
struct NormalizedEstimate {
  Scalar gamma;
  DensityHandle density;
};

NormalizedEstimate normalize(const StagewiseEstimate& est, const Dictionary& dict,
                             const IntegratorSpec& spec);

/// How concentrated the final combination is relative to what was offered.
struct CondensationMetrics {
  long unique_points = 0;
  long unique_words = 0;
  Scalar ratio_points = 0.0;  // unique_points / dictionary centers
  Scalar ratio_words = 0.0;   // unique_words / dictionary size
};

CondensationMetrics condensation_metrics(const StagewiseEstimate& est, const Dictionary& dict);

}  // namespace skde
