#include "skde/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "skde/parallel.hpp"
#include "skde/rng.hpp"

namespace skde {

namespace {

constexpr Scalar kLog2Pi = 1.8378770664093454836;
const Scalar kLogFloor = std::log(kDensityFloor);

bool same_family(const DivergenceFamily& a, const DivergenceFamily& b) {
  if (a.kind() != b.kind()) return false;
  return a.kind() == FamilyKind::KL || a.beta() == b.beta();
}

enum class EngineMode { BetaOne, KL, BetaGrid };

/**
 * Precomputed per-word tables that make one stage-loss evaluation cheap:
 *
 *   sample term   -(1/n) sum_i xi(phi_w(X_i)) is linear in xi scale, so any
 *                 candidate's sample term is a two-term affine combination of
 *                 table entries, for every family;
 *   convex term   beta = 1: Gaussian cross integrals (exact);
 *                 KL: the combination is one scaled Gaussian whose mass has a
 *                 closed form in four running accumulators (exact);
 *                 0 < beta < 1: phi^beta tabulated on the loss grid, so the
 *                 candidate's integrand is an affine combination of columns.
 *
 * fit() and stage_loss_probe() both evaluate candidates through context() +
 * probe(), which makes the probe reproduce fit's comparisons bit-for-bit.
 */
class StageLossEngine {
 public:
  StageLossEngine(const Dictionary& dict, const Eigen::Ref<const Matrix>& samples,
                  const FitConfig& cfg)
      : dict_(&dict), fam_(cfg.family), dim_(dict.dim()) {
    const Index n = samples.rows();
    const Index count = dict.size();
    if (count < 1) throw ArgumentError("fit: empty dictionary");
    if (n < 1) throw ArgumentError("fit: empty loss sample");
    if (static_cast<int>(samples.cols()) != dim_) throw ArgumentError("fit: sample dimension mismatch");
    if (!samples.allFinite()) throw ArgumentError("fit: sample contains non-finite values");

    if (fam_.kind() == FamilyKind::KL)
      mode_ = EngineMode::KL;
    else if (fam_.beta() == 1.0)
      mode_ = EngineMode::BetaOne;
    else
      mode_ = EngineMode::BetaGrid;

    centers_.resize(dim_, count);
    h2_.resize(count);
    log_norm_.resize(count);
    for (Index w = 0; w < count; ++w) {
      const auto& word = dict.words[static_cast<std::size_t>(w)];
      centers_.col(w) = word.center;
      h2_(w) = word.h * word.h;
      log_norm_(w) = kLog2Pi + 2.0 * std::log(word.h);
    }

    if (mode_ == EngineMode::BetaGrid) build_grid(cfg);
    build_sample_table(samples);
    if (mode_ == EngineMode::BetaOne) {
      self_ = ArrayX(count);
      for (Index w = 0; w < count; ++w) self_(w) = cross(w, w);
    }
    if (mode_ == EngineMode::KL) {
      inv_h2_ = 1.0 / h2_.array();
      center_sq_ = centers_.colwise().squaredNorm().transpose().array();
      csq_h2_ = center_sq_ * inv_h2_;
      csq_h4_ = csq_h2_ * inv_h2_;
    }
  }

  struct Context {
    Scalar weight_total = 0.0;
    Scalar sample_prev = 0.0;
    // BetaOne
    Scalar quad_prev = 0.0;
    ArrayX cross_q;
    // KL
    Scalar prec_prev = 0.0, ssq_prev = 0.0, r_prev = 0.0, log_prev = 0.0;
    ArrayX s_dot_c_h2;
    // BetaGrid
    ArrayX p_prev;
  };

  Context context(const XiCombination& prev) const {
    if (!same_family(prev.family, fam_))
      throw ArgumentError("stage loss: combination family differs from the fit family");
    const Index count = dict_->size();
    for (const auto& term : prev.terms)
      if (term.word < 0 || term.word >= count)
        throw ArgumentError("stage loss: combination references a word outside the dictionary");

    Context ctx;
    for (const auto& [word, weight] : prev.terms) {
      ctx.weight_total += weight;
      ctx.sample_prev += weight * sample_term_(word);
    }
    switch (mode_) {
      case EngineMode::BetaOne: {
        ctx.cross_q = ArrayX::Zero(count);
        const Index blocks = (count + 255) / 256;
        detail::run_chunked(blocks, [&](Index b) {
          const Index lo = b * 256;
          const Index hi = std::min(count, lo + 256);
          for (Index w = lo; w < hi; ++w) {
            Scalar acc = 0.0;
            for (const auto& [word, weight] : prev.terms) acc += weight * cross(word, w);
            ctx.cross_q(w) = acc;
          }
        });
        for (const auto& [wa, qa] : prev.terms)
          for (const auto& [wb, qb] : prev.terms) ctx.quad_prev += qa * qb * cross(wa, wb);
        break;
      }
      case EngineMode::KL: {
        Vector s = Vector::Zero(dim_);
        for (const auto& [word, weight] : prev.terms) {
          const Scalar wi = weight * inv_h2_(word);
          ctx.prec_prev += wi;
          s += wi * centers_.col(word);
          ctx.r_prev += weight * csq_h2_(word);
          ctx.log_prev += weight * log_norm_(word);
        }
        ctx.ssq_prev = s.squaredNorm();
        ctx.s_dot_c_h2 = (s.transpose() * centers_).transpose().array() * inv_h2_;
        break;
      }
      case EngineMode::BetaGrid: {
        ctx.p_prev = ArrayX::Zero(grid_weights_.size());
        for (const auto& [word, weight] : prev.terms) ctx.p_prev += weight * power_table_.col(word).array();
        break;
      }
    }
    return ctx;
  }

  LossValue probe(const Context& ctx, Scalar pi, Index w) const {
    const Scalar keep = 1.0 - pi;
    const Scalar sample = keep * ctx.sample_prev + pi * sample_term_(w);
    Scalar integral = 0.0;
    switch (mode_) {
      case EngineMode::BetaOne:
        integral = 0.5 * (keep * keep * ctx.quad_prev + 2.0 * pi * keep * ctx.cross_q(w) +
                          pi * pi * self_(w));
        break;
      case EngineMode::KL: {
        const Scalar prec = keep * ctx.prec_prev + pi * inv_h2_(w);
        const Scalar ssq =
            keep * keep * ctx.ssq_prev + 2.0 * pi * keep * ctx.s_dot_c_h2(w) + pi * pi * csq_h4_(w);
        const Scalar r = keep * ctx.r_prev + pi * csq_h2_(w);
        const Scalar lg = keep * ctx.log_prev + pi * log_norm_(w);
        const Scalar d = static_cast<Scalar>(dim_);
        integral = std::exp(-0.5 * d * lg - 0.5 * (r - ssq / prec) + 0.5 * d * (kLog2Pi - std::log(prec)));
        break;
      }
      case EngineMode::BetaGrid: {
        const Scalar beta = fam_.beta();
        const Scalar offset = 1.0 - (keep * ctx.weight_total + pi);
        const auto base =
            (keep * ctx.p_prev + pi * power_table_.col(w).array() + offset).max(Scalar(0));
        Scalar raw;
        if (beta == 0.5)
          raw = (base.cube() * grid_weights_).sum();
        else
          raw = (base.pow((beta + 1.0) / beta) * grid_weights_).sum();
        integral = raw / (beta + 1.0);
        break;
      }
    }
    return LossValue::of(sample, integral);
  }

  Index word_count() const { return dict_->size(); }

 private:
  Scalar cross(Index a, Index b) const {
    const Scalar s2 = h2_(a) + h2_(b);
    const Scalar sq = (centers_.col(a) - centers_.col(b)).squaredNorm();
    return std::exp(-0.5 * static_cast<Scalar>(dim_) * (kLog2Pi + std::log(s2)) - sq / (2.0 * s2));
  }

  void build_grid(const FitConfig& cfg) {
    IntegratorSpec spec = resolve_bounds(cfg.integ, bounding_box(std::span<const GaussianWord>(dict_->words)));
    Matrix nodes;
    if (spec.mode == IntegratorMode::TensorGrid) {
      GridQuadrature grid(spec);
      nodes = grid.nodes_matrix();
      grid_weights_ = grid.weights_array();
    } else {
      if (spec.samples < 1) throw ArgumentError("fit: MonteCarlo loss integration needs samples >= 1");
      RandomStream stream(spec.seed);
      nodes.resize(spec.samples, dim_);
      Scalar volume = 1.0;
      for (const auto& [lo, hi] : spec.bounds) volume *= hi - lo;
      for (Index i = 0; i < nodes.rows(); ++i)
        for (Index p = 0; p < dim_; ++p) {
          const auto& [lo, hi] = spec.bounds[static_cast<std::size_t>(p)];
          nodes(i, p) = lo + stream.uniform() * (hi - lo);
        }
      grid_weights_ = ArrayX::Constant(spec.samples, volume / static_cast<Scalar>(spec.samples));
    }
    const Scalar beta = fam_.beta();
    const Index count = dict_->size();
    power_table_.resize(nodes.rows(), count);
    const Index blocks = (count + 15) / 16;
    detail::run_chunked(blocks, [&](Index b) {
      const Index lo = b * 16;
      const Index hi = std::min(count, lo + 16);
      for (Index w = lo; w < hi; ++w) {
        const ArrayX sq = (nodes.rowwise() - centers_.col(w).transpose()).rowwise().squaredNorm();
        power_table_.col(w) =
            (beta * (-0.5 * static_cast<Scalar>(dim_) * log_norm_(w) - sq / (2.0 * h2_(w)))).exp();
      }
    });
  }

  void build_sample_table(const Eigen::Ref<const Matrix>& samples) {
    const Index count = dict_->size();
    const auto n = static_cast<Scalar>(samples.rows());
    sample_term_.resize(count);
    const Index blocks = (count + 15) / 16;
    detail::run_chunked(blocks, [&](Index b) {
      const Index lo = b * 16;
      const Index hi = std::min(count, lo + 16);
      for (Index w = lo; w < hi; ++w) {
        const ArrayX sq = (samples.rowwise() - centers_.col(w).transpose()).rowwise().squaredNorm();
        const ArrayX lp = -0.5 * static_cast<Scalar>(dim_) * log_norm_(w) - sq / (2.0 * h2_(w));
        Scalar total;
        if (fam_.kind() == FamilyKind::KL) {
          total = lp.max(kLogFloor).sum();
        } else if (fam_.beta() == 1.0) {
          total = (lp.exp() - 1.0).sum();
        } else {
          total = ((fam_.beta() * lp).exp() - 1.0).sum() / fam_.beta();
        }
        sample_term_(w) = -total / n;
      }
    });
  }

  const Dictionary* dict_;
  DivergenceFamily fam_;
  int dim_;
  EngineMode mode_ = EngineMode::BetaOne;
  Matrix centers_;   // dim x |D|
  ArrayX h2_, log_norm_, sample_term_;
  ArrayX self_;                          // BetaOne
  ArrayX inv_h2_, center_sq_, csq_h2_, csq_h4_;  // KL
  Matrix power_table_;                   // BetaGrid: grid nodes x |D|
  ArrayX grid_weights_;
};

void validate_config(const FitConfig& cfg) {
  if (cfg.stages < 1) throw ArgumentError("fit: stages must be >= 1");
  if (cfg.tie_break != TieBreak::LowestIndex) throw ArgumentError("fit: unknown tie-break rule");
  if (!(cfg.epsilon >= 0.0)) throw ArgumentError("fit: epsilon must be >= 0");
  for (const int s : cfg.snapshot_stages)
    if (s < 1 || s > cfg.stages)
      throw ArgumentError("fit: snapshot stage " + std::to_string(s) + " outside 1.." +
                          std::to_string(cfg.stages));
}

}  // namespace

MixingCoefficients mixing_coefficients(int stages, Scalar theta) {
  if (stages < 1) throw ArgumentError("mixing_coefficients: stages must be >= 1");
  if (!(theta >= 2.0)) throw ArgumentError("mixing_coefficients: theta must be >= 2");
  MixingCoefficients mix;
  mix.pi.resize(static_cast<std::size_t>(stages));
  mix.q.resize(static_cast<std::size_t>(stages));
  for (int k = 0; k < stages; ++k)
    mix.pi[static_cast<std::size_t>(k)] = theta / (static_cast<Scalar>(k) + theta);
  Scalar suffix = 1.0;
  for (int l = stages - 1; l >= 0; --l) {
    mix.q[static_cast<std::size_t>(l)] = mix.pi[static_cast<std::size_t>(l)] * suffix;
    suffix *= 1.0 - mix.pi[static_cast<std::size_t>(l)];
  }
  return mix;
}

StagewiseEstimate fit(const Dictionary& dict, const Eigen::Ref<const Matrix>& samples,
                      const FitConfig& cfg) {
  validate_config(cfg);
  const MixingCoefficients mix = mixing_coefficients(cfg.stages, cfg.theta);
  const StageLossEngine engine(dict, samples, cfg);
  const std::set<int> snapshot_at(cfg.snapshot_stages.begin(), cfg.snapshot_stages.end());

  StagewiseEstimate est(cfg.family);
  XiCombination prev(cfg.family);
  for (int k = 0; k < cfg.stages; ++k) {
    const Scalar pi = mix.pi[static_cast<std::size_t>(k)];
    const auto ctx = engine.context(prev);
    const auto [arg, val] = deterministic_argmin(
        engine.word_count(), [&](Index w) { return engine.probe(ctx, pi, w).value; });
    if (arg < 0 || std::isnan(val))
      throw FitFailure("stage " + std::to_string(k + 1) + ": no candidate produced a finite loss");
    est.chosen.push_back(arg);
    est.loss_trace.push_back(engine.probe(ctx, pi, arg));
    prev = combine_stage(prev, arg, pi);
    if (snapshot_at.count(k + 1)) est.snapshots.push_back({k + 1, prev});
  }
  const Scalar total = prev.weight_sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw NumericIntegrityError("fit: final weights sum to " + std::to_string(total));
  est.combination = prev;
  return est;
}

LossValue stage_loss_probe(const Dictionary& dict, const XiCombination& prev, Scalar pi, Index word,
                           const Eigen::Ref<const Matrix>& samples, const FitConfig& cfg) {
  validate_config(cfg);
  if (!(pi >= 0.0 && pi <= 1.0)) throw ArgumentError("stage_loss_probe: pi must lie in [0, 1]");
  if (word < 0 || word >= dict.size()) throw ArgumentError("stage_loss_probe: word index out of range");
  const StageLossEngine engine(dict, samples, cfg);
  return engine.probe(engine.context(prev), pi, word);
}

NormalizedEstimate normalize(const StagewiseEstimate& est, const Dictionary& dict,
                             const IntegratorSpec& spec) {
  DensityHandle handle = DensityHandle::of(est.combination, dict.words);
  Scalar gamma;
  if (handle.analytic_mass()) {
    gamma = *handle.analytic_mass();
  } else {
    std::vector<GaussianWord> used;
    used.reserve(est.combination.terms.size());
    for (const auto& term : est.combination.terms)
      used.push_back(dict.words[static_cast<std::size_t>(term.word)]);
    gamma = integrate_density(handle, resolve_bounds(spec, bounding_box(std::span<const GaussianWord>(used))));
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw NumericIntegrityError("normalize: estimate mass " + std::to_string(gamma) +
                                " is not a positive finite number");
  std::optional<GaussianSum> scaled;
  if (handle.gaussian_sum() != nullptr) {
    scaled = *handle.gaussian_sum();
    for (Scalar& w : scaled->weights) w /= gamma;
  }
  DensityHandle normalized(
      handle.dim(), [handle, gamma](const Vector& x) { return handle(x) / gamma; }, 1.0,
      std::move(scaled));
  return {gamma, normalized};
}

CondensationMetrics condensation_metrics(const StagewiseEstimate& est, const Dictionary& dict) {
  if (est.combination.terms.empty()) throw ArgumentError("condensation_metrics: empty estimate");
  std::set<Index> words, points;
  for (const auto& term : est.combination.terms) {
    words.insert(term.word);
    points.insert(dict.split_index(term.word).first);
  }
  CondensationMetrics m;
  m.unique_words = static_cast<long>(words.size());
  m.unique_points = static_cast<long>(points.size());
  m.ratio_words = static_cast<Scalar>(m.unique_words) / static_cast<Scalar>(dict.size());
  m.ratio_points = static_cast<Scalar>(m.unique_points) / static_cast<Scalar>(dict.center_count);
  return m;
}

}  // namespace skde
