#include "skde/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "skde/parallel.hpp"

namespace skde {

namespace {

void append_error(std::string& acc, const std::string& msg) {
  if (!acc.empty()) acc += "; ";
  acc += msg;
}

int default_j_max(LadderVariant v) { return v == LadderVariant::B1 ? 5 : 10; }

IntegratorSpec ise_spec_for(const ScenarioSpec& spec, const Dictionary& dict) {
  IntegratorSpec integ;
  integ.resolution = spec.ise_resolution > 0 ? spec.ise_resolution : default_resolution(dict.dim());
  integ.bounds = box_union(bounding_box(spec.target),
                           bounding_box(std::span<const GaussianWord>(dict.words)));
  return integ;
}

}  // namespace

void validate_scenario(const ScenarioSpec& spec) {
  std::string errors;
  if (spec.name.empty()) append_error(errors, "name must be non-empty");
  if (spec.sample_count < 8) append_error(errors, "N must be at least 8");
  if (spec.sample_count % 4 != 0) append_error(errors, "N must be divisible by 4");
  try {
    validate_mixture(spec.target);
  } catch (const ArgumentError& e) {
    append_error(errors, std::string("target: ") + e.what());
  }
  if (spec.stages < 1) append_error(errors, "stages must be >= 1");
  if (!(spec.theta >= 2.0)) append_error(errors, "theta must be >= 2");
  if (!(spec.epsilon >= 0.0)) append_error(errors, "epsilon must be >= 0");
  if (spec.replicates < 1) append_error(errors, "replicates must be >= 1");
  if (spec.dict.variant != LadderVariant::B1 && spec.dict.variant != LadderVariant::B2)
    append_error(errors, "dictionary variant must be b1 or b2");
  if (!(spec.dict.eta >= 0.0)) append_error(errors, "dictionary eta must be >= 0");
  if (spec.dict.j_max < 0) append_error(errors, "dictionary j_max must be >= 0");
  if (spec.ise_resolution != 0 && spec.ise_resolution < 32)
    append_error(errors, "ise_resolution must be 0 or >= 32");
  if (spec.fit_resolution < 32) append_error(errors, "fit_resolution must be >= 32");
  if (spec.recorded_stages.empty()) append_error(errors, "recorded_stages must be non-empty");
  for (const int s : spec.recorded_stages)
    if (s < 1) {
      append_error(errors, "recorded_stages entries must be >= 1");
      break;
    }
  if (!errors.empty()) throw ArgumentError("scenario: " + errors);
}

SplitSample split_sample(const Eigen::Ref<const Matrix>& data, SplitCase which, RandomStream& rng) {
  const Index n = data.rows();
  if (n < 8) throw ArgumentError("split_sample: need at least 8 rows");
  if (n % 4 != 0) throw ArgumentError("split_sample: sample size must be divisible by 4");

  const std::vector<Index> perm = rng.permutation(n);
  auto take = [&](Index lo, Index hi) {
    Matrix out(hi - lo, data.cols());
    for (Index i = lo; i < hi; ++i) out.row(i - lo) = data.row(perm[static_cast<std::size_t>(i)]);
    return out;
  };

  switch (which) {
    case SplitCase::A:
      return {take(0, n / 4), take(n / 4, n)};
    case SplitCase::B:
      return {take(0, n / 2), take(n / 2, n)};
    case SplitCase::C:
      return {take(0, 3 * n / 4), take(3 * n / 4, n)};
    case SplitCase::D: {
      Matrix half = take(0, n / 2);
      return {half, half};
    }
    case SplitCase::E:
      return {take(0, n), take(0, n)};
  }
  throw ArgumentError("split_sample: unknown case");
}

Matrix sample_mixture(const MixtureDensity& m, Index n, RandomStream& rng) {
  validate_mixture(m);
  const int d = m.dim();
  std::vector<Matrix> chol;
  chol.reserve(m.components.size());
  for (const auto& c : m.components) chol.push_back(Eigen::LLT<Matrix>(c.cov).matrixL());

  Matrix out(n, d);
  for (Index i = 0; i < n; ++i) {
    const Scalar pick = rng.uniform();
    Scalar cum = 0.0;
    std::size_t component = m.components.size() - 1;
    for (std::size_t c = 0; c < m.components.size(); ++c) {
      cum += m.components[c].weight;
      if (pick < cum) {
        component = c;
        break;
      }
    }
    const Vector z = rng.normal_vector(d);
    out.row(i) = (m.components[component].mean + chol[component] * z).transpose();
  }
  return out;
}

Scalar ise(const DensityHandle& a, const DensityHandle& b, const IntegratorSpec& spec) {
  if (a.dim() != b.dim()) throw ArgumentError("ise: dimension mismatch");
  if (a.gaussian_sum() != nullptr && b.gaussian_sum() != nullptr) {
    const auto& sa = *a.gaussian_sum();
    const auto& sb = *b.gaussian_sum();
    return l2_inner(sa, sa) - 2.0 * l2_inner(sa, sb) + l2_inner(sb, sb);
  }
  IntegratorSpec resolved = spec;
  if (resolved.bounds.empty()) {
    Box box;
    if (a.gaussian_sum()) box = box_union(box, bounding_box(*a.gaussian_sum()));
    if (b.gaussian_sum()) box = box_union(box, bounding_box(*b.gaussian_sum()));
    if (box.empty()) throw ArgumentError("ise: bounds unresolved and neither handle offers a box");
    resolved.bounds = std::move(box);
  }
  if (resolved.mode == IntegratorMode::TensorGrid) {
    GridQuadrature grid(resolved);
    const auto sums = deterministic_sums<3>(grid.size(), [&](Index idx, std::array<Scalar, 3>& acc) {
      thread_local Vector x;
      grid.node(idx, x);
      const Scalar w = grid.weight(idx);
      const Scalar av = a(x);
      const Scalar bv = b(x);
      acc[0] = w * (av - bv) * (av - bv);
      acc[1] = w * av;
      acc[2] = w * bv;
    });
    auto check = [](Scalar got, const std::optional<Scalar>& expected) {
      if (expected &&
          std::abs(got - *expected) > 1e-3 * std::max(Scalar(1), std::abs(*expected)))
        throw CoverageError("ise: integration box captures " + std::to_string(got) +
                            " of an expected mass " + std::to_string(*expected));
    };
    check(sums[1], a.analytic_mass());
    check(sums[2], b.analytic_mass());
    return sums[0];
  }
  return integrate([&](const Vector& x) {
    const Scalar diff = a(x) - b(x);
    return diff * diff;
  }, resolved);
}

DensityHandle kde_baseline(const Eigen::Ref<const Matrix>& data, Scalar bandwidth_scale) {
  const Index n = data.rows();
  const Index d = data.cols();
  if (n < 2) throw DegenerateDataError("kde_baseline: need at least 2 points");
  if (!(bandwidth_scale > 0.0)) throw ArgumentError("kde_baseline: bandwidth scale must be positive");
  const Scalar shrink = std::pow(static_cast<Scalar>(n), -1.0 / (static_cast<Scalar>(d) + 4.0));
  Matrix cov = Matrix::Zero(d, d);
  for (Index p = 0; p < d; ++p) {
    const Scalar mean = data.col(p).mean();
    const Scalar sd = std::sqrt((data.col(p).array() - mean).square().sum() / static_cast<Scalar>(n - 1));
    if (!(sd > 0.0))
      throw DegenerateDataError("kde_baseline: axis " + std::to_string(p) + " has zero variance");
    const Scalar h = sd * shrink * bandwidth_scale;
    cov(p, p) = h * h;
  }
  GaussianSum sum;
  sum.weights.assign(static_cast<std::size_t>(n), 1.0 / static_cast<Scalar>(n));
  sum.means.reserve(static_cast<std::size_t>(n));
  sum.covs.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    sum.means.push_back(data.row(i).transpose());
    sum.covs.push_back(cov);
  }
  auto shared = std::make_shared<GaussianSum>(sum);
  return DensityHandle(
      static_cast<int>(d), [shared](const Vector& x) { return eval_density(*shared, x); }, 1.0,
      std::move(sum));
}

ReplicateOutcome run_replicate(const ScenarioSpec& spec, std::uint64_t replicate) {
  validate_scenario(spec);
  RandomStream rng = RandomStream::for_replicate(spec.seed, replicate);
  Matrix data = sample_mixture(spec.target, spec.sample_count, rng);
  SplitSample split = split_sample(data, spec.split_case, rng);

  const int j_max = spec.dict.j_max > 0 ? spec.dict.j_max : default_j_max(spec.dict.variant);
  const BandwidthLadder ladder = spec.dict.variant == LadderVariant::B1
                                     ? build_b1(split.dictionary_points, j_max)
                                     : build_b2(split.dictionary_points, spec.dict.eta, j_max);
  Dictionary dict = build_dictionary(split.dictionary_points, ladder);

  FitConfig cfg(spec.family);
  cfg.stages = spec.stages;
  cfg.theta = spec.theta;
  cfg.epsilon = spec.epsilon;
  cfg.integ.resolution = spec.fit_resolution;
  for (const int s : spec.recorded_stages)
    if (s <= spec.stages) cfg.snapshot_stages.push_back(s);
  StagewiseEstimate est = fit(dict, split.loss_points, cfg);
  return ReplicateOutcome(std::move(data), std::move(split), std::move(dict), std::move(est));
}

RunResult run_scenario(const ScenarioSpec& spec) {
  validate_scenario(spec);
  std::vector<int> stages;
  for (const int s : spec.recorded_stages)
    if (s <= spec.stages) stages.push_back(s);
  std::sort(stages.begin(), stages.end());
  stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
  if (stages.empty()) throw ArgumentError("run_scenario: no recorded stage is <= stages");

  const DensityHandle target = DensityHandle::of(spec.target);
  RunResult result;
  result.stages = stages;
  result.per_replicate_ise.resize(spec.replicates, static_cast<Index>(stages.size()));

  Scalar sum_up = 0, sum_uw = 0, sum_rp = 0, sum_rw = 0;
  for (int r = 0; r < spec.replicates; ++r) {
    const ReplicateOutcome outcome = run_replicate(spec, static_cast<std::uint64_t>(r));
    const IntegratorSpec integ = ise_spec_for(spec, outcome.dictionary);
    for (std::size_t si = 0; si < stages.size(); ++si) {
      const int stage = stages[si];
      const auto snap = std::find_if(outcome.estimate.snapshots.begin(), outcome.estimate.snapshots.end(),
                                     [stage](const StageSnapshot& s) { return s.stage == stage; });
      if (snap == outcome.estimate.snapshots.end())
        throw FitFailure("run_scenario: stage " + std::to_string(stage) + " was not recorded");
      const DensityHandle est = DensityHandle::of(snap->combination, outcome.dictionary.words);
      result.per_replicate_ise(r, static_cast<Index>(si)) = ise(est, target, integ);
    }
    const CondensationMetrics cm = condensation_metrics(outcome.estimate, outcome.dictionary);
    result.per_replicate_condensation.push_back(cm);
    sum_up += static_cast<Scalar>(cm.unique_points);
    sum_uw += static_cast<Scalar>(cm.unique_words);
    sum_rp += cm.ratio_points;
    sum_rw += cm.ratio_words;
  }

  const auto reps = static_cast<Scalar>(spec.replicates);
  result.condensation = {sum_up / reps, sum_uw / reps, sum_rp / reps, sum_rw / reps};
  for (std::size_t si = 0; si < stages.size(); ++si) {
    const auto col = result.per_replicate_ise.col(static_cast<Index>(si));
    const Scalar mean = col.mean();
    Scalar sd = 0.0;
    if (spec.replicates > 1)
      sd = std::sqrt((col.array() - mean).square().sum() / (reps - 1.0));
    result.mise_by_stage.push_back(mean);
    result.mise_sd.push_back(sd);
  }
  return result;
}

}  // namespace skde
