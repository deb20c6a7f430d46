#include "skde/bounds.hpp"

#include <algorithm>
#include <cmath>

#include "skde/loss.hpp"
#include "skde/parallel.hpp"

namespace skde {

namespace {

constexpr Scalar kLog2Pi = 1.8378770664093454836;
const Scalar kLogFloor = std::log(kDensityFloor);

/// E_{X~f} |X - v|^2 for a Gaussian mixture f.
Scalar mixture_expected_sq_dist(const MixtureDensity& f, const Vector& v) {
  Scalar acc = 0.0;
  for (const auto& c : f.components)
    acc += c.weight * ((c.mean - v).squaredNorm() + c.cov.trace());
  return acc;
}

/// \int f log phi for an isotropic word phi, in closed form.
Scalar mixture_log_word_moment(const MixtureDensity& f, const GaussianWord& w) {
  const Scalar d = static_cast<Scalar>(w.dim());
  const Scalar h2 = w.h * w.h;
  return -0.5 * d * (kLog2Pi + std::log(h2)) - mixture_expected_sq_dist(f, w.center) / (2.0 * h2);
}

/// \int phi^beta f in closed form: phi^beta is a scaled Gaussian.
Scalar mixture_power_word_moment(const MixtureDensity& f, const GaussianWord& w, Scalar beta) {
  const int d = w.dim();
  const Scalar h2 = w.h * w.h;
  const Scalar dd = static_cast<Scalar>(d);
  const Scalar log_amp = 0.5 * dd * ((1.0 - beta) * (kLog2Pi + std::log(h2)) - std::log(beta));
  const Matrix widened = Matrix::Identity(d, d) * (h2 / beta);
  Scalar mix = 0.0;
  for (const auto& c : f.components)
    mix += c.weight * mvn_cross_integral(w.center, widened, c.mean, c.cov);
  return std::exp(log_amp) * mix;
}

/// \int phi^{beta+1} for an isotropic word, in closed form.
Scalar word_power_mass(const GaussianWord& w, Scalar beta) {
  const Scalar d = static_cast<Scalar>(w.dim());
  const Scalar h2 = w.h * w.h;
  return std::exp(-0.5 * d * (beta * (kLog2Pi + std::log(h2)) + std::log(beta + 1.0)));
}

std::vector<GaussianWord> dictionary_centers_as_words(const Dictionary& dict) {
  std::vector<GaussianWord> out;
  out.reserve(static_cast<std::size_t>(dict.center_count));
  for (Index i = 0; i < dict.center_count; ++i)
    out.push_back(dict.words[static_cast<std::size_t>(dict.flat_index(i, 0))]);
  return out;
}

}  // namespace

TripleCurvature triple_curvature(const GaussianWord& a, const GaussianWord& b,
                                        const GaussianWord& c) {
  if (a.dim() != b.dim() || a.dim() != c.dim())
    throw ArgumentError("triple_curvature: dimension mismatch");
  const Scalar d = static_cast<Scalar>(a.dim());
  const Scalar h_ab = a.h / b.h;
  const Scalar h_ac = a.h / c.h;
  TripleCurvature out;
  out.c1 = 0.5 * (h_ac * h_ac - h_ab * h_ab);
  out.c2 = (h_ac * h_ac * (a.center - c.center) - h_ab * h_ab * (a.center - b.center)) / a.h;
  out.c3 = (a.center - c.center).squaredNorm() / (2.0 * c.h * c.h) -
           (a.center - b.center).squaredNorm() / (2.0 * b.h * b.h) + d * std::log(c.h / b.h);
  const Scalar mixed = d * out.c1 + out.c3;
  out.j = 2.0 * d * out.c1 * out.c1 + out.c2.squaredNorm() + mixed * mixed;
  return out;
}

Scalar j_quadrature_oracle(const GaussianWord& a, const GaussianWord& b, const GaussianWord& c,
                           IntegratorSpec spec) {
  if (a.dim() != b.dim() || a.dim() != c.dim())
    throw ArgumentError("j_quadrature_oracle: dimension mismatch");
  if (spec.bounds.empty()) {
    // The weight phi_a decays like exp(-8^2/2) at the box edge, far below the
    // comparison tolerances; 8 sigma instead of the usual 6 keeps the
    // polynomial factor harmless.
    spec.bounds = bounding_box(std::span<const GaussianWord>(&a, 1), 8.0);
  }
  return integrate(
      [&](const Vector& x) {
        const Scalar ratio = log_density(b, x) - log_density(c, x);
        return eval_density(a, x) * ratio * ratio;
      },
      spec);
}

BklBound bkl_upper_bound(const Dictionary& dict) {
  if (dict.size() < 1) throw ArgumentError("bkl_upper_bound: empty dictionary");
  BklBound out;
  out.h_min = std::numeric_limits<Scalar>::infinity();
  out.h_max = 0.0;
  for (const auto& w : dict.words) {
    out.h_min = std::min(out.h_min, w.h);
    out.h_max = std::max(out.h_max, w.h);
  }
  out.h_ratio = out.h_max / out.h_min;
  out.radius_sq = 0.0;
  const auto centers = dictionary_centers_as_words(dict);
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 1; j < centers.size(); ++j)
      out.radius_sq = std::max(out.radius_sq, (centers[i].center - centers[j].center).squaredNorm());

  const Scalar d = static_cast<Scalar>(dict.dim());
  const Scalar r2 = out.h_ratio * out.h_ratio;
  const Scalar mixed = d * r2 + out.radius_sq / (out.h_min * out.h_min) + d * std::log(out.h_ratio);
  out.value = 2.0 * d * r2 * r2 +
              4.0 * (r2 / out.h_min) * (r2 / out.h_min) * out.radius_sq + mixed * mixed;
  return out;
}

NuSupResult nu_n_sup(const Dictionary& dict, const DivergenceFamily& fam, const MixtureDensity& f,
                     const Eigen::Ref<const Matrix>& samples) {
  validate_mixture(f);
  if (dict.dim() != f.dim()) throw ArgumentError("nu_n_sup: dictionary/target dimension mismatch");
  if (static_cast<int>(samples.cols()) != dict.dim())
    throw ArgumentError("nu_n_sup: sample dimension mismatch");
  const Index n = samples.rows();
  if (n < 1) throw ArgumentError("nu_n_sup: empty sample");

  const Index count = dict.size();
  std::vector<Scalar> deviation(static_cast<std::size_t>(count));
  const Index blocks = (count + 15) / 16;
  detail::run_chunked(blocks, [&](Index blk) {
    const Index lo = blk * 16;
    const Index hi = std::min(count, lo + 16);
    for (Index w = lo; w < hi; ++w) {
      const auto& word = dict.words[static_cast<std::size_t>(w)];
      const ArrayX sq = (samples.rowwise() - word.center.transpose()).rowwise().squaredNorm();
      const Scalar h2 = word.h * word.h;
      const ArrayX lp = -0.5 * static_cast<Scalar>(dict.dim()) * (kLog2Pi + std::log(h2)) - sq / (2.0 * h2);
      Scalar emp, pop;
      if (fam.kind() == FamilyKind::KL) {
        emp = lp.max(kLogFloor).mean();
        pop = mixture_log_word_moment(f, word);
      } else {
        const Scalar beta = fam.beta();
        emp = (((beta * lp).exp() - 1.0) / beta).mean();
        pop = (mixture_power_word_moment(f, word, beta) - 1.0) / beta;
      }
      deviation[static_cast<std::size_t>(w)] = std::abs(emp - pop);
    }
  });

  NuSupResult out;
  for (Index w = 0; w < count; ++w)
    if (deviation[static_cast<std::size_t>(w)] > out.value) {
      out.value = deviation[static_cast<std::size_t>(w)];
      out.word = w;
    }
  if (out.word < 0) out.word = 0;
  return out;
}

RiskBoundReport risk_bound_check(const ScenarioSpec& spec) {
  validate_scenario(spec);
  if (!spec.finite_fourth_moment)
    throw ArgumentError(
        "risk_bound_check: the bound terms rely on finite fourth moments, which this scenario "
        "disclaims");

  const DivergenceFamily fam = spec.family;
  const MixtureDensity& f = spec.target;
  const DensityHandle f_handle = DensityHandle::of(f);
  const int d = f.dim();

  // Shared target-only integrals, by quadrature once per call.
  IntegratorSpec target_integ;
  target_integ.resolution = default_resolution(d);
  target_integ.bounds = bounding_box(f);
  Scalar f_log_f = 0.0;    // \int f log f   (KL)
  Scalar f_pow = 0.0;      // \int f^{beta+1} (power families)
  if (fam.kind() == FamilyKind::KL) {
    f_log_f = integrate(
        [&](const Vector& x) {
          const Scalar v = eval_density(f, x);
          return v <= 0.0 ? 0.0 : v * std::log(v);
        },
        target_integ);
  } else {
    f_pow = integrate(
        [&](const Vector& x) { return std::pow(eval_density(f, x), fam.beta() + 1.0); },
        target_integ);
  }

  RiskBoundReport report;
  report.b_term_heuristic = fam.kind() != FamilyKind::KL;
  report.epsilon = spec.epsilon;
  report.replicates = spec.replicates;

  Scalar lhs_sum = 0, hull_sum = 0, nu_sum = 0, b_sum = 0, mass_sum = 0, mass_dev_sum = 0;
  for (int r = 0; r < spec.replicates; ++r) {
    const ReplicateOutcome outcome = run_replicate(spec, static_cast<std::uint64_t>(r));
    const Dictionary& dict = outcome.dictionary;
    const DensityHandle est = DensityHandle::of(outcome.estimate.combination, dict.words);

    // Achieved divergence of the raw (unnormalized) estimate.
    Scalar lhs_r;
    Scalar mass_r;
    if (fam.kind() == FamilyKind::KL) {
      const auto& sum = *est.gaussian_sum();  // KL estimates are one scaled Gaussian
      const Scalar gamma = sum.weights[0];
      const Scalar prec = 1.0 / sum.covs[0](0, 0);
      const Scalar f_log_est = std::log(gamma) - 0.5 * static_cast<Scalar>(d) * (kLog2Pi - std::log(prec)) -
                               0.5 * prec * mixture_expected_sq_dist(f, sum.means[0]);
      lhs_r = f_log_f - f_log_est + gamma - 1.0;
      mass_r = gamma;
    } else {
      IntegratorSpec div_integ;
      div_integ.resolution = default_resolution(d);
      div_integ.bounds = box_union(bounding_box(f),
                                   bounding_box(std::span<const GaussianWord>(dict.words)));
      lhs_r = u_divergence(fam, f_handle, est, div_integ);
      if (est.analytic_mass())
        mass_r = *est.analytic_mass();
      else
        mass_r = integrate([&](const Vector& x) { return est(x); }, div_integ);
    }

    // Best single-word divergence bounds the infimum over the convex hull.
    const GaussianSum fs = to_gaussian_sum(f);
    const Scalar ff = fam.is_beta(1.0) ? l2_inner(fs, fs) : 0.0;
    Scalar hull_r = std::numeric_limits<Scalar>::infinity();
    for (const auto& w : dict.words) {
      Scalar div;
      if (fam.kind() == FamilyKind::KL) {
        div = f_log_f - mixture_log_word_moment(f, w);
      } else if (fam.beta() == 1.0) {
        const GaussianSum ws = to_gaussian_sum(w);
        div = 0.5 * (ff - 2.0 * l2_inner(fs, ws) + l2_inner(ws, ws));
      } else {
        const Scalar beta = fam.beta();
        div = word_power_mass(w, beta) / (beta + 1.0) + f_pow / (beta * (beta + 1.0)) -
              mixture_power_word_moment(f, w, beta) / beta;
      }
      hull_r = std::min(hull_r, div);
    }

    const Scalar nu_r = 2.0 * nu_n_sup(dict, fam, f, outcome.split.loss_points).value;
    const Scalar m_stages = static_cast<Scalar>(spec.stages);
    const Scalar b_r =
        spec.theta * spec.theta / (m_stages + spec.theta - 1.0) * bkl_upper_bound(dict).value;

    lhs_sum += lhs_r;
    hull_sum += hull_r;
    nu_sum += nu_r;
    b_sum += b_r;
    mass_sum += mass_r;
    mass_dev_sum += std::abs(1.0 - 1.0 / mass_r);
  }

  const auto reps = static_cast<Scalar>(spec.replicates);
  report.lhs = lhs_sum / reps;
  report.hull_term = hull_sum / reps;
  report.nu_term = nu_sum / reps;
  report.b_term = b_sum / reps;
  report.mass_mean = mass_sum / reps;
  report.mass_dev_mean = mass_dev_sum / reps;
  report.pass = report.lhs <= report.hull_term + report.nu_term + report.b_term + report.epsilon;
  return report;
}

}  // namespace skde
