#include "skde/density.hpp"

#include <algorithm>
#include <cmath>

namespace skde {

namespace {

constexpr Scalar kLog2Pi = 1.8378770664093454836;
const Scalar kLogFloor = std::log(kDensityFloor);

void check_word(const GaussianWord& w) {
  if (w.center.size() == 0) throw ArgumentError("word has an empty center");
  if (!(w.h > 0.0) || !std::isfinite(w.h)) throw ArgumentError("word bandwidth must be positive and finite");
}

void check_dim(int expected, const Vector& x, const char* what) {
  if (static_cast<int>(x.size()) != expected)
    throw ArgumentError(std::string(what) + ": dimension mismatch");
}

}  // namespace

Scalar log_density(const GaussianWord& w, const Vector& x) {
  check_word(w);
  check_dim(w.dim(), x, "log_density");
  const Scalar h2 = w.h * w.h;
  const Scalar d = static_cast<Scalar>(w.dim());
  return -0.5 * d * (kLog2Pi + 2.0 * std::log(w.h)) - (x - w.center).squaredNorm() / (2.0 * h2);
}

Scalar eval_density(const GaussianWord& w, const Vector& x) { return std::exp(log_density(w, x)); }

Scalar gaussian_cross_integral(const GaussianWord& a, const GaussianWord& b) {
  check_word(a);
  check_word(b);
  if (a.dim() != b.dim()) throw ArgumentError("gaussian_cross_integral: dimension mismatch");
  const Scalar d = static_cast<Scalar>(a.dim());
  const Scalar s2 = a.h * a.h + b.h * b.h;
  const Scalar sq = (a.center - b.center).squaredNorm();
  return std::exp(-0.5 * d * (kLog2Pi + std::log(s2)) - sq / (2.0 * s2));
}

void validate_mixture(const MixtureDensity& m) {
  if (m.components.empty()) throw ArgumentError("mixture has no components");
  const int d = m.dim();
  Scalar total = 0.0;
  for (const auto& c : m.components) {
    if (static_cast<int>(c.mean.size()) != d) throw ArgumentError("mixture component mean: dimension mismatch");
    if (c.cov.rows() != d || c.cov.cols() != d) throw ArgumentError("mixture component cov: dimension mismatch");
    if (!(c.weight > 0.0)) throw ArgumentError("mixture weights must be positive");
    const Scalar scale = std::max(Scalar(1), c.cov.cwiseAbs().maxCoeff());
    if ((c.cov - c.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ArgumentError("mixture component cov must be symmetric");
    if (Eigen::LLT<Matrix>(c.cov).info() != Eigen::Success)
      throw ArgumentError("mixture component cov must be positive definite");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("mixture weights must sum to 1");
}

Scalar mvn_density(const Vector& x, const Vector& mean, const Matrix& cov) {
  const auto d = x.size();
  if (mean.size() != d || cov.rows() != d || cov.cols() != d)
    throw ArgumentError("mvn_density: dimension mismatch");
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw ArgumentError("mvn_density: covariance not positive definite");
  const Vector y = llt.matrixL().solve(x - mean);
  Scalar log_det_half = 0.0;
  for (Index i = 0; i < d; ++i) log_det_half += std::log(llt.matrixL()(i, i));
  return std::exp(-0.5 * y.squaredNorm() - 0.5 * static_cast<Scalar>(d) * kLog2Pi - log_det_half);
}

Scalar eval_density(const MixtureDensity& m, const Vector& x) {
  check_dim(m.dim(), x, "eval_density(mixture)");
  Scalar v = 0.0;
  for (const auto& c : m.components) v += c.weight * mvn_density(x, c.mean, c.cov);
  return v;
}

Scalar GaussianSum::mass() const {
  Scalar t = 0.0;
  for (const Scalar w : weights) t += w;
  return t;
}

Scalar eval_density(const GaussianSum& s, const Vector& x) {
  check_dim(s.dim(), x, "eval_density(sum)");
  Scalar v = 0.0;
  for (std::size_t i = 0; i < s.weights.size(); ++i)
    v += s.weights[i] * mvn_density(x, s.means[i], s.covs[i]);
  return v;
}

Scalar mvn_cross_integral(const Vector& mean_a, const Matrix& cov_a, const Vector& mean_b,
                          const Matrix& cov_b) {
  const Vector zero = Vector::Zero(mean_a.size());
  return mvn_density(mean_a - mean_b, zero, cov_a + cov_b);
}

Scalar l2_inner(const GaussianSum& a, const GaussianSum& b) {
  if (a.dim() != b.dim()) throw ArgumentError("l2_inner: dimension mismatch");
  Scalar total = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    Scalar row = 0.0;
    for (std::size_t j = 0; j < b.weights.size(); ++j)
      row += b.weights[j] * mvn_cross_integral(a.means[i], a.covs[i], b.means[j], b.covs[j]);
    total += a.weights[i] * row;
  }
  return total;
}

GaussianSum to_gaussian_sum(const GaussianWord& w) {
  check_word(w);
  const int d = w.dim();
  return {{1.0}, {w.center}, {Matrix::Identity(d, d) * (w.h * w.h)}};
}

GaussianSum to_gaussian_sum(const MixtureDensity& m) {
  GaussianSum s;
  for (const auto& c : m.components) {
    s.weights.push_back(c.weight);
    s.means.push_back(c.mean);
    s.covs.push_back(c.cov);
  }
  return s;
}

Scalar XiCombination::weight_sum() const {
  Scalar t = 0.0;
  for (const auto& term : terms) t += term.weight;
  return t;
}

Scalar eval_density(const XiCombination& c, std::span<const GaussianWord> words, const Vector& x) {
  if (c.terms.empty()) throw ArgumentError("eval_density: empty combination");
  if (c.family.kind() == FamilyKind::KL) {
    Scalar acc = 0.0;
    for (const auto& [word, weight] : c.terms) {
      const Scalar lp = log_density(words[static_cast<std::size_t>(word)], x);
      acc += weight * std::max(lp, kLogFloor);
    }
    return std::exp(acc);
  }
  const Scalar beta = c.family.beta();
  // 1 + beta * sum_l q_l xi(phi_l) = 1 - sum q + sum q phi^beta.
  Scalar power_sum = 0.0;
  Scalar weight_total = 0.0;
  for (const auto& [word, weight] : c.terms) {
    const Scalar lp = log_density(words[static_cast<std::size_t>(word)], x);
    power_sum += weight * std::exp(beta * lp);
    weight_total += weight;
  }
  const Scalar base = std::max(Scalar(0), 1.0 - weight_total + power_sum);
  if (beta == 1.0) return base;
  if (beta == 0.5) return base * base;
  return std::pow(base, 1.0 / beta);
}

XiCombination combine_stage(const XiCombination& prev, Index word, Scalar pi) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw ArgumentError("combine_stage: pi must lie in [0, 1]");
  if (word < 0) throw ArgumentError("combine_stage: negative word index");
  XiCombination next(prev.family);
  next.terms.reserve(prev.terms.size() + 1);
  bool merged = false;
  for (const auto& term : prev.terms) {
    Scalar w = term.weight * (1.0 - pi);
    if (term.word == word) {
      w += pi;
      merged = true;
    }
    if (w != 0.0) next.terms.push_back({term.word, w});
  }
  if (!merged && pi != 0.0) next.terms.push_back({word, pi});
  std::sort(next.terms.begin(), next.terms.end(),
            [](const XiTerm& a, const XiTerm& b) { return a.word < b.word; });
  return next;
}

std::optional<GaussianSum> combination_gaussian_sum(const XiCombination& c,
                                                    std::span<const GaussianWord> words) {
  if (c.terms.empty()) return std::nullopt;
  if (c.family.kind() == FamilyKind::KL) {
    // exp(sum_l q_l log phi_l) is itself a scaled isotropic Gaussian: collect
    // the quadratic form's coefficients and complete the square.
    const int d = words[static_cast<std::size_t>(c.terms.front().word)].dim();
    Scalar precision = 0.0, center_sq = 0.0, log_norms = 0.0;
    Vector scaled_center = Vector::Zero(d);
    for (const auto& [word, weight] : c.terms) {
      const auto& w = words[static_cast<std::size_t>(word)];
      const Scalar inv_h2 = 1.0 / (w.h * w.h);
      precision += weight * inv_h2;
      scaled_center += weight * inv_h2 * w.center;
      center_sq += weight * inv_h2 * w.center.squaredNorm();
      log_norms += weight * (kLog2Pi + 2.0 * std::log(w.h));
    }
    const Vector mean = scaled_center / precision;
    const Scalar dd = static_cast<Scalar>(d);
    const Scalar log_gamma = -0.5 * dd * log_norms - 0.5 * (center_sq - scaled_center.squaredNorm() / precision) +
                             0.5 * dd * (kLog2Pi - std::log(precision));
    GaussianSum s;
    s.weights = {std::exp(log_gamma)};
    s.means = {mean};
    s.covs = {Matrix::Identity(d, d) / precision};
    return s;
  }
  const Scalar total = c.weight_sum();
  if (std::abs(total - 1.0) > 1e-9) return std::nullopt;
  if (c.terms.size() == 1) return to_gaussian_sum(words[static_cast<std::size_t>(c.terms.front().word)]);
  if (c.family.beta() != 1.0) return std::nullopt;
  GaussianSum s;
  for (const auto& [word, weight] : c.terms) {
    const auto& w = words[static_cast<std::size_t>(word)];
    s.weights.push_back(weight);
    s.means.push_back(w.center);
    s.covs.push_back(Matrix::Identity(w.dim(), w.dim()) * (w.h * w.h));
  }
  return s;
}

DensityHandle::DensityHandle(int dim, EvalFn eval, std::optional<Scalar> analytic_mass,
                             std::optional<GaussianSum> sum)
    : dim_(dim), eval_(std::move(eval)), mass_(analytic_mass) {
  if (sum) sum_ = std::make_shared<const GaussianSum>(std::move(*sum));
}

Scalar DensityHandle::operator()(const Vector& x) const {
  check_dim(dim_, x, "DensityHandle");
  return eval_(x);
}

DensityHandle DensityHandle::of(const GaussianWord& w) {
  check_word(w);
  return DensityHandle(
      w.dim(), [w](const Vector& x) { return eval_density(w, x); }, 1.0, to_gaussian_sum(w));
}

DensityHandle DensityHandle::of(const MixtureDensity& m) {
  validate_mixture(m);
  return DensityHandle(
      m.dim(), [m](const Vector& x) { return eval_density(m, x); }, 1.0, to_gaussian_sum(m));
}

DensityHandle DensityHandle::of(const XiCombination& c, std::span<const GaussianWord> words) {
  if (c.terms.empty()) throw ArgumentError("DensityHandle: empty combination");
  for (const auto& term : c.terms)
    if (term.word < 0 || term.word >= static_cast<Index>(words.size()))
      throw ArgumentError("DensityHandle: combination references a word outside the dictionary");
  // Copy the referenced words so the handle owns everything it needs.
  auto local = std::make_shared<std::vector<GaussianWord>>();
  XiCombination remapped(c.family);
  for (const auto& term : c.terms) {
    remapped.terms.push_back({static_cast<Index>(local->size()), term.weight});
    local->push_back(words[static_cast<std::size_t>(term.word)]);
  }
  auto sum = combination_gaussian_sum(c, words);
  std::optional<Scalar> mass;
  if (sum) mass = sum->mass();
  const int d = local->front().dim();
  return DensityHandle(
      d,
      [local, remapped](const Vector& x) {
        return eval_density(remapped, std::span<const GaussianWord>(*local), x);
      },
      mass, std::move(sum));
}

Box bounding_box(std::span<const GaussianWord> words, Scalar margin) {
  if (words.empty()) throw ArgumentError("bounding_box: no words");
  const int d = words.front().dim();
  Box box(static_cast<std::size_t>(d));
  for (int p = 0; p < d; ++p)
    box[static_cast<std::size_t>(p)] = {std::numeric_limits<Scalar>::infinity(),
                                        -std::numeric_limits<Scalar>::infinity()};
  for (const auto& w : words) {
    check_word(w);
    for (int p = 0; p < d; ++p) {
      auto& [lo, hi] = box[static_cast<std::size_t>(p)];
      lo = std::min(lo, w.center(p) - margin * w.h);
      hi = std::max(hi, w.center(p) + margin * w.h);
    }
  }
  return box;
}

Box bounding_box(const MixtureDensity& m, Scalar margin) { return bounding_box(to_gaussian_sum(m), margin); }

Box bounding_box(const GaussianSum& s, Scalar margin) {
  if (s.weights.empty()) throw ArgumentError("bounding_box: empty sum");
  const int d = s.dim();
  Box box(static_cast<std::size_t>(d));
  for (int p = 0; p < d; ++p)
    box[static_cast<std::size_t>(p)] = {std::numeric_limits<Scalar>::infinity(),
                                        -std::numeric_limits<Scalar>::infinity()};
  for (std::size_t i = 0; i < s.weights.size(); ++i)
    for (int p = 0; p < d; ++p) {
      const Scalar sigma = std::sqrt(s.covs[i](p, p));
      auto& [lo, hi] = box[static_cast<std::size_t>(p)];
      lo = std::min(lo, s.means[i](p) - margin * sigma);
      hi = std::max(hi, s.means[i](p) + margin * sigma);
    }
  return box;
}

IntegratorSpec resolve_bounds(IntegratorSpec spec, const Box& fallback) {
  if (spec.bounds.empty()) spec.bounds = fallback;
  return spec;
}

Scalar integrate_density(const DensityHandle& f, const IntegratorSpec& spec) {
  const Scalar mass = integrate([&f](const Vector& x) { return f(x); }, spec);
  if (f.analytic_mass()) {
    const Scalar expected = *f.analytic_mass();
    if (std::abs(mass - expected) > 1e-3 * std::max(Scalar(1), std::abs(expected)))
      throw CoverageError("integration box captures " + std::to_string(mass) + " of an expected mass " +
                          std::to_string(expected) + "; widen the bounds or raise the resolution");
  }
  return mass;
}

}  // namespace skde
