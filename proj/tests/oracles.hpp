// Independent reference implementations used only by tests.  Everything here
// is written naively (plain loops, library RNG distributions) on purpose, so
// agreement with the production code is meaningful.
#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "skde/density.hpp"

namespace oracle {

using skde::Index;
using skde::Matrix;
using skde::Scalar;
using skde::Vector;

inline Scalar normal_pdf(Scalar x, Scalar mean, Scalar sd) {
  const Scalar z = (x - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
}

/// Plain trapezoid rule on [lo, hi] with n nodes.
inline Scalar quad1(const std::function<Scalar(Scalar)>& fn, Scalar lo, Scalar hi, int n = 20001) {
  const Scalar step = (hi - lo) / static_cast<Scalar>(n - 1);
  long double acc = 0.5L * (fn(lo) + fn(hi));
  for (int i = 1; i < n - 1; ++i) acc += fn(lo + step * static_cast<Scalar>(i));
  return static_cast<Scalar>(acc * step);
}

/// Plain tensor trapezoid rule on a rectangle with n nodes per axis.
inline Scalar quad2(const std::function<Scalar(Scalar, Scalar)>& fn, Scalar lo1, Scalar hi1,
                    Scalar lo2, Scalar hi2, int n = 801) {
  const Scalar s1 = (hi1 - lo1) / static_cast<Scalar>(n - 1);
  const Scalar s2 = (hi2 - lo2) / static_cast<Scalar>(n - 1);
  long double acc = 0.0L;
  for (int i = 0; i < n; ++i) {
    const Scalar x = lo1 + s1 * static_cast<Scalar>(i);
    const Scalar wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    long double row = 0.0L;
    for (int j = 0; j < n; ++j) {
      const Scalar y = lo2 + s2 * static_cast<Scalar>(j);
      const Scalar wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      row += wi * wj * fn(x, y);
    }
    acc += row;
  }
  return static_cast<Scalar>(acc * s1 * s2);
}

/// Trapezoid refinement until successive halvings agree, for gold values.
inline Scalar quad1_refined(const std::function<Scalar(Scalar)>& fn, Scalar lo, Scalar hi,
                            Scalar tol = 1e-9) {
  int n = 2049;
  Scalar prev = quad1(fn, lo, hi, n);
  for (int pass = 0; pass < 6; ++pass) {
    n = 2 * (n - 1) + 1;
    const Scalar next = quad1(fn, lo, hi, n);
    if (std::abs(next - prev) < tol) return next;
    prev = next;
  }
  return prev;
}

inline skde::GaussianWord random_word(std::mt19937_64& gen, int d) {
  std::uniform_real_distribution<Scalar> center(-2.0, 2.0);
  std::uniform_real_distribution<Scalar> bandwidth(0.4, 1.6);
  Vector c(d);
  for (int p = 0; p < d; ++p) c(p) = center(gen);
  return {c, bandwidth(gen)};
}

/// Small random mixture with diagonal-dominant SPD covariances.
inline skde::MixtureDensity random_mixture(std::mt19937_64& gen, int d, int max_components = 3) {
  std::uniform_int_distribution<int> count(1, max_components);
  std::uniform_real_distribution<Scalar> center(-2.0, 2.0);
  std::uniform_real_distribution<Scalar> scale(0.5, 1.5);
  std::uniform_real_distribution<Scalar> tilt(-0.3, 0.3);
  std::uniform_real_distribution<Scalar> wgt(0.2, 1.0);
  const int k = count(gen);
  skde::MixtureDensity mix;
  Scalar total = 0.0;
  for (int c = 0; c < k; ++c) {
    skde::MixtureComponent comp;
    comp.weight = wgt(gen);
    total += comp.weight;
    comp.mean.resize(d);
    for (int p = 0; p < d; ++p) comp.mean(p) = center(gen);
    Matrix cov = Matrix::Zero(d, d);
    for (int p = 0; p < d; ++p) cov(p, p) = scale(gen);
    if (d == 2) {
      const Scalar rho = tilt(gen) * std::sqrt(cov(0, 0) * cov(1, 1));
      cov(0, 1) = cov(1, 0) = rho;
    }
    comp.cov = cov;
    mix.components.push_back(comp);
  }
  for (auto& comp : mix.components) comp.weight /= total;
  // Compensate rounding so the weights sum to 1 exactly enough for validation.
  Scalar sum = 0.0;
  for (const auto& comp : mix.components) sum += comp.weight;
  mix.components.back().weight += 1.0 - sum;
  return mix;
}

}  // namespace oracle
