#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "core_model.hpp"
#include "eigensolver.hpp"
#include "errors.hpp"
#include "semi_infinite.hpp"

namespace chainspectra {

enum class ModeLabel { LeftEdge, RightEdge, TwoSided, SlowDecaying, Extended, BandEdge };

inline const char* to_string(ModeLabel l) {
  switch (l) {
    case ModeLabel::LeftEdge: return "LeftEdge";
    case ModeLabel::RightEdge: return "RightEdge";
    case ModeLabel::TwoSided: return "TwoSided";
    case ModeLabel::SlowDecaying: return "SlowDecaying";
    case ModeLabel::Extended: return "Extended";
    case ModeLabel::BandEdge: return "BandEdge";
  }
  return "?";
}

struct ClassifyOptions {
  /// End-to-end envelope contrast for one-sided labels.
  double eps_loc = 1e-3;
  /// SlowDecaying when xi exceeds this fraction of n.
  double xi_fraction = 0.5;
};

struct ModeAnalysis {
  int mode_index = 0;
  double omega2 = 0.0;
  TransferEigen te;
  CellVectors cv;
  cplx c1{0.0, 0.0};
  cplx c2{0.0, 0.0};
  double theta = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double r = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  double eta = std::numeric_limits<double>::quiet_NaN();
  double xi = std::numeric_limits<double>::quiet_NaN();
  /// log10 of A(n)/A(1) for the envelope |c1||a|^{m-1} + |c2||a|^{1-m}.
  double log10_end_ratio = std::numeric_limits<double>::quiet_NaN();
  bool basis_ok = true;
  ModeLabel label = ModeLabel::Extended;
};

namespace detail {

inline double log_add(double x, double y) {
  if (x == -std::numeric_limits<double>::infinity()) return y;
  if (y == -std::numeric_limits<double>::infinity()) return x;
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

inline double safe_log(double x) { return x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity(); }

/// Fallback envelope from raw cell amplitudes.
inline double raw_end_ratio_log10(const Eigen::VectorXd& u) {
  const int m = int(u.size());
  const double left = std::hypot(u[0], u[1]);
  const double right = std::hypot(u[m - 2], u[m - 1]);
  return std::log10(std::max(right, 1e-300)) - std::log10(std::max(left, 1e-300));
}

}  // namespace detail

inline ModeLabel classify(const ModeAnalysis& ma, const ChainConfig& c, const ClassifyOptions& opt = {}) {
  if (ma.te.degenerate) return ModeLabel::BandEdge;
  if (ma.te.on_unit_circle()) return ModeLabel::Extended;
  if (ma.xi > opt.xi_fraction * c.n) return ModeLabel::SlowDecaying;
  const double lim = std::log10(opt.eps_loc);
  if (ma.log10_end_ratio <= lim) return ModeLabel::LeftEdge;
  if (-ma.log10_end_ratio <= lim) return ModeLabel::RightEdge;
  return ModeLabel::TwoSided;
}

/// Transfer decomposition of an eigenpair (omega2, u) of the chain.
inline ModeAnalysis decompose_vector(double omega2, const Eigen::VectorXd& u, const ChainConfig& c, int mode_index = 0,
                                     const ClassifyOptions& opt = {}) {
  const BulkParams p = c.bulk();
  const int n = c.n;
  ModeAnalysis ma;
  ma.mode_index = mode_index;
  ma.omega2 = omega2;
  ma.te = solve_decay(p, omega2);
  if (ma.te.degenerate) {
    ma.basis_ok = false;
    ma.log10_end_ratio = detail::raw_end_ratio_log10(u);
    ma.label = ModeLabel::BandEdge;
    return ma;
  }
  ma.cv = cell_vectors(p, ma.te);
  Eigen::Matrix2cd basis;
  basis << ma.cv.v1, ma.cv.v2;
  Eigen::JacobiSVD<Eigen::Matrix2cd> svd(basis);
  const double cond = svd.singularValues()[0] / std::max(svd.singularValues()[1], 1e-300);
  if (cond > 1e12) ma.basis_ok = false;

  const Eigen::Vector2cd left(u[0], u[1]);
  const Eigen::Vector2cd right(u[2 * n - 2], u[2 * n - 1]);
  const Eigen::Matrix2cd inv = basis.inverse();
  const Eigen::Vector2cd cl = inv * left;
  const cplx a = ma.te.a;

  if (ma.te.on_unit_circle()) {
    ma.c1 = cl[0];
    ma.c2 = cl[1];
    ma.theta = *ma.te.theta;
    ma.alpha = ma.cv.alpha;
    ma.rho = ma.cv.rho;
    ma.r = std::abs(ma.c1);
    double b = std::arg(ma.c1);
    b = std::fmod(b, std::numbers::pi);
    if (b < 0) b += std::numbers::pi;
    ma.beta = b;
    ma.log10_end_ratio = detail::raw_end_ratio_log10(u);
  } else {
    // c1 from the left end, c2 from the right end: each where it is not exponentially masked
    const Eigen::Vector2cd cr = inv * right;
    const double la = std::log(std::abs(a.real()));
    ma.c1 = cl[0];
    // c2 a^{1-n} = cr[1]
    ma.c2 = cr[1] * std::pow(a.real(), n - 1);
    if (!std::isfinite(std::abs(ma.c2))) ma.c2 = cl[1];
    ma.xi = -1.0 / la;
    const double lc1 = detail::safe_log(std::abs(ma.c1));
    // log|c2| computed without underflow
    const double lc2 = detail::safe_log(std::abs(cr[1])) + (n - 1) * la;
    ma.eta = std::exp(lc2 - lc1 + (2 - 2 * n) * la);
    const double la1 = detail::log_add(lc1, lc2);
    const double lan = detail::log_add(lc1 + (n - 1) * la, lc2 + (1 - n) * la);
    ma.log10_end_ratio = (lan - la1) / std::log(10.0);
  }
  ma.label = classify(ma, c, opt);
  if (!ma.basis_ok && ma.label != ModeLabel::Extended && ma.label != ModeLabel::BandEdge) {
    ma.log10_end_ratio = detail::raw_end_ratio_log10(u);
    ma.label = ModeLabel::SlowDecaying;
  }
  return ma;
}

inline ModeAnalysis decompose(const Spectrum& s, int mode_index, const ClassifyOptions& opt = {}) {
  return decompose_vector(s.omega2(mode_index), s.mode(mode_index), s.config, mode_index, opt);
}

/// Cell profile c1 a^m v1 + c2 a^{-m} v2 for m = 0..n-1, flattened to 2n sites.
inline Eigen::VectorXcd reconstruct(const ModeAnalysis& ma, int n) {
  Eigen::VectorXcd out(2 * n);
  const cplx a = ma.te.a;
  for (int m = 0; m < n; ++m) {
    Eigen::Vector2cd cell;
    if (ma.te.on_unit_circle()) {
      cell = ma.c1 * std::pow(a, m) * ma.cv.v1 + ma.c2 * std::pow(a, -m) * ma.cv.v2;
    } else {
      // c2 a^{-m} evaluated as (c2 a^{1-n}) a^{n-1-m} to stay finite
      const double ar = a.real();
      const cplx c2end = ma.c2 * std::pow(ar, 1 - n);
      const cplx t2 = std::isfinite(std::abs(c2end)) ? c2end * std::pow(ar, n - 1 - m) : ma.c2 * std::pow(ar, -m);
      cell = ma.c1 * std::pow(ar, m) * ma.cv.v1 + t2 * ma.cv.v2;
    }
    out.segment<2>(2 * m) = cell;
  }
  return out;
}

struct ClassifiedSpectrum {
  Spectrum spectrum;
  std::vector<ModeAnalysis> modes;
  int out_of_band_count = 0;
  /// Optical in-band modes by ascending omega^2 and acoustic in-band modes by descending omega^2.
  std::vector<int> optical_modes;
  std::vector<int> acoustic_modes;

  int n1() const { return int(optical_modes.size()); }
  int n2() const { return int(acoustic_modes.size()); }

  int count(ModeLabel l) const {
    int k = 0;
    for (const auto& m : modes)
      if (m.label == l) ++k;
    return k;
  }
};

inline ClassifiedSpectrum classify_spectrum(const Spectrum& s, const ClassifyOptions& opt = {}) {
  ClassifiedSpectrum cs;
  cs.spectrum = s;
  const BulkParams p = s.config.bulk();
  const int m = s.size();
  cs.modes.reserve(m);
  for (int j = 0; j < m; ++j) {
    cs.modes.push_back(decompose(s, j, opt));
    const double w2 = s.omega2(j);
    const auto b = band_of(p, w2);
    if (b == BandTag::Optical) cs.optical_modes.push_back(j);
    else if (b == BandTag::Acoustic) cs.acoustic_modes.push_back(j);
    else ++cs.out_of_band_count;
  }
  std::reverse(cs.acoustic_modes.begin(), cs.acoustic_modes.end());
  return cs;
}

inline ClassifiedSpectrum classify_spectrum(const ChainConfig& c, const ClassifyOptions& opt = {}) {
  return classify_spectrum(full_spectrum(c), opt);
}

/// Predicted |c2/c1| at n for each semi-infinite root, from the right boundary relation with a = a-tilde.
inline double predicted_purity(const BulkParams& p, const SemiInfiniteRoot& root, double k32, int n) {
  TransferEigen te;
  te.a = root.a_tilde;
  te.sigma = root.sigma;
  te.omega2 = root.omega2;
  auto cv = cell_vectors(p, te);
  const double v11 = cv.v1[0].real(), v12 = cv.v1[1].real(), v21 = cv.v2[0].real(), v22 = cv.v2[1].real();
  const double kk = p.k1 + k32 - root.omega2;
  const double num = kk * v12 - p.k1 * v11;
  const double den = p.k1 * v21 - kk * v22;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return std::exp((2 * n - 2) * std::log(std::abs(root.a_tilde))) * std::abs(num / den);
}

/// Smallest n >= 2 with predicted |c2/c1| < epsilon for every left edge state.
inline int min_chain_size(double k1, double k2, double k31, double k32, double epsilon, int n_max = 1000000) {
  const BulkParams p{k1, k2};
  std::vector<SemiInfiniteRoot> roots;
  for (const auto& r : solve_semi_infinite(k1, k2, k31))
    if (r.location != EdgeLocation::None) roots.push_back(r);
  if (roots.empty()) throw Error(ErrorCode::NoEdgeState, "no |a| < 1 root for these boundary parameters");
  if (std::isinf(epsilon)) return 2;
  for (int n = 2; n <= n_max; ++n) {
    bool ok = true;
    for (const auto& r : roots)
      if (!(predicted_purity(p, r, k32, n) < epsilon)) ok = false;
    if (ok) return n;
  }
  throw Error(ErrorCode::NoEdgeState, "purity bound not reached");
}

}  // namespace chainspectra
