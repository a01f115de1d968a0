#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "core_model.hpp"
#include "eigensolver.hpp"
#include "errors.hpp"
#include "mode_analysis.hpp"

namespace chainspectra {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

// ---------------------------------------------------------------- two-layer chain

struct TwoLayerConfig {
  int n = 50;
  double k1 = 1.0, k2 = 1.9;
  double k5 = 1.4, k6 = 1.7;
  double k31 = 0.0, k32 = 0.0;
  double k41 = 1.6, k42 = 1.6;

  void validate() const {
    if (n < 2) throw Error(ErrorCode::InvalidConfig, "n must be >= 2");
    if (!(k1 > 0) || !(k2 > 0)) throw Error(ErrorCode::InvalidConfig, "k1, k2 must be positive");
    for (double k : {k5, k6, k31, k32, k41, k42})
      if (!(k >= 0) || !std::isfinite(k)) throw Error(ErrorCode::InvalidConfig, "coupling must be nonnegative");
  }
};

/// Layer-symmetric (pair1) and layer-antisymmetric (pair2) bands.
struct TwoLayerBands {
  std::array<Interval, 2> pair1;
  std::array<Interval, 2> pair2;

  bool in_pair1(double w2, double tol = 1e-12) const { return pair1[0].contains(w2, tol) || pair1[1].contains(w2, tol); }
  bool in_pair2(double w2, double tol = 1e-12) const { return pair2[0].contains(w2, tol) || pair2[1].contains(w2, tol); }
};

inline TwoLayerBands two_layer_bands(const TwoLayerConfig& c) {
  TwoLayerBands b;
  const double lo = std::min(c.k1, c.k2), hi = std::max(c.k1, c.k2);
  b.pair1 = {Interval{0.0, 2 * lo}, Interval{2 * hi, 2 * (c.k1 + c.k2)}};
  const double mid = c.k1 + c.k2 + c.k5 + c.k6, dk = c.k5 - c.k6;
  const double rp = std::hypot(dk, c.k1 + c.k2), rm = std::hypot(dk, c.k1 - c.k2);
  b.pair2 = {Interval{mid - rp, mid - rm}, Interval{mid + rm, mid + rp}};
  return b;
}

/// Dof index of layer (0 or 1) at column (0-based).
inline int two_layer_dof(int layer, int column) { return 2 * column + layer; }

/// Stiffness K = -L of the two-layer chain (4n x 4n, bandwidth 2).
inline Eigen::MatrixXd two_layer_stiffness(const TwoLayerConfig& c) {
  c.validate();
  const int cols = 2 * c.n, m = 2 * cols;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
  auto bond = [&](int a, int b, double s) {
    k(a, a) += s;
    k(b, b) += s;
    k(a, b) -= s;
    k(b, a) -= s;
  };
  for (int col = 0; col < cols; ++col) {
    bond(two_layer_dof(0, col), two_layer_dof(1, col), col % 2 == 0 ? c.k5 : c.k6);
    if (col + 1 < cols)
      for (int l = 0; l < 2; ++l) bond(two_layer_dof(l, col), two_layer_dof(l, col + 1), col % 2 == 0 ? c.k1 : c.k2);
  }
  k(two_layer_dof(0, 0), two_layer_dof(0, 0)) += c.k31;
  k(two_layer_dof(1, 0), two_layer_dof(1, 0)) += c.k32;
  k(two_layer_dof(0, cols - 1), two_layer_dof(0, cols - 1)) += c.k41;
  k(two_layer_dof(1, cols - 1), two_layer_dof(1, cols - 1)) += c.k42;
  return k;
}

enum class PairMembership { Pair1, Pair2, Both, None };

inline const char* to_string(PairMembership p) {
  switch (p) {
    case PairMembership::Pair1: return "pair1";
    case PairMembership::Pair2: return "pair2";
    case PairMembership::Both: return "both";
    case PairMembership::None: return "none";
  }
  return "?";
}

struct TwoLayerMode {
  double omega2 = 0.0;
  PairMembership pair = PairMembership::None;
  ModeLabel label = ModeLabel::Extended;
  /// log10 of last-cell over first-cell norm.
  double log10_end_ratio = 0.0;
};

struct TwoLayerSpectrum {
  TwoLayerConfig config;
  TwoLayerBands bands;
  /// Ascending omega^2 with unit modes in columns.
  Eigen::VectorXd omega2;
  Eigen::MatrixXd modes;
  std::vector<TwoLayerMode> info;

  int outside_both() const {
    return int(std::count_if(info.begin(), info.end(), [](const TwoLayerMode& m) { return m.pair == PairMembership::None; }));
  }
};

namespace detail {

/// Envelope label from per-cell norms.
inline ModeLabel envelope_label(const std::vector<double>& cell, double eps_loc, double& log10_ratio) {
  const int n = int(cell.size());
  const double first = std::max(cell.front(), 1e-300), last = std::max(cell.back(), 1e-300);
  log10_ratio = std::log10(last) - std::log10(first);
  const double lim = std::log10(eps_loc);
  if (log10_ratio <= lim) return ModeLabel::LeftEdge;
  if (-log10_ratio <= lim) return ModeLabel::RightEdge;
  double mid = 0.0;
  for (int c = n / 3; c < n - n / 3; ++c) mid = std::max(mid, cell[c]);
  if (mid <= eps_loc * std::max(first, last)) return ModeLabel::TwoSided;
  return ModeLabel::SlowDecaying;
}

}  // namespace detail

inline TwoLayerSpectrum two_layer_spectrum(const TwoLayerConfig& c, double eps_loc = 1e-3) {
  TwoLayerSpectrum s;
  s.config = c;
  s.bands = two_layer_bands(c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(two_layer_stiffness(c));
  if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "two-layer eigensolver failed");
  s.omega2 = es.eigenvalues();
  s.modes = es.eigenvectors();
  for (int j = 0; j < s.omega2.size(); ++j) {
    TwoLayerMode m;
    m.omega2 = s.omega2[j];
    const bool p1 = s.bands.in_pair1(m.omega2), p2 = s.bands.in_pair2(m.omega2);
    m.pair = p1 && p2 ? PairMembership::Both : p1 ? PairMembership::Pair1 : p2 ? PairMembership::Pair2 : PairMembership::None;
    if (m.pair == PairMembership::None) {
      std::vector<double> cell(c.n);
      for (int k = 0; k < c.n; ++k) cell[k] = s.modes.col(j).segment(4 * k, 4).norm();
      m.label = detail::envelope_label(cell, eps_loc, m.log10_end_ratio);
    }
    s.info.push_back(m);
  }
  return s;
}

struct TwoLayerTransfer {
  double omega2 = 0.0;
  Eigen::Matrix4d T;
  double det = 0.0;
  /// Numerical eigenvalues of T.
  Eigen::Vector4cd eigenvalues;
  /// Closed-form decay factors with |a| <= 1.
  cplx a1, a2;
  int sigma1 = 1, sigma2 = 1;
  double d = 0.0;
  /// Closed-form v1..v4 in columns for a1, 1/a1, a2, 1/a2.
  Eigen::Matrix4cd vectors;
};

namespace detail {

/// Root with |a| <= 1 of k1 k2 (a + 1/a) = p.
inline cplx decay_root(double k1, double k2, double p) {
  const cplx t = p / (2 * k1 * k2);
  const cplx r = std::sqrt(t * t - 1.0);
  const cplx a = t - r, b = t + r;
  return std::abs(a) <= std::abs(b) ? a : b;
}

}  // namespace detail

inline TwoLayerTransfer two_layer_transfer(const TwoLayerConfig& c, double omega2) {
  c.validate();
  TwoLayerTransfer r;
  r.omega2 = omega2;
  const double k1 = c.k1, k2 = c.k2, k5 = c.k5, k6 = c.k6, w = omega2;
  Eigen::Matrix4d left, right;
  left << k2, 0, 0, 0, 0, k2, 0, 0, w - k1 - k2 - k5, k5, k1, 0, k5, w - k1 - k2 - k5, 0, k1;
  right << -k1, 0, k1 + k2 + k6 - w, -k6, 0, -k1, -k6, k1 + k2 + k6 - w, 0, 0, -k2, 0, 0, 0, 0, -k2;
  const double dl = left.determinant();
  if (std::abs(dl) < 1e-14 * std::pow(left.norm(), 4))
    throw Error(ErrorCode::SingularFactor, "left factor singular at omega2 = " + std::to_string(w));
  r.T = left.partialPivLu().solve(right);
  r.det = r.T.determinant();
  r.eigenvalues = Eigen::EigenSolver<Eigen::Matrix4d>(r.T).eigenvalues();

  const double s1 = w - k1 - k2;
  const double s2 = w - (k1 + k2 + k5 + k6);
  r.sigma1 = sgn(s1);
  r.sigma2 = sgn(s2);
  r.a1 = detail::decay_root(k1, k2, s1 * s1 - k1 * k1 - k2 * k2);
  const double dk = k5 - k6;
  r.a2 = detail::decay_root(k1, k2, s2 * s2 - dk * dk - k1 * k1 - k2 * k2);

  const double root1 = std::abs(s1);
  for (int j = 0; j < 2; ++j) {
    const cplx a = j == 0 ? r.a1 : 1.0 / r.a1;
    const cplx q = (k1 + k2 * a) / root1;
    r.vectors.col(j) << -double(r.sigma1) / 2, -double(r.sigma1) / 2, q / 2.0, q / 2.0;
  }
  const double root2 = std::abs(s2);
  const double x = dk + r.sigma2 * root2;
  const double prod = s2 * s2 - dk * dk;
  r.d = std::sqrt(std::max(0.0, dk * dk + prod + r.sigma2 * dk * root2));
  for (int j = 0; j < 2; ++j) {
    const cplx a = j == 0 ? r.a2 : 1.0 / r.a2;
    const cplx q = k1 + k2 * a;
    r.vectors.col(2 + j) << -x / (2 * r.d), x / (2 * r.d), q / (2 * r.d), -q / (2 * r.d);
  }
  return r;
}

/// Two-layer layer-symmetric dispersion at a given decay factor.
inline double two_layer_omega2_pair1(double k1, double k2, cplx a, int sigma) {
  return k1 + k2 + sigma * std::sqrt(std::abs((k1 + k2 * a) * (k1 + k2 / a)));
}

inline double two_layer_omega2_pair2(const TwoLayerConfig& c, cplx a, int sigma) {
  const double dk = c.k5 - c.k6;
  return c.k1 + c.k2 + c.k5 + c.k6 + sigma * std::sqrt(dk * dk + std::abs((c.k1 + c.k2 * a) * (c.k1 + c.k2 / a)));
}

// ---------------------------------------------------------------- 2D lattice

struct Lattice2DConfig {
  int N = 40;
  double k1 = 1.0, k2 = 1.9;
  /// Left, right, top and bottom wall springs.
  double k3 = 0.0, k4 = 4.3, k5 = 3.9, k6 = 5.1;

  static constexpr int dense_cap = 60;
  static constexpr int windowed_cap = 120;

  void validate() const {
    if (N < 4 || N % 2 != 0) throw Error(ErrorCode::InvalidConfig, "N must be even and >= 4");
    if (N > windowed_cap) throw Error(ErrorCode::SizeCapExceeded, "N exceeds the windowed size cap");
    if (!(k1 > 0) || !(k2 > 0)) throw Error(ErrorCode::InvalidConfig, "k1, k2 must be positive");
    for (double k : {k3, k4, k5, k6})
      if (!(k >= 0) || !std::isfinite(k)) throw Error(ErrorCode::InvalidConfig, "wall spring must be nonnegative");
  }

  int index(int row, int col) const { return row * N + col; }
};

/// Stiffness K = -L: checkerboard bonds, k1 right / k2 down from even (row + col) sites.
inline Eigen::SparseMatrix<double> lattice2d_stiffness(const Lattice2DConfig& c) {
  c.validate();
  const int n = c.N;
  std::vector<Eigen::Triplet<double>> t;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n * n);
  auto bond = [&](int a, int b, double s) {
    diag[a] += s;
    diag[b] += s;
    t.emplace_back(a, b, -s);
    t.emplace_back(b, a, -s);
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const bool even = (i + j) % 2 == 0;
      if (j + 1 < n) bond(c.index(i, j), c.index(i, j + 1), even ? c.k1 : c.k2);
      if (i + 1 < n) bond(c.index(i, j), c.index(i + 1, j), even ? c.k2 : c.k1);
    }
  for (int j = 0; j < n; ++j) {
    diag[c.index(0, j)] += c.k5;
    diag[c.index(n - 1, j)] += c.k6;
  }
  for (int i = 0; i < n; ++i) {
    diag[c.index(i, 0)] += c.k3;
    diag[c.index(i, n - 1)] += c.k4;
  }
  for (int k = 0; k < n * n; ++k) t.emplace_back(k, k, diag[k]);
  Eigen::SparseMatrix<double> k(n * n, n * n);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

/// Bulk omega^2 = 2k1 + 2k2 + sigma |k1 + k2 e^{i t1}| |1 + e^{i t2}|.
inline double lattice2d_bulk_omega2(double k1, double k2, double t1, double t2, int sigma) {
  return 2 * k1 + 2 * k2 + sigma * std::abs(k1 + k2 * std::polar(1.0, t1)) * std::abs(1.0 + std::polar(1.0, t2));
}

struct BandUnion {
  std::vector<Interval> bands;
  bool contains(double w2, double slack = 0.0) const {
    return std::any_of(bands.begin(), bands.end(), [&](const Interval& b) { return b.contains(w2, slack); });
  }
  double top() const { return bands.empty() ? 0.0 : bands.back().hi; }
};

/// Band union from extremizing the bulk dispersion over a (t1, t2) grid with golden refinement.
inline BandUnion lattice2d_bands(double k1, double k2, int grid = 256) {
  std::vector<Interval> raw;
  for (int sigma : {-1, 1}) {
    Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::array<double, 2> best_lo{}, best_hi{};
    for (int a = 0; a < grid; ++a)
      for (int b = 0; b < grid; ++b) {
        const double t1 = 2 * std::numbers::pi * a / grid, t2 = 2 * std::numbers::pi * b / grid;
        const double w = lattice2d_bulk_omega2(k1, k2, t1, t2, sigma);
        if (w < iv.lo) iv.lo = w, best_lo = {t1, t2};
        if (w > iv.hi) iv.hi = w, best_hi = {t1, t2};
      }
    // coordinate refinement around the grid extremes
    const double h0 = 2 * std::numbers::pi / grid;
    for (int dir : {-1, 1}) {
      std::array<double, 2> x = dir < 0 ? best_lo : best_hi;
      auto f = [&](const std::array<double, 2>& p) { return dir * lattice2d_bulk_omega2(k1, k2, p[0], p[1], sigma); };
      for (double h = h0; h > 1e-12; h *= 0.5)
        for (bool moved = true; moved;) {
          moved = false;
          for (int k = 0; k < 2; ++k)
            for (double s : {-h, h}) {
              auto y = x;
              y[k] += s;
              if (f(y) > f(x)) x = y, moved = true;
            }
        }
      const double v = lattice2d_bulk_omega2(k1, k2, x[0], x[1], sigma);
      if (dir < 0) iv.lo = std::min(iv.lo, v);
      else iv.hi = std::max(iv.hi, v);
    }
    raw.push_back(iv);
  }
  std::sort(raw.begin(), raw.end(), [](const Interval& l, const Interval& r) { return l.lo < r.lo; });
  BandUnion u;
  for (const auto& iv : raw) {
    if (!u.bands.empty() && iv.lo <= u.bands.back().hi) u.bands.back().hi = std::max(u.bands.back().hi, iv.hi);
    else u.bands.push_back(iv);
  }
  return u;
}

struct Lattice2DMode {
  double omega2 = 0.0;
  double boundary_fraction = 0.0;
  bool edge = false;
  bool in_band = true;
  double residual = 0.0;
};

struct Lattice2DSpectrum {
  Lattice2DConfig config;
  BandUnion bands;
  bool windowed = false;
  std::optional<Interval> window;
  /// Ascending omega^2 with unit modes in columns, site index row * N + col.
  Eigen::VectorXd omega2;
  Eigen::MatrixXd modes;
  std::vector<Lattice2DMode> info;
};

/// Norm fraction on sites within `rings` of the boundary.
inline double boundary_fraction(const Lattice2DConfig& c, const Eigen::VectorXd& u, int rings = 2) {
  double b = 0.0;
  for (int i = 0; i < c.N; ++i)
    for (int j = 0; j < c.N; ++j)
      if (std::min({i, j, c.N - 1 - i, c.N - 1 - j}) < rings) b += u[c.index(i, j)] * u[c.index(i, j)];
  return b / u.squaredNorm();
}

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;

/// Number of eigenvalues of k below sigma from the LDL^T inertia.
inline int inertia_below(const SpMat& k, double sigma) {
  SpMat a = k;
  for (int i = 0; i < a.rows(); ++i) a.coeffRef(i, i) -= sigma;
  Eigen::SimplicialLDLT<SpMat> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularFactor, "LDL^T failed at the window shift");
  return int((ldlt.vectorD().array() < 0).count());
}

inline double gershgorin_max(const SpMat& k) {
  double m = 0.0;
  Eigen::VectorXd row = Eigen::VectorXd::Zero(k.rows());
  for (int c = 0; c < k.outerSize(); ++c)
    for (SpMat::InnerIterator it(k, c); it; ++it) row[it.row()] += std::abs(it.value());
  for (int i = 0; i < row.size(); ++i) m = std::max(m, row[i]);
  return m;
}

/// Shift-invert Lanczos with full reorthogonalization for all eigenpairs in [lo, hi].
inline void window_eigenpairs(const SpMat& k, double lo, double hi, int count, std::vector<double>& vals,
                              std::vector<Eigen::VectorXd>& vecs, std::mt19937_64& rng) {
  if (count == 0) return;
  const int dim = int(k.rows());
  const double sigma = 0.5 * (lo + hi) + 1e-7 * (hi - lo);
  SpMat a = k;
  for (int i = 0; i < dim; ++i) a.coeffRef(i, i) -= sigma;
  Eigen::SimplicialLDLT<SpMat> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::SingularFactor, "LDL^T failed at the Lanczos shift");
  const double knorm = gershgorin_max(k);
  std::normal_distribution<double> nd;
  std::vector<Eigen::VectorXd> found;
  auto orth = [&](Eigen::VectorXd& v, const std::vector<Eigen::VectorXd>& basis) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= b.dot(v) * b;
  };
  for (int attempt = 0; int(found.size()) < count; ++attempt) {
    if (attempt > 12) throw Error(ErrorCode::ConvergenceFailure, "windowed Lanczos did not find all eigenpairs");
    const int m = std::min(dim - int(found.size()), std::max(80, 4 * (count - int(found.size())) + 40));
    std::vector<Eigen::VectorXd> v;
    std::vector<double> alpha, beta;
    Eigen::VectorXd q(dim);
    for (int i = 0; i < dim; ++i) q[i] = nd(rng);
    orth(q, found);
    q.normalize();
    v.push_back(q);
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd w = ldlt.solve(v[j]);
      alpha.push_back(v[j].dot(w));
      orth(w, found);
      orth(w, v);
      const double b = w.norm();
      if (b < 1e-12 || j + 1 == m) break;
      beta.push_back(b);
      v.push_back(w / b);
    }
    const int mm = int(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(mm, mm);
    for (int j = 0; j < mm; ++j) t(j, j) = alpha[j];
    for (int j = 0; j + 1 < mm; ++j) t(j, j + 1) = t(j + 1, j) = beta[j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    for (int r = mm - 1; r >= 0 && int(found.size()) < count; --r)
      for (int pass = 0; pass < 1; ++pass) {
        const double theta = es.eigenvalues()[r];
        if (theta == 0.0) continue;
        const double lam = sigma + 1.0 / theta;
        if (lam < lo || lam > hi) continue;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
        for (int j = 0; j < mm; ++j) x += es.eigenvectors()(j, r) * v[j];
        orth(x, found);
        const double xn = x.norm();
        if (xn < 0.5) continue;
        x /= xn;
        const double rq = x.dot(k * x);
        if ((k * x - rq * x).norm() > 1e-9 * knorm) continue;
        found.push_back(x);
        vals.push_back(rq);
        vecs.push_back(x);
      }
  }
}

inline void window_split(const SpMat& k, double lo, double hi, int below_lo, int below_hi, std::vector<double>& vals,
                         std::vector<Eigen::VectorXd>& vecs, std::mt19937_64& rng, int max_per_window = 24) {
  const int count = below_hi - below_lo;
  if (count <= max_per_window || hi - lo < 1e-9) {
    window_eigenpairs(k, lo, hi, count, vals, vecs, rng);
    return;
  }
  const double mid = 0.5 * (lo + hi);
  const int below_mid = inertia_below(k, mid);
  window_split(k, lo, mid, below_lo, below_mid, vals, vecs, rng, max_per_window);
  window_split(k, mid, hi, below_mid, below_hi, vals, vecs, rng, max_per_window);
}

}  // namespace detail

/// Eigenpairs of the 2D lattice, all of them (dense, N <= 60) or those inside a window.
inline Lattice2DSpectrum lattice2d_spectrum(const Lattice2DConfig& c, std::optional<Interval> window = std::nullopt,
                                            double edge_threshold = 0.9, int rings = 2) {
  c.validate();
  Lattice2DSpectrum s;
  s.config = c;
  s.bands = lattice2d_bands(c.k1, c.k2);
  s.window = window;
  const auto k = lattice2d_stiffness(c);
  if (c.N <= Lattice2DConfig::dense_cap) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(k)};
    if (es.info() != Eigen::Success) throw Error(ErrorCode::ConvergenceFailure, "dense 2D eigensolver failed");
    std::vector<int> keep;
    for (int j = 0; j < es.eigenvalues().size(); ++j)
      if (!window || window->contains(es.eigenvalues()[j])) keep.push_back(j);
    s.omega2.resize(int(keep.size()));
    s.modes.resize(k.rows(), int(keep.size()));
    for (int j = 0; j < int(keep.size()); ++j) {
      s.omega2[j] = es.eigenvalues()[keep[j]];
      s.modes.col(j) = es.eigenvectors().col(keep[j]);
    }
  } else {
    if (!window) throw Error(ErrorCode::SizeCapExceeded, "N above the dense cap requires an omega^2 window");
    s.windowed = true;
    std::vector<double> vals;
    std::vector<Eigen::VectorXd> vecs;
    std::mt19937_64 rng(20240611);
    const int blo = detail::inertia_below(k, window->lo), bhi = detail::inertia_below(k, window->hi);
    detail::window_split(k, window->lo, window->hi, blo, bhi, vals, vecs, rng);
    std::vector<int> order(vals.size());
    for (int j = 0; j < int(order.size()); ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int l, int r) { return vals[l] < vals[r]; });
    s.omega2.resize(int(order.size()));
    s.modes.resize(k.rows(), int(order.size()));
    for (int j = 0; j < int(order.size()); ++j) {
      s.omega2[j] = vals[order[j]];
      s.modes.col(j) = vecs[order[j]];
    }
  }
  for (int j = 0; j < s.omega2.size(); ++j) {
    Lattice2DMode m;
    m.omega2 = s.omega2[j];
    const Eigen::VectorXd u = s.modes.col(j);
    m.boundary_fraction = boundary_fraction(c, u, rings);
    m.edge = m.boundary_fraction >= edge_threshold;
    m.in_band = s.bands.contains(m.omega2, 1e-6);
    m.residual = (k * u - m.omega2 * u).norm();
    s.info.push_back(m);
  }
  return s;
}

// ---------------------------------------------------------------- 2D edge ansatz

enum class Edge2D { E1, E2, E3 };

struct TransverseFit {
  int start_row = 0;
  int start_col = 0;
  int length = 0;
  /// Fitted transverse factor per cell step.
  double factor = 0.0;
  double residual = 0.0;
};

struct EdgeAnsatzReport {
  Edge2D boundary = Edge2D::E3;
  std::vector<TransverseFit> rows;
  double median_residual = 0.0;
};

/// Fit of cell sequences w_t = A lambda^t along the direction transverse to the boundary.
inline TransverseFit fit_geometric(const std::vector<Eigen::Vector2d>& w) {
  TransverseFit f;
  f.length = int(w.size());
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + 1 < w.size(); ++t) {
    num += w[t + 1].dot(w[t]);
    den += w[t].squaredNorm();
  }
  f.factor = den > 0 ? num / den : 0.0;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double p = 1.0, pp = 0.0;
  for (const auto& x : w) {
    a += p * x;
    pp += p * p;
    p *= f.factor;
  }
  if (pp > 0) a /= pp;
  double err = 0.0, tot = 0.0;
  p = 1.0;
  for (const auto& x : w) {
    err += (x - p * a).squaredNorm();
    tot += x.squaredNorm();
    p *= f.factor;
  }
  f.residual = tot > 0 ? std::sqrt(err / tot) : 0.0;
  return f;
}

/// Cells are (u[2l][2m], u[2l][2m+1]); E3 runs along m, E1 along (l+1, m-1), E2 along (l+1, m+1).
inline EdgeAnsatzReport edge2d_ansatz_check(const Lattice2DConfig& c, Edge2D boundary, const Eigen::VectorXd& mode,
                                            bool reverse = false, int max_len = 0) {
  EdgeAnsatzReport rep;
  rep.boundary = boundary;
  const int cells = c.N / 2;
  auto cell = [&](int l, int m) { return Eigen::Vector2d(mode[c.index(2 * l, 2 * m)], mode[c.index(2 * l, 2 * m + 1)]); };
  int dl = 0, dm = 1;
  if (boundary == Edge2D::E1) dl = 1, dm = -1;
  if (boundary == Edge2D::E2) dl = 1, dm = 1;
  if (reverse) dl = -dl, dm = -dm;
  auto inside = [&](int l, int m) { return l >= 0 && l < cells && m >= 0 && m < cells; };
  for (int l0 = 0; l0 < cells; ++l0)
    for (int m0 = 0; m0 < cells; ++m0) {
      if (inside(l0 - dl, m0 - dm)) continue;
      std::vector<Eigen::Vector2d> w;
      for (int l = l0, m = m0; inside(l, m); l += dl, m += dm) {
        w.push_back(cell(l, m));
        if (max_len > 0 && int(w.size()) >= max_len) break;
      }
      if (w.size() < 3) continue;
      TransverseFit f = fit_geometric(w);
      f.start_row = l0;
      f.start_col = m0;
      rep.rows.push_back(f);
    }
  if (!rep.rows.empty()) {
    std::vector<double> r;
    for (const auto& f : rep.rows) r.push_back(f.residual);
    std::nth_element(r.begin(), r.begin() + r.size() / 2, r.end());
    rep.median_residual = r[r.size() / 2];
  }
  return rep;
}

}  // namespace chainspectra
