#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "core_model.hpp"
#include "errors.hpp"

namespace chainspectra {

struct ChainConfig {
  int n = 2;
  double k1 = 1.0;
  double k2 = 1.0;
  double k31 = 0.0;
  double k32 = 0.0;

  BulkParams bulk() const { return {k1, k2}; }
  int size() const { return 2 * n; }

  bool valid() const {
    auto fin = [](double v) { return std::isfinite(v); };
    return n >= 2 && fin(k1) && fin(k2) && fin(k31) && fin(k32) && k1 > 0 && k2 > 0 && k31 >= 0 &&
           k32 >= 0;
  }

  void validate() const {
    if (!valid()) throw Error(ErrorCode::InvalidConfig, "n >= 2, k1, k2 > 0, k31, k32 >= 0 required");
  }
};

/// Symmetric tridiagonal matrix: diag of size m, off of size m - 1.
struct Tridiagonal {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;

  int size() const { return int(diag.size()); }

  double norm() const {
    double nrm = 0.0;
    const int m = size();
    for (int i = 0; i < m; ++i) {
      double r = std::abs(diag[i]);
      if (i > 0) r += std::abs(off[i - 1]);
      if (i + 1 < m) r += std::abs(off[i]);
      nrm = std::max(nrm, r);
    }
    return nrm;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    const int m = size();
    Eigen::VectorXd y = diag.cwiseProduct(x);
    for (int i = 0; i + 1 < m; ++i) {
      y[i] += off[i] * x[i + 1];
      y[i + 1] += off[i] * x[i];
    }
    return y;
  }

  Eigen::MatrixXd dense() const {
    const int m = size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) a(i, i) = diag[i];
    for (int i = 0; i + 1 < m; ++i) a(i, i + 1) = a(i + 1, i) = off[i];
    return a;
  }
};

/// Chain with bond stiffnesses bonds[i] between sites i and i+1 and end springs to fixed walls.
inline Tridiagonal assemble_bonds(const std::vector<double>& bonds, double kleft, double kright) {
  const int m = int(bonds.size()) + 1;
  Tridiagonal t;
  t.diag = Eigen::VectorXd::Zero(m);
  t.off = Eigen::VectorXd::Zero(m - 1);
  for (int i = 0; i + 1 < m; ++i) {
    t.off[i] = bonds[i];
    t.diag[i] -= bonds[i];
    t.diag[i + 1] -= bonds[i];
  }
  t.diag[0] -= kleft;
  t.diag[m - 1] -= kright;
  return t;
}

inline Tridiagonal assemble(const ChainConfig& c) {
  c.validate();
  std::vector<double> bonds(2 * c.n - 1);
  for (int i = 0; i < 2 * c.n - 1; ++i) bonds[i] = (i % 2 == 0) ? c.k1 : c.k2;
  return assemble_bonds(bonds, c.k31, c.k32);
}

/// Number of eigenvalues strictly below x.
inline int sturm_count(const Tridiagonal& t, double x) {
  const int m = t.size();
  const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
  int count = 0;
  double d = t.diag[0] - x;
  if (d == 0.0) d = -tiny;
  if (d < 0) ++count;
  for (int i = 1; i < m; ++i) {
    d = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / d;
    if (d == 0.0) d = -tiny;
    if (d < 0) ++count;
  }
  return count;
}

/// Eigenvalues with ascending index in [lo_idx, hi_idx) by bisection.
inline std::vector<double> bisect_eigenvalues(const Tridiagonal& t, int lo_idx, int hi_idx, double abstol) {
  const int m = t.size();
  double glo = std::numeric_limits<double>::infinity(), ghi = -glo;
  for (int i = 0; i < m; ++i) {
    double r = 0.0;
    if (i > 0) r += std::abs(t.off[i - 1]);
    if (i + 1 < m) r += std::abs(t.off[i]);
    glo = std::min(glo, t.diag[i] - r);
    ghi = std::max(ghi, t.diag[i] + r);
  }
  const double pad = 2 * std::numeric_limits<double>::epsilon() * std::max(std::abs(glo), std::abs(ghi)) + abstol;
  glo -= pad;
  ghi += pad;
  std::vector<double> out;
  out.reserve(hi_idx - lo_idx);
  for (int k = lo_idx; k < hi_idx; ++k) {
    double lo = glo, hi = ghi;
    if (!out.empty()) lo = std::max(lo, out.back() - 2 * abstol);
    while (hi - lo > abstol) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (sturm_count(t, mid) > k)
        hi = mid;
      else
        lo = mid;
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

namespace detail {

/// Solves (T - shift I) y = b by Gaussian elimination with partial pivoting.
inline Eigen::VectorXd tridiag_shift_solve(const Tridiagonal& t, double shift, const Eigen::VectorXd& b,
                                           double pivmin) {
  const int m = t.size();
  Eigen::VectorXd dl(m), d(m), du(m), du2(m), x = b;
  std::vector<int> piv(m);
  for (int i = 0; i < m; ++i) d[i] = t.diag[i] - shift;
  for (int i = 0; i + 1 < m; ++i) dl[i] = du[i] = t.off[i];
  du2.setZero();
  for (int i = 0; i + 1 < m; ++i) {
    if (std::abs(d[i]) >= std::abs(dl[i])) {
      piv[i] = i;
      if (std::abs(d[i]) < pivmin) d[i] = d[i] < 0 ? -pivmin : pivmin;
      const double f = dl[i] / d[i];
      dl[i] = f;
      d[i + 1] -= f * du[i];
      du2[i] = 0.0;
    } else {
      piv[i] = i + 1;
      const double f = d[i] / dl[i];
      d[i] = dl[i];
      dl[i] = f;
      const double tmp = du[i];
      du[i] = d[i + 1];
      d[i + 1] = tmp - f * d[i + 1];
      if (i + 2 < m) {
        du2[i] = du[i + 1];
        du[i + 1] = -f * du[i + 1];
      }
    }
  }
  if (std::abs(d[m - 1]) < pivmin) d[m - 1] = d[m - 1] < 0 ? -pivmin : pivmin;
  for (int i = 0; i + 1 < m; ++i) {
    if (piv[i] == i) {
      x[i + 1] -= dl[i] * x[i];
    } else {
      const double tmp = x[i];
      x[i] = x[i + 1];
      x[i + 1] = tmp - dl[i] * x[i];
    }
  }
  x[m - 1] /= d[m - 1];
  if (m > 1) x[m - 2] = (x[m - 2] - du[m - 2] * x[m - 1]) / d[m - 2];
  for (int i = m - 3; i >= 0; --i) x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
  return x;
}

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0) v = -v;
}

}  // namespace detail

/// Eigenvectors for given eigenvalues by inverse iteration; clusters are reorthogonalized.
inline Eigen::MatrixXd inverse_iteration(const Tridiagonal& t, const std::vector<double>& lambdas,
                                         double cluster_tol, std::uint64_t seed = 12345) {
  const int m = t.size();
  const int k = int(lambdas.size());
  const double nrm = std::max(t.norm(), std::numeric_limits<double>::min());
  const double eps = std::numeric_limits<double>::epsilon();
  const double pivmin = eps * nrm;
  const double target = 1e-12 * nrm;
  Eigen::MatrixXd vecs(m, k);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  int cluster_start = 0;
  for (int j = 0; j < k; ++j) {
    if (j > 0 && lambdas[j] - lambdas[j - 1] > cluster_tol) cluster_start = j;
    // separate coincident shifts inside a cluster slightly
    const double shift = lambdas[j] + (j - cluster_start) * 10 * eps * nrm;
    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) x[i] = uni(rng);
    x.normalize();
    bool ok = false;
    for (int it = 0; it < 100; ++it) {
      Eigen::VectorXd y = detail::tridiag_shift_solve(t, shift, x, pivmin);
      for (int c = cluster_start; c < j; ++c) y -= vecs.col(c).dot(y) * vecs.col(c);
      const double yn = y.norm();
      if (!(yn > 0) || !std::isfinite(yn)) {
        for (int i = 0; i < m; ++i) x[i] = uni(rng);
        x.normalize();
        continue;
      }
      x = y / yn;
      const double res = (t.apply(x) - lambdas[j] * x).norm();
      if (res <= target && it >= 1) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      const double res = (t.apply(x) - lambdas[j] * x).norm();
      if (res > 1e-10 * nrm) throw Error(ErrorCode::ConvergenceFailure, "inverse iteration did not converge");
    }
    vecs.col(j) = x;
  }
  return vecs;
}

struct Spectrum {
  /// Eigenvalues -omega^2 of L, ascending.
  Eigen::VectorXd eigenvalues;
  /// Unit eigenvectors in columns, matching eigenvalues.
  Eigen::MatrixXd eigenvectors;
  ChainConfig config;

  int size() const { return int(eigenvalues.size()); }
  /// Mode j in ascending omega^2 order.
  double omega2(int j) const { return -eigenvalues[size() - 1 - j]; }
  Eigen::VectorXd mode(int j) const { return eigenvectors.col(size() - 1 - j); }
};

/// Replaces near-degenerate pairs of a mirror-symmetric chain by reflection-even/odd combinations.
inline void symmetrize_pairs(const Tridiagonal& t, Eigen::VectorXd& lam, Eigen::MatrixXd& vecs, double cluster_tol) {
  const int m = int(lam.size());
  for (int j = 0; j + 1 < m; ++j) {
    if (lam[j + 1] - lam[j] > cluster_tol) continue;
    Eigen::MatrixXd q(vecs.rows(), 2);
    q.col(0) = vecs.col(j);
    q.col(1) = vecs.col(j + 1);
    Eigen::MatrixXd rq = q.colwise().reverse();
    Eigen::Matrix2d r = q.transpose() * rq;
    r = 0.5 * (r + r.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(r);
    Eigen::MatrixXd w = q * es.eigenvectors();
    for (int c = 0; c < 2; ++c) w.col(c).normalize();
    double r0 = w.col(0).dot(t.apply(w.col(0))), r1 = w.col(1).dot(t.apply(w.col(1)));
    if (r0 > r1) {
      std::swap(r0, r1);
      w.col(0).swap(w.col(1));
    }
    vecs.col(j) = w.col(0);
    vecs.col(j + 1) = w.col(1);
    lam[j] = r0;
    lam[j + 1] = r1;
    ++j;
  }
}

inline Spectrum full_spectrum(const ChainConfig& c) {
  Tridiagonal t = assemble(c);
  const double nrm = t.norm();
  const int m = t.size();
  // bisection runs to machine resolution, well inside the 1e-13 |L| requirement
  std::vector<double> lam = bisect_eigenvalues(t, 0, m, std::numeric_limits<double>::epsilon() * nrm);
  const double cluster_tol = 1e-8 * nrm;
  Spectrum s;
  s.config = c;
  s.eigenvalues = Eigen::Map<Eigen::VectorXd>(lam.data(), m);
  s.eigenvectors = inverse_iteration(t, lam, cluster_tol);
  if (c.k31 == c.k32) symmetrize_pairs(t, s.eigenvalues, s.eigenvectors, cluster_tol);
  for (int j = 0; j < m; ++j) detail::fix_sign(s.eigenvectors.col(j));
  return s;
}

/// Eigenpairs of an arbitrary symmetric tridiagonal matrix, ascending eigenvalues.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> tridiagonal_eigen(const Tridiagonal& t) {
  const double nrm = t.norm();
  const int m = t.size();
  std::vector<double> lam = bisect_eigenvalues(t, 0, m, std::numeric_limits<double>::epsilon() * nrm);
  Eigen::MatrixXd v = inverse_iteration(t, lam, 1e-8 * nrm);
  for (int j = 0; j < m; ++j) detail::fix_sign(v.col(j));
  return {Eigen::Map<Eigen::VectorXd>(lam.data(), m), v};
}

enum class End { Left, Right };

/// d(lambda)/d(k3i) = -u_end^2 for unit eigenvector of mode j (ascending omega^2).
inline double frequency_derivative(const Spectrum& s, int mode_index, End which) {
  Eigen::VectorXd u = s.mode(mode_index);
  const double e = which == End::Left ? u[0] : u[u.size() - 1];
  return -e * e;
}

inline double residual_norm(const Tridiagonal& t, double lambda, const Eigen::VectorXd& u) {
  return (t.apply(u) - lambda * u).norm();
}

}  // namespace chainspectra
