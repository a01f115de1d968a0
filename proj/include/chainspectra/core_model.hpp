#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include "errors.hpp"

namespace chainspectra {

using cplx = std::complex<double>;

inline int sgn(double x) { return x < 0.0 ? -1 : 1; }

struct BulkParams {
  double k1 = 1.0;
  double k2 = 1.0;

  bool valid() const { return k1 > 0.0 && k2 > 0.0 && std::isfinite(k1) && std::isfinite(k2); }

  std::vector<double> band_edges() const {
    std::vector<double> e{0.0, 2 * k1, 2 * k2, 2 * k1 + 2 * k2};
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return e;
  }

  double acoustic_top() const { return 2 * std::min(k1, k2); }
  double optical_bottom() const { return 2 * std::max(k1, k2); }
  double optical_top() const { return 2 * (k1 + k2); }
};

enum class BandTag { Acoustic, Gap, Optical, Above };

inline const char* to_string(BandTag b) {
  switch (b) {
    case BandTag::Acoustic: return "acoustic";
    case BandTag::Gap: return "gap";
    case BandTag::Optical: return "optical";
    case BandTag::Above: return "above";
  }
  return "?";
}

inline BandTag band_of(const BulkParams& p, double omega2) {
  if (omega2 <= p.acoustic_top()) return BandTag::Acoustic;
  if (omega2 < p.optical_bottom()) return BandTag::Gap;
  if (omega2 <= p.optical_top()) return BandTag::Optical;
  return BandTag::Above;
}

inline bool in_band(const BulkParams& p, double omega2) {
  auto b = band_of(p, omega2);
  return b == BandTag::Acoustic || b == BandTag::Optical;
}

/// Relative tolerance for treating omega2 as a band edge.
inline constexpr double kEdgeTol = 1e-9;

struct TransferEigen {
  cplx a{0.0, 0.0};
  int sigma = 1;
  double omega2 = 0.0;
  std::optional<double> theta;
  bool degenerate = false;

  bool on_unit_circle() const { return theta.has_value(); }
};

struct CellVectors {
  Eigen::Vector2cd v1;
  Eigen::Vector2cd v2;
  /// Real a with k1 + k2 a < 0: both radicands negative, stored as signed magnitudes.
  bool imag_axis = false;
  double rho = 0.0;
  double alpha = 0.0;
};

/// T(w) mapping (u_{2m-1}, u_{2m}) to (u_{2m+1}, u_{2m+2}).
inline Eigen::Matrix2d transfer_matrix(const BulkParams& p, double omega2) {
  const double k1 = p.k1, k2 = p.k2, x = omega2 - k1 - k2;
  Eigen::Matrix2d t;
  t << -k1 * k1, -k1 * x, k1 * x, x * x - k2 * k2;
  return t / (k1 * k2);
}

/// lambda + 1/lambda at omega2.
inline double decay_trace(const BulkParams& p, double omega2) {
  const double x = omega2 - p.k1 - p.k2;
  return (x * x - p.k1 * p.k1 - p.k2 * p.k2) / (p.k1 * p.k2);
}

/// omega2 = k1 + k2 + sigma sqrt((k1 + k2 a)(k1 + k2 / a)).
inline double omega2_of(const BulkParams& p, cplx a, int sigma) {
  cplx prod = (p.k1 + p.k2 * a) * (p.k1 + p.k2 / a);
  return p.k1 + p.k2 + sigma * std::sqrt(std::max(0.0, prod.real()));
}

inline TransferEigen solve_decay(const BulkParams& p, double omega2) {
  TransferEigen te;
  te.omega2 = omega2;
  const double x = omega2 - p.k1 - p.k2;
  te.sigma = x == 0.0 ? 1 : sgn(x);

  const double tol = kEdgeTol * std::max(1.0, std::abs(omega2));
  const double edges[4] = {0.0, 2 * p.k1, 2 * p.k2, 2 * p.k1 + 2 * p.k2};
  const double edge_a[4] = {1.0, -1.0, -1.0, 1.0};
  for (int i = 0; i < 4; ++i) {
    if (std::abs(omega2 - edges[i]) <= tol) {
      te.degenerate = true;
      te.a = edge_a[i];
      te.theta = edge_a[i] > 0 ? 0.0 : std::numbers::pi;
      return te;
    }
  }

  const double s = decay_trace(p, omega2);
  if (std::abs(s) <= 2.0) {
    const double th = std::acos(std::clamp(0.5 * s, -1.0, 1.0));
    te.theta = th;
    te.a = std::polar(1.0, th);
  } else {
    // larger-magnitude root first, companion by product = 1
    const double big = 0.5 * (std::abs(s) + std::sqrt(s * s - 4.0));
    te.a = sgn(s) / big;
  }
  return te;
}

inline CellVectors cell_vectors(const BulkParams& p, const TransferEigen& te) {
  if (te.degenerate || te.a == cplx(1.0) || te.a == cplx(-1.0))
    throw Error(ErrorCode::DegenerateTransfer, "a = +-1 at omega2 = " + std::to_string(te.omega2));
  const double k1 = p.k1, k2 = p.k2;
  const int sg = te.sigma;
  CellVectors cv;
  if (te.on_unit_circle()) {
    const double th = *te.theta;
    cplx zm = std::sqrt(cplx(k1 + k2 * std::cos(th), -k2 * std::sin(th)));
    cplx zp = std::conj(zm);
    cv.v1 << zm, -double(sg) * zp;
    cv.v2 << zp, -double(sg) * zm;
    cv.rho = std::abs(zm);
    cv.alpha = std::arg(zm);
    return cv;
  }
  const double a = te.a.real();
  const double r1 = k1 + k2 / a, r2 = k1 + k2 * a;
  // r1, r2 share a sign; the eigenvector ratio needs sgn(r2), which equals sgn(a) for k1 < k2
  const int e = r2 != 0.0 ? sgn(r2) : sgn(r1);
  const double s1 = std::sqrt(std::abs(r1)), s2 = std::sqrt(std::abs(r2));
  cv.v1 << s1, -double(e * sg) * s2;
  cv.v2 << s2, -double(e * sg) * s1;
  cv.imag_axis = e < 0;
  return cv;
}

inline CellVectors generalized_cell_vectors(const BulkParams&, int a, int sigma) {
  if (a != 1 && a != -1) throw Error(ErrorCode::InvalidA, "a must be +1 or -1");
  CellVectors cv;
  cv.v1 << 1.0, double(-a * sigma);
  cv.v2 << 1.0, double(a * sigma);
  return cv;
}

/// End-cell growth coefficient mu in T v2 = a (v2 + mu v1) at a = +-1.
inline double band_edge_growth(const BulkParams& p, int a) {
  return a == 1 ? -2.0 * (p.k1 + p.k2) / p.k2 : -2.0 * (p.k2 - p.k1) / p.k2;
}

/// (u_{2n-1}, u_{2n}) from (u_1, u_2) = c1 v1 + c2 v2 at a = +-1.
inline Eigen::Vector2d band_edge_end_cell(const BulkParams& p, int a, int sigma, double c1, double c2,
                                          int n) {
  auto cv = generalized_cell_vectors(p, a, sigma);
  Eigen::Vector2d v1 = cv.v1.real(), v2 = cv.v2.real();
  const double m = n - 1;
  const double pre = (a == -1 && (n - 1) % 2 == 1) ? -1.0 : 1.0;
  return pre * (c1 * v1 + c2 * m * band_edge_growth(p, a) * v1 + c2 * v2);
}

}  // namespace chainspectra
