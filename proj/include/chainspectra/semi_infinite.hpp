#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "core_model.hpp"
#include "errors.hpp"

namespace chainspectra {

enum class EdgeLocation { InGap, AboveOptical, None };

inline const char* to_string(EdgeLocation l) {
  switch (l) {
    case EdgeLocation::InGap: return "in_gap";
    case EdgeLocation::AboveOptical: return "above_optical";
    case EdgeLocation::None: return "none";
  }
  return "?";
}

struct SemiInfiniteRoot {
  double a_tilde = 0.0;
  int sigma = 1;
  double omega2 = 0.0;
  EdgeLocation location = EdgeLocation::None;
  /// Right stiffness for which the left edge state is exact in a finite chain; may be +inf.
  double k32_match = 0.0;
};

/// Left-hand side of the a-tilde quadratic.
inline double semi_quadratic(double k1, double k2, double k31, double a) {
  const double d = k31 - k2;
  return d * d * k1 * a * a + (k2 * d * d - k2 * k2 * k2) * a - k1 * k2 * k2;
}

/// Signed right-hand side of the sigma identity, without sigma.
inline double semi_sigma_rhs(double k1, double k2, double a) {
  const double r1 = k1 + k2 / a, r2 = k1 + k2 * a;
  const int e = r2 != 0.0 ? sgn(r2) : sgn(r1);
  if (r1 == 0.0) return std::numeric_limits<double>::infinity();
  return e * k2 * std::sqrt(std::abs(r2)) / (a * std::sqrt(std::abs(r1)));
}

inline double matching_k32(const BulkParams& p, double a, int sigma, double omega2) {
  TransferEigen te;
  te.a = a;
  te.sigma = sigma;
  te.omega2 = omega2;
  auto cv = cell_vectors(p, te);
  const double v11 = cv.v1[0].real(), v12 = cv.v1[1].real();
  if (v12 == 0.0) return std::numeric_limits<double>::infinity();
  return omega2 - p.k1 + p.k1 * v11 / v12;
}

inline std::vector<SemiInfiniteRoot> solve_semi_infinite(double k1, double k2, double k31) {
  const BulkParams p{k1, k2};
  if (!p.valid() || !(k31 >= 0.0)) throw Error(ErrorCode::InvalidConfig, "k1, k2 > 0 and k31 >= 0 required");
  const double d = k31 - k2;
  const double tiny = 1e-14 * k2;
  std::vector<double> cand;
  std::vector<SemiInfiniteRoot> out;

  if (std::abs(std::abs(d) - k2) <= tiny) {
    for (double a : {-1.0, 1.0}) {
      SemiInfiniteRoot r;
      r.a_tilde = a;
      r.location = EdgeLocation::None;
      r.sigma = k31 > k2 ? 1 : -1;
      r.omega2 = omega2_of(p, a, r.sigma);
      r.k32_match = std::numeric_limits<double>::quiet_NaN();
      out.push_back(r);
    }
    return out;
  }
  if (std::abs(d) <= tiny) {
    cand.push_back(-k1 / k2);
  } else {
    const double qa = d * d * k1, qb = k2 * (d * d - k2 * k2), qc = -k1 * k2 * k2;
    const double disc = std::sqrt(qb * qb - 4 * qa * qc);
    const double q = -0.5 * (qb + (qb >= 0 ? disc : -disc));
    cand.push_back(q / qa);
    cand.push_back(qc / q);
  }

  for (double a : cand) {
    if (!(std::abs(a) < 1.0) || a == 0.0) continue;
    SemiInfiniteRoot r;
    r.a_tilde = a;
    if (std::abs(d) <= tiny) {
      r.sigma = 1;
      r.omega2 = k1 + k2;
    } else {
      const double rhs = semi_sigma_rhs(k1, k2, a);
      r.sigma = std::abs(d - rhs) <= std::abs(d + rhs) ? 1 : -1;
      r.omega2 = omega2_of(p, a, r.sigma);
    }
    auto b = band_of(p, r.omega2);
    r.location = b == BandTag::Gap ? EdgeLocation::InGap
                 : b == BandTag::Above ? EdgeLocation::AboveOptical
                                       : EdgeLocation::None;
    r.k32_match = matching_k32(p, a, r.sigma, r.omega2);
    out.push_back(r);
  }
  return out;
}

inline int count_edge_states_semi(double k1, double k2, double k31) {
  int c = 0;
  for (const auto& r : solve_semi_infinite(k1, k2, k31))
    if (r.location != EdgeLocation::None) ++c;
  return c;
}

/// Closed-form count from the sign pattern of (k1 - k2, k31 - 2 k2).
inline int count_edge_states_closed(double k1, double k2, double k31) {
  if (k31 == 0.0 || k31 == 2 * k2) return 0;
  if (k1 < k2) return 1;
  if (k1 > k2) return k31 > 2 * k2 ? 2 : 0;
  return 0;
}

struct ZakResult {
  double gamma_numeric = 0.0;
  double gamma_closed = 0.0;
  int grid_points = 0;
};

/// Distance between two angles on the circle.
inline double angle_distance(double x, double y) {
  double d = std::fmod(std::abs(x - y), 2 * std::numbers::pi);
  return std::min(d, 2 * std::numbers::pi - d);
}

inline ZakResult zak_phase(double k1, double k2, int grid_points = 256) {
  if (std::abs(k1 - k2) <= 1e-9) throw Error(ErrorCode::GapClosed, "k1 == k2");
  if (grid_points < 64) grid_points = 64;
  const double pi = std::numbers::pi;
  auto vhat = [&](double th) {
    const cplx z = k1 + k2 * std::polar(1.0, th);
    Eigen::Vector2cd v(-std::abs(z), z);
    return Eigen::Vector2cd(v / v.norm());
  };
  // refine any grid interval whose overlap phase step is not small
  double phase = 0.0;
  int points = 0;
  const double h = 2 * pi / grid_points;
  for (int j = 0; j < grid_points; ++j) {
    std::vector<std::pair<double, double>> stack{{-pi + j * h, -pi + (j + 1) * h}};
    while (!stack.empty()) {
      auto [t0, t1] = stack.back();
      stack.pop_back();
      const cplx ov = vhat(t0).dot(vhat(t1));
      if ((std::abs(std::arg(ov)) > 0.05 || std::abs(ov) < 0.99) && t1 - t0 > 1e-14) {
        const double tm = 0.5 * (t0 + t1);
        stack.push_back({tm, t1});
        stack.push_back({t0, tm});
        continue;
      }
      phase += std::arg(ov);
      ++points;
    }
  }
  ZakResult z;
  z.gamma_numeric = std::fmod(std::fmod(-phase, 2 * pi) + 2 * pi, 2 * pi);
  z.gamma_closed = k1 < k2 ? pi : 0.0;
  z.grid_points = points;
  return z;
}

}  // namespace chainspectra
