#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core_model.hpp"
#include "eigensolver.hpp"
#include "errors.hpp"
#include "mode_analysis.hpp"
#include "semi_infinite.hpp"

namespace chainspectra {

// ---------------------------------------------------------------- regimes

enum class Closeness { Near, Far, Ambiguous };

/// Margin m is Near when |m| <= 5/n, Far when |m| >= 50/n.
inline Closeness closeness(double m, int n) {
  const double x = std::abs(m) * n;
  if (x <= 5.0) return Closeness::Near;
  if (x >= 50.0) return Closeness::Far;
  return Closeness::Ambiguous;
}

enum class RegimeTag { NearlyInfinite, NearlySemiInfiniteLeft, NearlySemiInfiniteRight, Finite, Ambiguous };

inline const char* to_string(RegimeTag t) {
  switch (t) {
    case RegimeTag::NearlyInfinite: return "NearlyInfinite";
    case RegimeTag::NearlySemiInfiniteLeft: return "NearlySemiInfiniteLeft";
    case RegimeTag::NearlySemiInfiniteRight: return "NearlySemiInfiniteRight";
    case RegimeTag::Finite: return "Finite";
    case RegimeTag::Ambiguous: return "Ambiguous";
  }
  return "?";
}

struct Regime {
  RegimeTag tag = RegimeTag::NearlyInfinite;
  /// |k3i - k2| - k2 on each side.
  double margin_left = 0.0;
  double margin_right = 0.0;
  /// k2 - k1
  double gap = 0.0;
};

inline double tube_margin(double k2, double k3) { return std::abs(k3 - k2) - k2; }

inline Regime classify_regime(const ChainConfig& c) {
  Regime r;
  r.margin_left = tube_margin(c.k2, c.k31);
  r.margin_right = tube_margin(c.k2, c.k32);
  r.gap = c.k2 - c.k1;
  const auto l = closeness(r.margin_left, c.n), rr = closeness(r.margin_right, c.n);
  if (l == Closeness::Ambiguous || rr == Closeness::Ambiguous) r.tag = RegimeTag::Ambiguous;
  else if (l == Closeness::Far && rr == Closeness::Far) r.tag = RegimeTag::NearlyInfinite;
  else if (l == Closeness::Far) r.tag = RegimeTag::NearlySemiInfiniteLeft;
  else if (rr == Closeness::Far) r.tag = RegimeTag::NearlySemiInfiniteRight;
  else r.tag = RegimeTag::Finite;
  return r;
}

// ---------------------------------------------------------------- edge-state prediction

enum class OrderClass { None, O_a2n, Theta_an, O_a4n, Theta_a2n };

inline const char* to_string(OrderClass o) {
  switch (o) {
    case OrderClass::None: return "none";
    case OrderClass::O_a2n: return "O(a^2n)";
    case OrderClass::Theta_an: return "Theta(a^n)";
    case OrderClass::O_a4n: return "O(a^4n)";
    case OrderClass::Theta_a2n: return "Theta(a^2n)";
  }
  return "?";
}

enum class EdgeSide { Left, Right, Both };

struct PredictedState {
  EdgeSide side = EdgeSide::Left;
  double a_tilde = 0.0;
  double omega2 = 0.0;
  ModeLabel label = ModeLabel::LeftEdge;
  OrderClass delta_a_order = OrderClass::None;
  OrderClass c2_order = OrderClass::None;
  /// Predicted log10 A(n)/A(1) for one-sided states.
  double log10_end_ratio = 0.0;
  bool ambiguous = false;
};

struct EdgeEstimate {
  std::vector<PredictedState> states;
  bool ambiguous = false;

  int count() const { return int(states.size()); }

  std::vector<ModeLabel> labels() const {
    std::vector<ModeLabel> out;
    for (const auto& s : states) out.push_back(s.label);
    std::sort(out.begin(), out.end());
    return out;
  }
};

/// Boundary deviation k31 - k2 for a given a-tilde offset from -k1/k2 when k31 is near k2.
inline double delta_k31_of_delta_a(double k1, double k2, double delta_a, int sigma) {
  const double q = k2 * delta_a / (k1 * (k1 * k1 - k2 * k2));
  return sigma * k2 * k2 * std::sqrt(std::max(0.0, q));
}

namespace detail {

inline bool is_k2_special(double k2, double k3) { return std::abs(k3 - k2) <= 1e-14 * k2; }

inline std::vector<SemiInfiniteRoot> edge_roots(double k1, double k2, double k3) {
  std::vector<SemiInfiniteRoot> out;
  for (const auto& r : solve_semi_infinite(k1, k2, k3))
    if (r.location != EdgeLocation::None) out.push_back(r);
  return out;
}

/// Label of a one-sided state from its semi-infinite root and the far-end stiffness.
inline PredictedState one_sided(const BulkParams& p, const SemiInfiniteRoot& r, double k_far, int n, EdgeSide side,
                                bool special, const ClassifyOptions& opt) {
  PredictedState s;
  s.side = side;
  s.a_tilde = r.a_tilde;
  s.omega2 = r.omega2;
  s.delta_a_order = special ? OrderClass::O_a4n : OrderClass::O_a2n;
  s.c2_order = OrderClass::O_a2n;
  const double la = std::log(std::abs(r.a_tilde));
  const double xi = -1.0 / la;
  const double purity = predicted_purity(p, r, k_far, n);
  const double lp = purity > 0 ? std::log(purity) : -std::numeric_limits<double>::infinity();
  const double lan = log_add((n - 1) * la, lp + (1 - n) * la);
  s.log10_end_ratio = lan / std::log(10.0);
  const double xi_cut = opt.xi_fraction * n;
  const double lim = std::log10(opt.eps_loc);
  if (xi > xi_cut) {
    s.label = ModeLabel::SlowDecaying;
  } else {
    s.label = s.log10_end_ratio <= lim ? (side == EdgeSide::Left ? ModeLabel::LeftEdge : ModeLabel::RightEdge)
                                       : ModeLabel::TwoSided;
  }
  s.ambiguous = (xi > 0.5 * xi_cut && xi < 2.0 * xi_cut) || std::abs(s.log10_end_ratio - lim) < 1.0;
  return s;
}

}  // namespace detail

/// Out-of-band states expected from the two semi-infinite limits and their coupling.
inline EdgeEstimate predict_edge_states(const ChainConfig& c, const ClassifyOptions& opt = {}) {
  c.validate();
  const BulkParams p = c.bulk();
  const int n = c.n;
  const auto left = detail::edge_roots(c.k1, c.k2, c.k31);
  const auto right = detail::edge_roots(c.k1, c.k2, c.k32);
  const bool sl = detail::is_k2_special(c.k2, c.k31), sr = detail::is_k2_special(c.k2, c.k32);
  EdgeEstimate est;
  std::vector<bool> right_used(right.size(), false);

  for (const auto& l : left) {
    int best = -1;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < right.size(); ++j) {
      if (right_used[j]) continue;
      const double g = std::abs(l.omega2 - right[j].omega2);
      if (g < gap) gap = g, best = int(j);
    }
    bool paired = false;
    if (best >= 0) {
      const auto& r = right[best];
      const double amax = std::max(std::abs(l.a_tilde), std::abs(r.a_tilde));
      const double power = (sl && sr) ? 2.0 * n : double(n);
      const double scale = std::exp(power * std::log(amax)) * c.k2;
      if (gap <= scale) {
        paired = true;
        right_used[best] = true;
        const double xi = -1.0 / std::log(amax);
        for (int t = 0; t < 2; ++t) {
          PredictedState s;
          s.side = EdgeSide::Both;
          s.a_tilde = l.a_tilde;
          s.omega2 = l.omega2;
          s.delta_a_order = (sl && sr) ? OrderClass::Theta_a2n : OrderClass::Theta_an;
          s.c2_order = OrderClass::Theta_an;
          s.log10_end_ratio = 0.0;
          s.label = xi > opt.xi_fraction * n ? ModeLabel::SlowDecaying : ModeLabel::TwoSided;
          s.ambiguous = xi > 0.25 * n && xi < n;
          est.states.push_back(s);
        }
      } else if (gap < 1e3 * scale) {
        est.ambiguous = true;
      }
    }
    if (!paired) est.states.push_back(detail::one_sided(p, l, c.k32, n, EdgeSide::Left, sl, opt));
  }
  for (std::size_t j = 0; j < right.size(); ++j)
    if (!right_used[j]) est.states.push_back(detail::one_sided(p, right[j], c.k31, n, EdgeSide::Right, sr, opt));
  for (const auto& s : est.states)
    if (s.ambiguous) est.ambiguous = true;
  return est;
}

// ---------------------------------------------------------------- generic perturbation relations

namespace detail {

inline CellVectors real_cell_vectors(const BulkParams& p, double a, int sigma) {
  TransferEigen te;
  te.a = a;
  te.sigma = sigma;
  te.omega2 = omega2_of(p, a, sigma);
  return cell_vectors(p, te);
}

}  // namespace detail

/// c2 (with c1 = 1) fixed by the left boundary relation at decay factor a.
inline double c2_of_a(double k1, double k2, double k31, double a, int sigma) {
  if (a == 0.0 || std::abs(a) == 1.0) throw Error(ErrorCode::InvalidA, "a must be real and not 0 or +-1");
  const BulkParams p{k1, k2};
  const auto cv = detail::real_cell_vectors(p, a, sigma);
  const double w2 = omega2_of(p, a, sigma);
  const double kk = k1 + k31 - w2;
  const double v11 = cv.v1[0].real(), v12 = cv.v1[1].real(), v21 = cv.v2[0].real(), v22 = cv.v2[1].real();
  const double num = k1 * v12 - kk * v11;
  const double den = kk * v21 - k1 * v22;
  const double scale = (std::abs(kk) + k1) * (std::abs(v21) + std::abs(v22));
  if (std::abs(den) <= 1e-14 * scale) throw Error(ErrorCode::DegenerateDenominator, "c2(a) denominator vanishes");
  return num / den;
}

/// Right stiffness that closes the right boundary relation for (a, c2) with c1 = 1.
inline double k32_of_a(double k1, double k2, double a, int sigma, double c2, int n) {
  if (a == 0.0 || std::abs(a) == 1.0) throw Error(ErrorCode::InvalidA, "a must be real and not 0 or +-1");
  const BulkParams p{k1, k2};
  const auto cv = detail::real_cell_vectors(p, a, sigma);
  const double w2 = omega2_of(p, a, sigma);
  const double v11 = cv.v1[0].real(), v12 = cv.v1[1].real(), v21 = cv.v2[0].real(), v22 = cv.v2[1].real();
  double num, den;
  if (c2 == 0.0) {
    num = v11, den = v12;
  } else {
    // t = c2 a^{2-2n}, kept in logs
    const double lt = std::log(std::abs(c2)) + (2.0 - 2.0 * n) * std::log(std::abs(a));
    const double sg = c2 < 0 ? -1.0 : 1.0;
    if (lt > 700.0) {
      num = v21, den = v22;
    } else {
      const double t = sg * std::exp(lt);
      num = v11 + t * v21, den = v12 + t * v22;
    }
  }
  if (den == 0.0) throw Error(ErrorCode::DegenerateDenominator, "k32(a) denominator vanishes");
  return k1 * num / den + w2 - k1;
}

// ---------------------------------------------------------------- band-edge matching

enum class EdgeTier { Far, Middle, Near };

inline const char* to_string(EdgeTier t) {
  switch (t) {
    case EdgeTier::Far: return "far";
    case EdgeTier::Middle: return "middle";
    case EdgeTier::Near: return "near";
  }
  return "?";
}

struct BandEdgeMatch {
  int a = 1;
  int sigma = 1;
  double omega2 = 0.0;
  /// Left coefficients normalized to c1 = 1, or (0, 1) on the c1 = 0 branch.
  double c1 = 1.0;
  double c2 = 0.0;
  double k32_exact = 0.0;
  /// NaN in the middle tier.
  double k32_asymptotic = std::numeric_limits<double>::quiet_NaN();
  EdgeTier tier = EdgeTier::Far;
  double zeta = 0.0;
};

/// k32 for which omega2 = k1 + k2 + a sigma (k1 + k2 a) is an eigenvalue of the n-cell chain.
inline BandEdgeMatch band_edge_match(double k1, double k2, double k31, int n, int a, int sigma) {
  if (a != 1 && a != -1) throw Error(ErrorCode::InvalidA, "a must be +1 or -1");
  if (sigma != 1 && sigma != -1) throw Error(ErrorCode::InvalidConfig, "sigma must be +1 or -1");
  const BulkParams p{k1, k2};
  BandEdgeMatch m;
  m.a = a;
  m.sigma = sigma;
  m.omega2 = k1 + k2 + a * sigma * (k1 + k2 * a);
  const double as = a * sigma;
  const double kk = k1 + k31 - m.omega2;
  // (u1, u2) ~ (k1, kk) = c1 (1, -as) + c2 (1, as)
  double c1 = 0.5 * (k1 - as * kk), c2 = 0.5 * (k1 + as * kk);
  if (std::abs(c1) <= 1e-14 * (k1 + std::abs(kk))) {
    c1 = 0.0;
    c2 = 1.0;
  } else {
    c2 /= c1;
    c1 = 1.0;
  }
  m.c1 = c1;
  m.c2 = c2;
  const Eigen::Vector2d end = band_edge_end_cell(p, a, sigma, c1, c2, n);
  const double mag = std::abs(end[0]) + std::abs(end[1]);
  if (std::abs(end[1]) <= 1e-14 * mag) throw Error(ErrorCode::NoMatch, "end cell has u_2n = 0");
  m.k32_exact = k1 * end[0] / end[1] + m.omega2 - k1;
  m.zeta = as * (c1 - c2 - c2 * (n - 1) * (2 * k2 + 2 * a * k1) / k2);

  const double base = k2 * (1 + sigma);
  const double x = c1 == 0.0 ? std::numeric_limits<double>::infinity() : std::abs(c2) * n;
  if (x >= 10.0) {
    m.tier = EdgeTier::Far;
    m.k32_asymptotic = base + as * k1 * k2 / (n * (k2 + a * k1));
  } else if (x <= 0.1) {
    m.tier = EdgeTier::Near;
    m.k32_asymptotic = base - (k31 - base);
  } else {
    m.tier = EdgeTier::Middle;
  }
  return m;
}

/// k32 in [lo, hi] at which an eigenvalue of the chain crosses omega2 = target.
inline double bisect_crossing_k32(ChainConfig c, double target_omega2, double lo, double hi, double tol = 1e-13) {
  auto count = [&](double k32) {
    c.k32 = k32;
    return sturm_count(assemble(c), -target_omega2);
  };
  const int clo = count(lo), chi = count(hi);
  if (clo == chi) throw Error(ErrorCode::NoMatch, "no eigenvalue crosses the target in the bracket");
  while (hi - lo > tol * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (count(mid) == clo) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- near-band-edge existence

struct EdgeExistence {
  double edge = 0.0;
  int a = 1;
  int sigma = 1;
  /// Boundary stiffness value k2 (1 + sigma) that admits a mode at this edge.
  double special = 0.0;
  Closeness left = Closeness::Far;
  Closeness right = Closeness::Far;
  bool possible = false;
  /// Required sign of k32 - special when the left end is generic; 0 if no constraint.
  int k32_sign = 0;
  /// Omega(1/n) scale of |k32 - special|.
  double k32_scale = 0.0;
};

struct NearEdgeReport {
  std::vector<EdgeExistence> edges;
  int max_at_edges = 0;
  int edge_states_outside = 0;
  std::string summary;
};

inline NearEdgeReport near_band_edge_existence(const ChainConfig& c) {
  c.validate();
  const int n = c.n;
  const double k1 = c.k1, k2 = c.k2;
  NearEdgeReport rep;
  const std::pair<int, int> branches[4] = {{1, -1}, {-1, -1}, {-1, 1}, {1, 1}};
  for (auto [a, s] : branches) {
    EdgeExistence e;
    e.a = a;
    e.sigma = s;
    e.edge = k1 + k2 + a * s * (k1 + k2 * a);
    e.special = k2 * (1 + s);
    e.left = closeness(c.k31 - e.special, n);
    e.right = closeness(c.k32 - e.special, n);
    e.possible = e.left != Closeness::Far || e.right != Closeness::Far;
    if (e.left == Closeness::Far && e.right != Closeness::Far && s == 1 && k1 < k2) {
      e.k32_sign = a;
      e.k32_scale = k1 * k2 / (n * std::abs(k2 + a * k1));
    }
    rep.edges.push_back(e);
  }
  const auto l = closeness(tube_margin(k2, c.k31), n), r = closeness(tube_margin(k2, c.k32), n);
  const int near = (l != Closeness::Far) + (r != Closeness::Far);
  if (near == 0) {
    rep.max_at_edges = 0;
    rep.edge_states_outside = 2;
    rep.summary = "no eigenfrequencies at band edges; two outside";
  } else if (near == 1) {
    rep.max_at_edges = 1;
    rep.edge_states_outside = 1;
    rep.summary = "at most one at a band edge; one edge state outside";
  } else {
    rep.max_at_edges = 2;
    rep.edge_states_outside = 0;
    const bool opt = c.k31 > k2 && c.k32 > k2, ac = c.k31 < k2 && c.k32 < k2;
    rep.summary = opt  ? "at most two near optical edges"
                  : ac ? "at most two near acoustic edges"
                       : "at most two near edges: one optical, one acoustic";
  }
  return rep;
}

// ---------------------------------------------------------------- in-band patterns

enum class BandSide { Lower, Upper };
enum class Pattern { Integer, HalfInteger, Shifted };

inline const char* to_string(Pattern p) {
  switch (p) {
    case Pattern::Integer: return "integer";
    case Pattern::HalfInteger: return "half_integer";
    case Pattern::Shifted: return "shifted";
  }
  return "?";
}

struct BandEdgeInfo {
  double edge = 0.0;
  /// Decay factor at the edge: theta = 0 for +1, pi for -1.
  int a = 1;
  /// Boundary value that selects the half-integer pattern.
  double special = 0.0;
  /// omega2 ~ edge + curvature dtheta^2.
  double curvature = 0.0;
};

inline BandEdgeInfo band_edge_info(const BulkParams& p, BandTag band, BandSide side) {
  if (std::abs(p.k1 - p.k2) <= 1e-9) throw Error(ErrorCode::GapClosed, "k1 == k2");
  if (band != BandTag::Acoustic && band != BandTag::Optical) throw Error(ErrorCode::InvalidConfig, "band");
  const double k1 = p.k1, k2 = p.k2, kk = k1 * k2;
  BandEdgeInfo e;
  if (band == BandTag::Acoustic && side == BandSide::Lower) {
    e.edge = 0.0, e.a = 1, e.curvature = kk / (2 * (k1 + k2));
  } else if (band == BandTag::Optical && side == BandSide::Upper) {
    e.edge = 2 * (k1 + k2), e.a = 1, e.curvature = -kk / (2 * (k1 + k2));
  } else if (band == BandTag::Acoustic) {
    e.edge = p.acoustic_top(), e.a = -1, e.curvature = -kk / (2 * std::abs(k2 - k1));
  } else {
    e.edge = p.optical_bottom(), e.a = -1, e.curvature = kk / (2 * std::abs(k2 - k1));
  }
  const bool at_2k1 = std::abs(e.edge - 2 * k1) < 1e-12 * std::max(1.0, e.edge);
  e.special = (e.edge == 0.0 || at_2k1) ? 0.0 : 2 * k2;
  return e;
}

struct InBandEstimate {
  BandTag band = BandTag::Optical;
  BandSide side = BandSide::Lower;
  Pattern pattern = Pattern::Integer;
  double edge_omega2 = 0.0;
  /// Offset of the shifted pattern, in (0, pi); NaN otherwise.
  double gamma = std::numeric_limits<double>::quiet_NaN();
  /// Both ends near the special value: the integer index may be offset by one.
  bool index_shift_ambiguous = false;
  /// Reflected chain was used because only the left end is near the special value.
  bool mirrored = false;
  /// Leading-order pattern, k = 1..k_max.
  std::vector<double> delta_theta;
  /// Two-term series; empty outside the optical lower edge with k1 < k2.
  std::vector<double> tilde_theta;
  std::vector<double> delta_alpha;
  std::vector<double> delta_beta;
  std::vector<double> omega2;
  std::vector<Eigen::VectorXd> approx_modes;
};

namespace detail {

enum class Tube { Near, Far, Mid };

/// Near when n|d| <= 0.1, Far when n|d| >= 10.
inline Tube pattern_tube(double d, int n) {
  const double x = std::abs(d) * n;
  if (x <= 0.1) return Tube::Near;
  if (x >= 10.0) return Tube::Far;
  return Tube::Mid;
}

/// (2k1 + k3 - 2k2) / (2k2 - k3)
inline double beta_ratio(double k1, double k2, double k3) { return (2 * k1 + k3 - 2 * k2) / (2 * k2 - k3); }

/// First-order coefficient X in tilde_theta ~ X p pi/(n-1) + X^2 p pi/(n-1)^2.
inline double tilde_coefficient(double k1, double k2, double k31, double k32, Pattern pat) {
  const double c = k2 / (2 * (k2 - k1));
  if (pat == Pattern::Integer) return (beta_ratio(k1, k2, k31) + beta_ratio(k1, k2, k32)) * c;
  return beta_ratio(k1, k2, k31) * c - 0.5;
}

/// Sublattice-form vector (-1)^{j-1} (sin(m(da+db-(j-1)dt)), sin(m(-da+db-(j-1)dt))).
inline Eigen::VectorXd sine_form(double da, double db, double dt, double mult, int n) {
  Eigen::VectorXd u(2 * n);
  for (int j = 0; j < n; ++j) {
    const double sg = j % 2 == 0 ? 1.0 : -1.0;
    u[2 * j] = sg * std::sin(mult * (da + db - j * dt));
    u[2 * j + 1] = sg * std::sin(mult * (-da + db - j * dt));
  }
  return u;
}

}  // namespace detail

/// Predicted near-edge in-band frequencies and modes for the first k_max modes from the edge.
inline InBandEstimate inband_pattern(const ChainConfig& cin, BandTag band, BandSide side, int k_max) {
  cin.validate();
  if (k_max < 1 || 10 * k_max > cin.n) throw Error(ErrorCode::InvalidConfig, "k_max must satisfy 1 <= k_max <= n/10");
  const BulkParams p = cin.bulk();
  const auto info = band_edge_info(p, band, side);
  const int n = cin.n;
  ChainConfig c = cin;
  auto tl = detail::pattern_tube(c.k31 - info.special, n), tr = detail::pattern_tube(c.k32 - info.special, n);
  InBandEstimate est;
  est.band = band;
  est.side = side;
  est.edge_omega2 = info.edge;
  if (tl != detail::Tube::Far && tr == detail::Tube::Far) {
    std::swap(c.k31, c.k32);
    std::swap(tl, tr);
    est.mirrored = true;
  }
  const bool series_edge = band == BandTag::Optical && side == BandSide::Lower && c.k1 < c.k2;
  if (tl == detail::Tube::Far && tr == detail::Tube::Far) {
    est.pattern = Pattern::Integer;
  } else if (tl == detail::Tube::Far && tr == detail::Tube::Near) {
    est.pattern = Pattern::HalfInteger;
  } else if (tl == detail::Tube::Near && tr == detail::Tube::Near) {
    est.pattern = Pattern::Integer;
    est.index_shift_ambiguous = true;
  } else if (tl == detail::Tube::Far && tr == detail::Tube::Mid && series_edge) {
    est.pattern = Pattern::Shifted;
  } else {
    throw Error(ErrorCode::PatternUndetermined, "boundary stiffness inside an ambiguous tube");
  }

  const double pi = std::numbers::pi;
  const double h = pi / (n - 1);
  const double cc = c.k2 / (2 * (c.k2 - c.k1));
  if (est.pattern == Pattern::Shifted) {
    const double d = c.k32 - info.special;
    const double da = cc * 0.5 * h;
    double g = std::atan(-2 * c.k1 * da / d);
    if (g <= 0) g += pi;
    est.gamma = g;
  }
  double x = 0.0;
  const bool series = series_edge && !est.index_shift_ambiguous && est.pattern != Pattern::Shifted;
  if (series) x = detail::tilde_coefficient(c.k1, c.k2, c.k31, c.k32, est.pattern);

  for (int k = 1; k <= k_max; ++k) {
    double base;
    if (est.pattern == Pattern::Integer) base = k * pi;
    else if (est.pattern == Pattern::HalfInteger) base = (k - 0.5) * pi;
    else base = (k - 1) * pi + est.gamma;
    est.delta_theta.push_back(base / (n - 1));
    double dt = base / (n - 1);
    if (series) {
      const double tt = x * base / (n - 1) + x * x * base / ((n - 1.0) * (n - 1.0));
      est.tilde_theta.push_back(tt);
      dt = (base + tt) / (n - 1);
    }
    est.omega2.push_back(info.edge + info.curvature * dt * dt);
    if (series_edge) {
      const double da = cc * dt;
      est.delta_alpha.push_back(da);
      est.delta_beta.push_back(detail::beta_ratio(c.k1, c.k2, c.k31) * da);
    }
  }
  if (series) {
    const double dt1 = est.delta_theta[0] + est.tilde_theta[0] / (n - 1);
    for (int k = 1; k <= k_max; ++k) {
      const double mult = est.pattern == Pattern::Integer ? double(k) : 2.0 * k - 1.0;
      Eigen::VectorXd u = detail::sine_form(est.delta_alpha[0], est.delta_beta[0], dt1, mult, n);
      if (est.mirrored) u.reverseInPlace();
      est.approx_modes.push_back(u);
    }
  }
  return est;
}

struct InBandExact {
  std::vector<int> mode_indices;
  std::vector<double> delta_theta;
  /// (n-1) dtheta minus the pattern base.
  std::vector<double> tilde_theta;
  std::vector<double> delta_alpha;
  std::vector<double> delta_beta;
  std::vector<double> omega2;
};

namespace detail {

inline double reduce_beta(double beta) { return beta < 0.5 * std::numbers::pi ? beta : beta - std::numbers::pi; }

}  // namespace detail

/// Exact near-edge quantities for the first k_max in-band modes counted from the edge.
inline InBandExact inband_exact(const ClassifiedSpectrum& cs, BandTag band, BandSide side, int k_max,
                                Pattern pattern = Pattern::Integer, double gamma = 0.0) {
  const ChainConfig& c = cs.spectrum.config;
  const BulkParams p = c.bulk();
  const auto info = band_edge_info(p, band, side);
  std::vector<int> order = band == BandTag::Optical ? cs.optical_modes : cs.acoustic_modes;
  // optical list runs up from the lower edge, acoustic list down from the upper edge
  const bool reverse = (band == BandTag::Optical) == (side == BandSide::Upper);
  if (reverse) std::reverse(order.begin(), order.end());
  InBandExact ex;
  const int n = c.n;
  const double pi = std::numbers::pi;
  for (int k = 1; k <= k_max && k <= int(order.size()); ++k) {
    const auto& m = cs.modes[order[k - 1]];
    if (!m.te.on_unit_circle()) continue;
    const double th = *m.te.theta;
    const double dt = info.a == -1 ? pi - th : th;
    double base;
    if (pattern == Pattern::Integer) base = k * pi;
    else if (pattern == Pattern::HalfInteger) base = (k - 0.5) * pi;
    else base = (k - 1) * pi + gamma;
    ex.mode_indices.push_back(order[k - 1]);
    ex.delta_theta.push_back(dt);
    ex.tilde_theta.push_back((n - 1) * dt - base);
    ex.omega2.push_back(m.omega2);
    ex.delta_alpha.push_back(m.alpha + 0.5 * pi);
    ex.delta_beta.push_back(std::isnan(m.beta) ? m.beta : detail::reduce_beta(m.beta));
  }
  return ex;
}

/// Max-norm distance between the sine-form approximation of mode k and the exact mode k,
/// both in the unit-amplitude cosine normalization, minimized over sign.
inline double approx_eigvec_error(const ChainConfig& cin, int k) {
  cin.validate();
  if (!(cin.k1 < cin.k2)) throw Error(ErrorCode::InvalidConfig, "requires k1 < k2");
  if (k < 1) throw Error(ErrorCode::InvalidConfig, "k >= 1");
  ChainConfig c = cin;
  const double sp = 2 * c.k2;
  auto tl = detail::pattern_tube(c.k31 - sp, c.n), tr = detail::pattern_tube(c.k32 - sp, c.n);
  if (tl != detail::Tube::Far && tr == detail::Tube::Far) {
    std::swap(c.k31, c.k32);
    std::swap(tl, tr);
  }
  double mult;
  if (tl == detail::Tube::Far && tr == detail::Tube::Far) mult = k;
  else if (tl == detail::Tube::Far && tr == detail::Tube::Near) mult = 2.0 * k - 1.0;
  else throw Error(ErrorCode::PatternUndetermined, "no sine-form approximation for this boundary setting");

  const auto cs = classify_spectrum(c);
  if (int(cs.optical_modes.size()) < k) throw Error(ErrorCode::InvalidConfig, "not enough optical modes");
  const auto& m1 = cs.modes[cs.optical_modes[0]];
  const auto& mk = cs.modes[cs.optical_modes[k - 1]];
  const double pi = std::numbers::pi;
  const double da = m1.alpha + 0.5 * pi, db = detail::reduce_beta(m1.beta), dt = pi - *m1.te.theta;
  const Eigen::VectorXd approx = detail::sine_form(da, db, dt, mult, c.n);
  const Eigen::VectorXd exact = cs.spectrum.mode(mk.mode_index) / (2.0 * mk.r * mk.rho);
  return std::min((approx - exact).cwiseAbs().maxCoeff(), (approx + exact).cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------- odd chains

struct OddChainMidgap {
  int sites = 0;
  double omega2_predicted = 0.0;
  /// Eigenvalue of the assembled operator closest to the prediction.
  double omega2_numeric = 0.0;
  /// Analytic mode on the odd sublattice, unit norm.
  Eigen::VectorXd mode;
  double residual = 0.0;
  /// Largest even-sublattice amplitude of the numeric eigenvector.
  double even_max = 0.0;
  /// u3 / u1 of the numeric eigenvector.
  double cell_ratio = 0.0;
  End side = End::Left;
};

/// Mid-gap mode of the 2n+1 chain with bonds k1, k2, ..., k1, k2 and walls k31 = k2, k32 = k1.
inline OddChainMidgap odd_chain_midgap(double k1, double k2, int n) {
  if (!(k1 > 0 && k2 > 0) || n < 1) throw Error(ErrorCode::InvalidConfig, "k1, k2 > 0 and n >= 1 required");
  const int m = 2 * n + 1;
  std::vector<double> bonds(m - 1);
  for (int j = 0; j < m - 1; ++j) bonds[j] = j % 2 == 0 ? k1 : k2;
  const Tridiagonal t = assemble_bonds(bonds, k2, k1);
  OddChainMidgap out;
  out.sites = m;
  out.omega2_predicted = k1 + k2;
  out.mode = Eigen::VectorXd::Zero(m);
  for (int j = 0; j <= n; ++j) out.mode[2 * j] = std::pow(-k1 / k2, j);
  out.mode.normalize();
  out.residual = residual_norm(t, -out.omega2_predicted, out.mode);

  auto [lam, vecs] = tridiagonal_eigen(t);
  int best = 0;
  for (int j = 1; j < lam.size(); ++j)
    if (std::abs(lam[j] + out.omega2_predicted) < std::abs(lam[best] + out.omega2_predicted)) best = j;
  out.omega2_numeric = -lam[best];
  const Eigen::VectorXd u = vecs.col(best);
  for (int j = 1; j < m; j += 2) out.even_max = std::max(out.even_max, std::abs(u[j]));
  out.cell_ratio = u[2] / u[0];
  out.side = std::abs(u[0]) >= std::abs(u[m - 1]) ? End::Left : End::Right;
  return out;
}

}  // namespace chainspectra
