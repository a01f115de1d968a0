#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "core_model.hpp"
#include "eigensolver.hpp"
#include "errors.hpp"

namespace chainspectra {

struct NonlinearConfig {
  ChainConfig chain;
  /// Cubic on-site coefficient in q'' = L q + b q^3.
  double b = 1.0;
  /// Highest odd harmonic.
  int harmonics = 7;
  double newton_tol = 1e-10;
  double step = 0.05;
  double max_step = 0.5;
  double min_step = 1e-8;
  int max_points = 400;
  double delta_res = 1e-3;

  void validate() const {
    chain.validate();
    if (harmonics < 1 || harmonics % 2 == 0) throw Error(ErrorCode::InvalidConfig, "harmonics must be odd and >= 1");
    if (!(newton_tol > 0)) throw Error(ErrorCode::InvalidConfig, "newton_tol must be > 0");
    if (!(step > 0) || !(min_step > 0) || max_step < step) throw Error(ErrorCode::InvalidConfig, "step sizes");
  }
};

struct PeriodicSolution {
  /// A(j, i) multiplies cos((2i+1) tau) at site j.
  Eigen::MatrixXd coeffs;
  double omega = 0.0;
  /// Energy from the turning point tau = 0.
  double energy = 0.0;
  /// Energy averaged over one period.
  double energy_quadrature = 0.0;
  double ipr = 0.0;
  double residual = 0.0;
  /// Projection of the fundamental profile on the seed mode.
  double amplitude = 0.0;
  double arclength = 0.0;
};

struct ExitEvent {
  int point_index = 0;
  double arclength = 0.0;
  double omega2 = 0.0;
  double edge = 0.0;
};

struct ContinuationBranch {
  std::vector<PeriodicSolution> points;
  int seed_mode = 0;
  double seed_omega = 0.0;
  std::optional<ExitEvent> exit_event;
  std::optional<ErrorCode> termination;
};

struct NonresonanceReport {
  bool pass = true;
  /// Distance of omega_j / omega_seed to the nearest integer other than 1, per mode; seed entry is +inf.
  std::vector<double> margins;
  double min_margin = std::numeric_limits<double>::infinity();
  int worst_mode = -1;
};

/// omega_j / omega_seed must avoid 0 and every integer >= 2 by delta.
inline NonresonanceReport check_nonresonance(const std::vector<double>& omegas, int seed, double delta = 1e-3) {
  if (seed < 0 || seed >= int(omegas.size())) throw Error(ErrorCode::InvalidConfig, "seed index out of range");
  NonresonanceReport r;
  const double w0 = omegas[seed];
  r.margins.assign(omegas.size(), std::numeric_limits<double>::infinity());
  for (int j = 0; j < int(omegas.size()); ++j) {
    if (j == seed) continue;
    const double q = omegas[j] / w0;
    double m = std::abs(q);
    for (double k = std::max(2.0, std::floor(q)); k <= std::ceil(q) + 1; ++k) m = std::min(m, std::abs(q - k));
    if (q >= 1.0 && q < 2.0) m = std::min(m, 2.0 - q);
    r.margins[j] = m;
    if (m < r.min_margin) r.min_margin = m, r.worst_mode = j;
  }
  r.pass = r.min_margin > delta;
  return r;
}

inline NonresonanceReport check_nonresonance(const Spectrum& s, int seed, double delta = 1e-3) {
  std::vector<double> w(s.size());
  for (int j = 0; j < s.size(); ++j) w[j] = std::sqrt(std::max(0.0, s.omega2(j)));
  return check_nonresonance(w, seed, delta);
}

inline double participation_ipr(const Eigen::VectorXd& profile) {
  const Eigen::ArrayXd p2 = profile.array().square();
  const double s = p2.sum();
  if (s == 0.0) return 0.0;
  return (p2 / s).square().sum();
}

/// Odd-harmonic balance of omega^2 Q'' = L Q + b Q^3 for Q_j = sum_h A_{j,h} cos(h tau).
class HarmonicBalance {
 public:
  HarmonicBalance(Tridiagonal op, double b, int harmonics)
      : op_(std::move(op)), b_(b), nh_((harmonics + 1) / 2), m_(4 * harmonics + 4), sites_(op_.size()) {
    cos_.resize(m_, nh_);
    for (int k = 0; k < m_; ++k)
      for (int i = 0; i < nh_; ++i) cos_(k, i) = std::cos((2 * i + 1) * 2.0 * std::numbers::pi * k / m_);
  }

  int sites() const { return sites_; }
  int harmonics_kept() const { return nh_; }
  int unknowns() const { return sites_ * nh_ + 1; }
  const Tridiagonal& op() const { return op_; }

  /// Collocation samples Q_j(tau_k), sites by row.
  Eigen::MatrixXd samples(const Eigen::MatrixXd& a) const { return a * cos_.transpose(); }

  /// Projected residual R(j, i), zero for an exact truncated solution.
  Eigen::MatrixXd residual(const Eigen::MatrixXd& a, double omega) const {
    const Eigen::MatrixXd q = samples(a);
    const Eigen::MatrixXd cubic = (2.0 / m_) * q.array().cube().matrix() * cos_;
    Eigen::MatrixXd r(sites_, nh_);
    for (int i = 0; i < nh_; ++i) {
      const double h = 2 * i + 1;
      r.col(i) = -omega * omega * h * h * a.col(i) - op_.apply(a.col(i)) - b_ * cubic.col(i);
    }
    return r;
  }

  Eigen::VectorXd pack(const Eigen::MatrixXd& a, double omega) const {
    Eigen::VectorXd x(unknowns());
    for (int j = 0; j < sites_; ++j) x.segment(j * nh_, nh_) = a.row(j).transpose();
    x[unknowns() - 1] = omega;
    return x;
  }

  void unpack(const Eigen::VectorXd& x, Eigen::MatrixXd& a, double& omega) const {
    a.resize(sites_, nh_);
    for (int j = 0; j < sites_; ++j) a.row(j) = x.segment(j * nh_, nh_).transpose();
    omega = x[unknowns() - 1];
  }

  Eigen::VectorXd residual_vector(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd a;
    double w;
    unpack(x, a, w);
    const Eigen::MatrixXd r = residual(a, w);
    Eigen::VectorXd out(unknowns() - 1);
    for (int j = 0; j < sites_; ++j) out.segment(j * nh_, nh_) = r.row(j).transpose();
    return out;
  }

  /// Jacobian of the residual bordered by one extra constraint row.
  Eigen::SparseMatrix<double> bordered_jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& row) const {
    Eigen::MatrixXd a;
    double w;
    unpack(x, a, w);
    const Eigen::MatrixXd q = samples(a);
    const int nu = unknowns();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(std::size_t(sites_) * (nh_ * nh_ + 3 * nh_) + nu);
    for (int j = 0; j < sites_; ++j) {
      const Eigen::VectorXd q2 = q.row(j).array().square().transpose();
      const Eigen::MatrixXd g = (6.0 / m_) * cos_.transpose() * q2.asDiagonal() * cos_;
      for (int i = 0; i < nh_; ++i) {
        const double h = 2 * i + 1;
        const int r = j * nh_ + i;
        for (int k = 0; k < nh_; ++k) {
          double v = -b_ * g(i, k);
          if (k == i) v += -w * w * h * h - op_.diag[j];
          t.emplace_back(r, j * nh_ + k, v);
        }
        if (j > 0) t.emplace_back(r, (j - 1) * nh_ + i, -op_.off[j - 1]);
        if (j + 1 < sites_) t.emplace_back(r, (j + 1) * nh_ + i, -op_.off[j]);
        t.emplace_back(r, nu - 1, -2.0 * w * h * h * a(j, i));
      }
    }
    for (int k = 0; k < nu; ++k)
      if (row[k] != 0.0) t.emplace_back(nu - 1, k, row[k]);
    Eigen::SparseMatrix<double> jac(nu, nu);
    jac.setFromTriplets(t.begin(), t.end());
    return jac;
  }

  /// Energy at the turning point tau = 0, where all velocities vanish.
  double energy(const Eigen::MatrixXd& a) const {
    const Eigen::VectorXd q0 = a.rowwise().sum();
    return 0.5 * q0.dot(-op_.apply(q0)) - 0.25 * b_ * q0.array().pow(4).sum();
  }

  /// Period average of kinetic plus potential energy.
  double energy_quadrature(const Eigen::MatrixXd& a, double omega, int points = 256) const {
    double acc = 0.0;
    for (int k = 0; k < points; ++k) {
      const double tau = 2.0 * std::numbers::pi * k / points;
      Eigen::VectorXd q = Eigen::VectorXd::Zero(sites_), dq = Eigen::VectorXd::Zero(sites_);
      for (int i = 0; i < nh_; ++i) {
        const double h = 2 * i + 1;
        q += a.col(i) * std::cos(h * tau);
        dq -= a.col(i) * (h * omega * std::sin(h * tau));
      }
      acc += 0.5 * dq.squaredNorm() + 0.5 * q.dot(-op_.apply(q)) - 0.25 * b_ * q.array().pow(4).sum();
    }
    return acc / points;
  }

 private:
  Tridiagonal op_;
  double b_;
  int nh_;
  int m_;
  int sites_;
  Eigen::MatrixXd cos_;
};

inline Eigen::MatrixXd residual(const NonlinearConfig& cfg, const PeriodicSolution& s) {
  HarmonicBalance hb(assemble(cfg.chain), cfg.b, cfg.harmonics);
  if (s.coeffs.rows() != hb.sites() || s.coeffs.cols() != hb.harmonics_kept())
    throw Error(ErrorCode::InvalidConfig, "coefficient shape does not match the configuration");
  return hb.residual(s.coeffs, s.omega);
}

namespace detail {

struct NewtonResult {
  bool ok = false;
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
};

/// Newton on R(x) = 0 with one linear constraint row . (x - anchor) = 0.
inline NewtonResult bordered_newton(const HarmonicBalance& hb, Eigen::VectorXd x, const Eigen::VectorXd& row,
                                    const Eigen::VectorXd& anchor, double tol, int max_iter = 15) {
  NewtonResult res;
  const int nu = hb.unknowns();
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= max_iter; ++it) {
    Eigen::VectorXd f(nu);
    f.head(nu - 1) = hb.residual_vector(x);
    f[nu - 1] = row.dot(x - anchor);
    const double rn = f.head(nu - 1).cwiseAbs().maxCoeff();
    res.iterations = it;
    if (rn <= tol && std::abs(f[nu - 1]) <= tol) {
      res.ok = true;
      res.x = x;
      res.residual = rn;
      return res;
    }
    if (it > 3 && rn > 0.5 * prev) break;
    prev = rn;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(hb.bordered_jacobian(x, row));
    if (lu.info() != Eigen::Success) break;
    const Eigen::VectorXd dx = lu.solve(f);
    if (lu.info() != Eigen::Success || !dx.allFinite()) break;
    x -= dx;
  }
  res.x = x;
  return res;
}

inline Eigen::VectorXd tangent(const HarmonicBalance& hb, const Eigen::VectorXd& x, const Eigen::VectorXd& prev) {
  const int nu = hb.unknowns();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(hb.bordered_jacobian(x, prev));
  if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularFactor, "tangent system is singular");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(nu);
  e[nu - 1] = 1.0;
  Eigen::VectorXd t = lu.solve(e);
  t.normalize();
  if (t.dot(prev) < 0) t = -t;
  return t;
}

}  // namespace detail

/// Index of the lowest-frequency mode inside the optical band.
inline int lowest_optical_mode(const Spectrum& s) {
  const BulkParams p = s.config.bulk();
  for (int j = 0; j < s.size(); ++j)
    if (band_of(p, s.omega2(j)) == BandTag::Optical) return j;
  throw Error(ErrorCode::InvalidConfig, "no optical in-band mode");
}

/// Fill derived fields of an accepted point.
inline PeriodicSolution make_solution(const HarmonicBalance& hb, const Eigen::VectorXd& x, const Eigen::VectorXd& seed,
                                      double residual, double arclength) {
  PeriodicSolution s;
  hb.unpack(x, s.coeffs, s.omega);
  s.residual = residual;
  s.arclength = arclength;
  s.energy = hb.energy(s.coeffs);
  s.energy_quadrature = hb.energy_quadrature(s.coeffs, s.omega);
  s.ipr = participation_ipr(s.coeffs.col(0));
  s.amplitude = seed.dot(s.coeffs.col(0));
  return s;
}

/// Periodic solution with a prescribed seed projection, from an initial guess.
inline PeriodicSolution solve_at_amplitude(const NonlinearConfig& cfg, const Eigen::VectorXd& seed, double amplitude,
                                           const Eigen::MatrixXd& guess, double omega_guess) {
  cfg.validate();
  HarmonicBalance hb(assemble(cfg.chain), cfg.b, cfg.harmonics);
  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(hb.sites(), hb.harmonics_kept());
  const int nc = std::min<int>(int(guess.cols()), hb.harmonics_kept());
  a0.leftCols(nc) = guess.leftCols(nc);
  Eigen::VectorXd x = hb.pack(a0, omega_guess);
  Eigen::VectorXd row = Eigen::VectorXd::Zero(hb.unknowns());
  for (int j = 0; j < hb.sites(); ++j) row[j * hb.harmonics_kept()] = seed[j];
  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(hb.unknowns());
  for (int j = 0; j < hb.sites(); ++j) anchor[j * hb.harmonics_kept()] = amplitude * seed[j];
  auto nr = detail::bordered_newton(hb, x, row, anchor, cfg.newton_tol, 30);
  if (!nr.ok) throw Error(ErrorCode::ConvergenceFailure, "Newton did not converge at the requested amplitude");
  return make_solution(hb, nr.x, seed, nr.residual, 0.0);
}

/// Pseudo-arclength continuation of a linear mode until the fundamental profile norm reaches amp_max.
inline ContinuationBranch continue_branch(const NonlinearConfig& cfg, int seed_index, double amp_min, double amp_max) {
  cfg.validate();
  const Spectrum sp = full_spectrum(cfg.chain);
  const auto nr = check_nonresonance(sp, seed_index, cfg.delta_res);
  if (!nr.pass) throw Error(ErrorCode::ResonanceEncountered, "seed violates the nonresonance condition");
  std::vector<double> lin(sp.size());
  for (int j = 0; j < sp.size(); ++j) lin[j] = std::sqrt(std::max(0.0, sp.omega2(j)));

  HarmonicBalance hb(assemble(cfg.chain), cfg.b, cfg.harmonics);
  const int nh = hb.harmonics_kept(), nu = hb.unknowns();
  const Eigen::VectorXd u = sp.mode(seed_index);
  ContinuationBranch br;
  br.seed_mode = seed_index;
  br.seed_omega = lin[seed_index];

  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(hb.sites(), nh);
  a0.col(0) = amp_min * u;
  const PeriodicSolution first = solve_at_amplitude(cfg, u, amp_min, a0, br.seed_omega);
  br.points.push_back(first);
  Eigen::VectorXd x = hb.pack(first.coeffs, first.omega);

  Eigen::VectorXd t = Eigen::VectorXd::Zero(nu);
  for (int j = 0; j < hb.sites(); ++j) t[j * nh] = u[j];
  t = detail::tangent(hb, x, t);

  const BulkParams p = cfg.chain.bulk();
  const BandTag seed_band = band_of(p, br.seed_omega * br.seed_omega);
  double h = cfg.step, s = 0.0;
  while (int(br.points.size()) < cfg.max_points) {
    if (br.points.back().coeffs.col(0).norm() >= amp_max) break;
    const Eigen::VectorXd xp = x + h * t;
    auto res = detail::bordered_newton(hb, xp, t, xp, cfg.newton_tol);
    if (!res.ok) {
      h *= 0.5;
      if (h < cfg.min_step) {
        br.termination = ErrorCode::StepUnderflow;
        break;
      }
      continue;
    }
    s += (res.x - x).norm();
    x = res.x;
    t = detail::tangent(hb, x, t);
    br.points.push_back(make_solution(hb, x, u, res.residual, s));
    if (res.iterations <= 3) h = std::min(cfg.max_step, 1.5 * h);

    const double w = br.points.back().omega;
    const double w2 = w * w;
    if (!br.exit_event && band_of(p, w2) != seed_band) {
      ExitEvent e;
      e.point_index = int(br.points.size()) - 1;
      e.arclength = s;
      e.omega2 = w2;
      const auto edges = p.band_edges();
      e.edge = *std::min_element(edges.begin(), edges.end(),
                                 [&](double l, double r) { return std::abs(l - w2) < std::abs(r - w2); });
      br.exit_event = e;
    }
    std::vector<double> probe = lin;
    probe.push_back(w);
    if (!check_nonresonance(probe, int(probe.size()) - 1, cfg.delta_res).pass) {
      br.termination = ErrorCode::ResonanceEncountered;
      break;
    }
  }
  return br;
}

}  // namespace chainspectra
