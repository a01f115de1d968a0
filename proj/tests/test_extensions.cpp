#include <gtest/gtest.h>

#include <chainspectra/extensions.hpp>

#include <random>

using namespace chainspectra;

namespace {

TwoLayerConfig reference_two_layer() { return TwoLayerConfig{}; }

Lattice2DConfig reference_lattice(int N) {
  Lattice2DConfig c;
  c.N = N;
  return c;
}

}  // namespace

TEST(TwoLayer, BandCorners) {
  const auto c = reference_two_layer();
  const auto b = two_layer_bands(c);
  const double mid = c.k1 + c.k2 + c.k5 + c.k6, dk = c.k5 - c.k6;
  EXPECT_NEAR(b.pair2[0].lo, mid - std::sqrt(dk * dk + (c.k1 + c.k2) * (c.k1 + c.k2)), 1e-12);
  EXPECT_NEAR(b.pair2[0].hi, mid - std::sqrt(dk * dk + (c.k1 - c.k2) * (c.k1 - c.k2)), 1e-12);
  // corners are the dispersion at a = +-1
  EXPECT_NEAR(b.pair2[0].lo, two_layer_omega2_pair2(c, 1.0, -1), 1e-10);
  EXPECT_NEAR(b.pair2[0].hi, two_layer_omega2_pair2(c, -1.0, -1), 1e-10);
  EXPECT_NEAR(b.pair2[1].lo, two_layer_omega2_pair2(c, -1.0, 1), 1e-10);
  EXPECT_NEAR(b.pair2[1].hi, two_layer_omega2_pair2(c, 1.0, 1), 1e-10);
  EXPECT_NEAR(b.pair1[0].hi, two_layer_omega2_pair1(c.k1, c.k2, -1.0, -1), 1e-10);
  EXPECT_NEAR(b.pair1[1].lo, two_layer_omega2_pair1(c.k1, c.k2, -1.0, 1), 1e-10);
  EXPECT_NEAR(b.pair1[1].hi, two_layer_omega2_pair1(c.k1, c.k2, 1.0, 1), 1e-10);

  // a long periodic-like chain fills the bands: every mode outside both pairs is localized
  auto big = c;
  big.n = 150;
  const auto s = two_layer_spectrum(big);
  for (const auto& m : s.info)
    if (m.pair == PairMembership::None) EXPECT_NE(m.label, ModeLabel::Extended);
}

TEST(TwoLayer, SymmetricLayerReduction) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(0.3, 3.0);
  for (int trial = 0; trial < 10; ++trial) {
    TwoLayerConfig c;
    c.n = 12 + trial;
    c.k1 = d(rng), c.k2 = d(rng);
    c.k5 = c.k6 = d(rng);
    c.k31 = c.k32 = d(rng);
    c.k41 = c.k42 = d(rng);
    const Eigen::MatrixXd k = two_layer_stiffness(c);
    // layer (sym, antisym) similarity transform
    const int m = int(k.rows());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
    for (int col = 0; col < 2 * c.n; ++col) {
      p(col, two_layer_dof(0, col)) = p(col, two_layer_dof(1, col)) = std::sqrt(0.5);
      p(2 * c.n + col, two_layer_dof(0, col)) = std::sqrt(0.5);
      p(2 * c.n + col, two_layer_dof(1, col)) = -std::sqrt(0.5);
    }
    const Eigen::MatrixXd b = p * k * p.transpose();
    EXPECT_LT(b.topRightCorner(2 * c.n, 2 * c.n).cwiseAbs().maxCoeff(), 1e-13);
    const ChainConfig single{c.n, c.k1, c.k2, c.k31, c.k41};
    const Eigen::MatrixXd chain = -assemble(single).dense();
    EXPECT_LT((b.topLeftCorner(2 * c.n, 2 * c.n) - chain).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT((b.bottomRightCorner(2 * c.n, 2 * c.n) - chain - 2 * c.k5 * Eigen::MatrixXd::Identity(2 * c.n, 2 * c.n))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-13);

    // spectra: union of single-chain spectrum and its 2 k5 shift
    const Spectrum sp = full_spectrum(single);
    std::vector<double> expect;
    for (int j = 0; j < sp.size(); ++j) {
      expect.push_back(sp.omega2(j));
      expect.push_back(sp.omega2(j) + 2 * c.k5);
    }
    std::sort(expect.begin(), expect.end());
    const auto s = two_layer_spectrum(c);
    ASSERT_EQ(int(expect.size()), int(s.omega2.size()));
    for (int j = 0; j < s.omega2.size(); ++j) EXPECT_NEAR(s.omega2[j], expect[j], 1e-9);
  }
}

TEST(TwoLayer, TransferClosedForms) {
  const auto c = reference_two_layer();
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(0.05, 12.0);
  for (int trial = 0; trial < 40; ++trial) {
    const double w2 = d(rng);
    const auto t = two_layer_transfer(c, w2);
    EXPECT_NEAR(t.det, 1.0, 1e-9);
    const std::array<cplx, 4> a{t.a1, 1.0 / t.a1, t.a2, 1.0 / t.a2};
    for (int j = 0; j < 4; ++j) {
      double best = 1e300;
      for (int i = 0; i < 4; ++i) best = std::min(best, std::abs(t.eigenvalues[i] - a[j]) / std::max(1.0, std::abs(a[j])));
      EXPECT_LT(best, 1e-8) << w2 << " " << j;
      const Eigen::Vector4cd v = t.vectors.col(j);
      EXPECT_LT((t.T.cast<cplx>() * v - a[j] * v).norm() / v.norm(), 1e-8) << w2 << " " << j;
    }
    // v1 layer-symmetric, v3 layer-antisymmetric
    EXPECT_LT(std::abs(t.vectors(0, 0) - t.vectors(1, 0)) + std::abs(t.vectors(2, 0) - t.vectors(3, 0)), 1e-14);
    EXPECT_LT(std::abs(t.vectors(0, 2) + t.vectors(1, 2)) + std::abs(t.vectors(2, 2) + t.vectors(3, 2)), 1e-14);
  }
}

TEST(TwoLayer, DispersionRoundTrip) {
  const auto c = reference_two_layer();
  for (double a : {0.4, -0.7, 0.15}) {
    for (int sigma : {-1, 1}) {
      const double w2 = two_layer_omega2_pair1(c.k1, c.k2, a, sigma);
      const auto t = two_layer_transfer(c, w2);
      double best = 1e300;
      for (int i = 0; i < 4; ++i) best = std::min(best, std::abs(t.eigenvalues[i] - a));
      EXPECT_LT(best, 1e-8) << a << " " << sigma;
      const double w2b = two_layer_omega2_pair2(c, a, sigma);
      const auto tb = two_layer_transfer(c, w2b);
      best = 1e300;
      for (int i = 0; i < 4; ++i) best = std::min(best, std::abs(tb.eigenvalues[i] - a));
      EXPECT_LT(best, 1e-8) << a << " " << sigma;
    }
  }
}

TEST(TwoLayer, ReferenceEdgeStates) {
  const auto s = two_layer_spectrum(reference_two_layer());
  int edge = 0;
  for (const auto& m : s.info) {
    if (m.pair != PairMembership::None) continue;
    EXPECT_TRUE(m.label == ModeLabel::LeftEdge || m.label == ModeLabel::RightEdge || m.label == ModeLabel::TwoSided ||
                m.label == ModeLabel::SlowDecaying);
    if (m.label != ModeLabel::SlowDecaying) ++edge;
  }
  EXPECT_GE(edge, 2);

  // neighborhood of the reference parameters
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> d(0.8, 1.2);
  for (int trial = 0; trial < 30; ++trial) {
    auto c = reference_two_layer();
    c.k2 *= d(rng), c.k5 *= d(rng), c.k6 *= d(rng), c.k41 *= d(rng), c.k42 *= d(rng);
    c.k31 = 0.2 * (d(rng) - 0.8);
    const auto t = two_layer_spectrum(c);
    EXPECT_LE(t.outside_both(), 8);
    for (const auto& m : t.info)
      if (m.pair == PairMembership::None) EXPECT_NE(m.label, ModeLabel::Extended);
  }
}

TEST(Lattice2D, BoundaryRows) {
  const auto c = reference_lattice(8);
  const Eigen::MatrixXd k = Eigen::MatrixXd(lattice2d_stiffness(c));
  const int N = c.N;
  auto id = [&](int i, int j) { return c.index(i - 1, j - 1); };  // 1-based
  const double k1 = c.k1, k2 = c.k2, k3 = c.k3, k4 = c.k4, k5 = c.k5, k6 = c.k6;
  EXPECT_DOUBLE_EQ(k(id(1, 1), id(1, 1)), k1 + k2 + k3 + k5);
  EXPECT_DOUBLE_EQ(k(id(1, 1), id(2, 1)), -k2);
  EXPECT_DOUBLE_EQ(k(id(1, 1), id(1, 2)), -k1);
  for (int j = 1; j < N / 2; ++j) {
    EXPECT_DOUBLE_EQ(k(id(1, 2 * j), id(1, 2 * j)), 2 * k1 + k2 + k5);
    EXPECT_DOUBLE_EQ(k(id(1, 2 * j), id(1, 2 * j + 1)), -k2);
    EXPECT_DOUBLE_EQ(k(id(1, 2 * j), id(2, 2 * j)), -k1);
    EXPECT_DOUBLE_EQ(k(id(1, 2 * j + 1), id(1, 2 * j + 1)), k1 + 2 * k2 + k5);
    EXPECT_DOUBLE_EQ(k(id(N, 2 * j), id(N, 2 * j)), 2 * k1 + k2 + k6);
    EXPECT_DOUBLE_EQ(k(id(N, 2 * j + 1), id(N, 2 * j + 1)), k1 + 2 * k2 + k6);
    EXPECT_DOUBLE_EQ(k(id(2 * j + 1, 1), id(2 * j + 1, 1)), 2 * k1 + k2 + k3);
    EXPECT_DOUBLE_EQ(k(id(2 * j, 1), id(2 * j, 1)), k1 + 2 * k2 + k3);
    EXPECT_DOUBLE_EQ(k(id(2 * j + 1, N), id(2 * j + 1, N)), 2 * k1 + k2 + k4);
    EXPECT_DOUBLE_EQ(k(id(2 * j, N), id(2 * j, N)), k1 + 2 * k2 + k4);
  }
  EXPECT_DOUBLE_EQ(k(id(1, N), id(1, N)), 2 * k1 + k4 + k5);
  EXPECT_DOUBLE_EQ(k(id(N, 1), id(N, 1)), 2 * k2 + k3 + k6);
  EXPECT_DOUBLE_EQ(k(id(N, N), id(N, N)), k1 + k2 + k4 + k6);
  // bulk rows: odd-odd site couples k2 left/down, k1 right/up
  EXPECT_DOUBLE_EQ(k(id(3, 3), id(3, 3)), 2 * k1 + 2 * k2);
  EXPECT_DOUBLE_EQ(k(id(3, 3), id(3, 2)), -k2);
  EXPECT_DOUBLE_EQ(k(id(3, 3), id(4, 3)), -k2);
  EXPECT_DOUBLE_EQ(k(id(3, 3), id(3, 4)), -k1);
  EXPECT_DOUBLE_EQ(k(id(3, 3), id(2, 3)), -k1);
  EXPECT_LT((k - k.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Lattice2D, BulkBandsAgainstTorus) {
  for (auto [k1, k2] : {std::pair{1.0, 1.9}, std::pair{2.0, 0.7}, std::pair{1.3, 1.3}}) {
    const auto u = lattice2d_bands(k1, k2);
    ASSERT_EQ(u.bands.size(), 1u);
    EXPECT_NEAR(u.bands[0].lo, 0.0, 1e-9);
    EXPECT_NEAR(u.bands[0].hi, 4 * (k1 + k2), 1e-9);

    // periodic checkerboard: spectrum inside the union and reaching both ends
    const int n = 12;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
    auto bond = [&](int a, int b, double s) {
      k(a, a) += s, k(b, b) += s, k(a, b) -= s, k(b, a) -= s;
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const bool even = (i + j) % 2 == 0;
        bond(i * n + j, i * n + (j + 1) % n, even ? k1 : k2);
        bond(i * n + j, ((i + 1) % n) * n + j, even ? k2 : k1);
      }
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues();
    for (int j = 0; j < ev.size(); ++j) EXPECT_TRUE(u.contains(ev[j], 1e-9)) << ev[j];
    EXPECT_NEAR(ev.maxCoeff(), 4 * (k1 + k2), 1e-9);
    EXPECT_NEAR(ev.minCoeff(), 0.0, 1e-9);
  }
}

TEST(Lattice2D, WindowedMatchesDense) {
  const auto c = reference_lattice(20);
  const auto k = lattice2d_stiffness(c);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(k)).eigenvalues();
  for (auto [lo, hi] : {std::pair{11.0, 14.0}, std::pair{4.0, 4.6}, std::pair{0.0, 0.3}}) {
    std::vector<double> vals;
    std::vector<Eigen::VectorXd> vecs;
    std::mt19937_64 rng(1);
    const int blo = detail::inertia_below(k, lo), bhi = detail::inertia_below(k, hi);
    detail::window_split(k, lo, hi, blo, bhi, vals, vecs, rng, 10);
    std::sort(vals.begin(), vals.end());
    std::vector<double> ref;
    for (int j = 0; j < ev.size(); ++j)
      if (ev[j] >= lo && ev[j] <= hi) ref.push_back(ev[j]);
    ASSERT_EQ(vals.size(), ref.size()) << lo;
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(vals[j], ref[j], 1e-9);
  }
}

TEST(Lattice2D, EdgeModesAboveBands) {
  const auto s = lattice2d_spectrum(reference_lattice(40));
  ASSERT_EQ(s.omega2.size(), 1600);
  int edge_out = 0;
  for (const auto& m : s.info) {
    EXPECT_LT(m.residual, 1e-9);
    if (m.edge && !m.in_band) ++edge_out;
    if (m.in_band) EXPECT_LE(m.omega2, s.bands.top() + 1e-6);
  }
  EXPECT_GE(edge_out, 10);
  // top mode is strongly boundary concentrated
  EXPECT_GT(s.info.back().boundary_fraction, 0.99);
}

TEST(Lattice2D, EqualCouplingsHaveNoGap) {
  auto c = reference_lattice(16);
  c.k2 = c.k1;
  const auto s = lattice2d_spectrum(c);
  ASSERT_EQ(s.bands.bands.size(), 1u);
  for (int j = 1; j < s.omega2.size(); ++j)
    if (s.omega2[j] < s.bands.top()) EXPECT_LT(s.omega2[j] - s.omega2[j - 1], 0.5);
}

TEST(Lattice2D, SizeCaps) {
  EXPECT_THROW(lattice2d_spectrum(reference_lattice(122)), Error);
  try {
    lattice2d_spectrum(reference_lattice(100));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SizeCapExceeded);
  }
  EXPECT_THROW(lattice2d_spectrum(reference_lattice(7)), Error);
}

TEST(EdgeAnsatz, SyntheticExtendedAndEdge) {
  const auto c = reference_lattice(20);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(c.N * c.N);
  const Eigen::Vector2d amp(0.8, -0.3);
  for (int l = 0; l < c.N / 2; ++l)
    for (int m = 0; m < c.N / 2; ++m) {
      const double f = (1.0 + 0.1 * l) * std::pow(0.6, m);
      u[c.index(2 * l, 2 * m)] = amp[0] * f;
      u[c.index(2 * l, 2 * m + 1)] = amp[1] * f;
    }
  const auto rep = edge2d_ansatz_check(c, Edge2D::E3, u);
  ASSERT_EQ(int(rep.rows.size()), c.N / 2);
  for (const auto& r : rep.rows) {
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_NEAR(r.factor, 0.6, 1e-12);
  }

  const auto s = lattice2d_spectrum(c);
  // an extended mode from the middle of the spectrum is rejected
  const auto ext = edge2d_ansatz_check(c, Edge2D::E3, s.modes.col(s.omega2.size() / 2));
  EXPECT_GT(ext.median_residual, 0.3);

  // the strongest right-edge mode decays away from the k4 wall
  int best = -1;
  double frac = 0.0;
  for (int j = 0; j < s.omega2.size(); ++j) {
    const Eigen::VectorXd v = s.modes.col(j);
    double right = 0.0;
    for (int i = 2; i < c.N - 2; ++i) right += v[c.index(i, c.N - 1)] * v[c.index(i, c.N - 1)] + v[c.index(i, c.N - 2)] * v[c.index(i, c.N - 2)];
    if (s.info[j].edge && right > frac) frac = right, best = j;
  }
  ASSERT_GE(best, 0);
  const Eigen::VectorXd v = s.modes.col(best);
  const auto rep3 = edge2d_ansatz_check(c, Edge2D::E3, v, true, 5);
  const TransverseFit* top = nullptr;
  double topn = 0.0;
  for (const auto& r : rep3.rows) {
    const double nrm = std::hypot(v[c.index(2 * r.start_row, 2 * r.start_col)], v[c.index(2 * r.start_row, 2 * r.start_col + 1)]);
    if (nrm > topn) topn = nrm, top = &r;
  }
  ASSERT_NE(top, nullptr);
  EXPECT_LT(std::abs(top->factor), 1.0);

  const auto e1 = edge2d_ansatz_check(c, Edge2D::E1, v);
  const auto e2 = edge2d_ansatz_check(c, Edge2D::E2, v);
  EXPECT_FALSE(e1.rows.empty());
  EXPECT_FALSE(e2.rows.empty());
}
