#include <gtest/gtest.h>

#include <random>

#include "chainspectra/mode_analysis.hpp"

using namespace chainspectra;

namespace {

std::vector<ModeLabel> gap_labels(const ClassifiedSpectrum& cs) {
  std::vector<ModeLabel> out;
  for (const auto& m : cs.modes)
    if (!m.te.on_unit_circle()) out.push_back(m.label);
  return out;
}

}  // namespace

TEST(Classify, GenericLeftEdge) {
  auto cs = classify_spectrum(ChainConfig{50, 1.0, 2.3, 1.3, 3.5});
  auto labels = gap_labels(cs);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(cs.count(ModeLabel::LeftEdge), 1);
  EXPECT_EQ(cs.count(ModeLabel::RightEdge), 1);
}

TEST(Classify, SymmetricTwoSided) {
  auto cs = classify_spectrum(ChainConfig{50, 1.0, 2.3, 1.5, 1.5});
  EXPECT_EQ(cs.count(ModeLabel::TwoSided), 2);
}

TEST(Classify, NearEdgeSlowDecaying) {
  auto cs = classify_spectrum(ChainConfig{50, 1.0, 2.3, 4.58, 4.62});
  bool found = false;
  for (const auto& m : cs.modes)
    if (band_of(BulkParams{1.0, 2.3}, m.omega2) == BandTag::Gap) {
      EXPECT_NEAR(m.te.a.real(), -0.9887, 1e-3);
      found = true;
      EXPECT_EQ(m.label, ModeLabel::SlowDecaying);
    }
  EXPECT_TRUE(found);
}

TEST(Classify, SyntheticCases) {
  ChainConfig c{50, 1.0, 2.3, 1.3, 3.5};
  ModeAnalysis ma;
  ma.te.a = 0.5;
  ma.xi = -1.0 / std::log(0.5);
  ma.c1 = 1.0;
  ma.c2 = 0.0;
  ma.log10_end_ratio = 49 * std::log10(0.5);
  EXPECT_EQ(classify(ma, c), ModeLabel::LeftEdge);
  ma.log10_end_ratio = 0.0;
  EXPECT_EQ(classify(ma, c), ModeLabel::TwoSided);
  ma.te.a = 0.999;
  ma.xi = -1.0 / std::log(0.999);
  EXPECT_EQ(classify(ma, c), ModeLabel::SlowDecaying);
}

TEST(Decompose, ReconstructionRandom) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> nd(5, 60);
  std::uniform_real_distribution<double> k(0.3, 3.0), b(0.0, 6.0);
  for (int r = 0; r < 20; ++r) {
    ChainConfig c{nd(rng), k(rng), k(rng), b(rng), b(rng)};
    auto s = full_spectrum(c);
    for (int j = 0; j < s.size(); ++j) {
      auto ma = decompose(s, j);
      if (ma.te.degenerate || !ma.basis_ok) continue;
      Eigen::VectorXcd rec = reconstruct(ma, c.n);
      Eigen::VectorXd u = s.mode(j);
      double err = (rec - u.cast<cplx>()).cwiseAbs().maxCoeff();
      EXPECT_LT(err, 1e-8) << "cfg " << r << " mode " << j << " w2=" << ma.omega2;
      if (ma.te.on_unit_circle()) {
        EXPECT_LT(std::abs(ma.c2 - std::conj(ma.c1)), 1e-8 * std::abs(ma.c1));
        EXPECT_GE(ma.beta, 0.0);
        EXPECT_LT(ma.beta, std::numbers::pi);
      }
    }
  }
}

TEST(Decompose, SemiInfiniteLimit) {
  for (int n : {20, 30, 50}) {
    ChainConfig c{n, 1.0, 2.3, 1.3, 3.5};
    auto cs = classify_spectrum(c);
    double at = solve_semi_infinite(1.0, 2.3, 1.3)[0].a_tilde;
    for (const auto& m : cs.modes)
      if (m.label == ModeLabel::LeftEdge)
        EXPECT_LE(std::abs(m.te.a.real() - at), std::max(1e-10, 10 * std::pow(std::abs(at), 2 * n)));
  }
}

TEST(ClassifiedSpectrum, CountsBounded) {
  for (double k31 = 0.0; k31 <= 6.0; k31 += 0.75)
    for (double k32 = 0.0; k32 <= 6.0; k32 += 0.75) {
      auto cs = classify_spectrum(ChainConfig{50, 1.0, 2.3, k31, k32});
      EXPECT_LE(cs.out_of_band_count, 2);
      EXPECT_GE(cs.n1() + cs.n2(), 100 - 2);
      EXPECT_LE(cs.n1() + cs.n2(), 100);
    }
}

TEST(ClassifiedSpectrum, InBandOrdering) {
  auto cs = classify_spectrum(ChainConfig{30, 1.0, 2.3, 1.3, 3.5});
  for (size_t i = 1; i < cs.optical_modes.size(); ++i) {
    EXPECT_GT(cs.modes[cs.optical_modes[i]].omega2, cs.modes[cs.optical_modes[i - 1]].omega2);
    EXPECT_LT(cs.modes[cs.optical_modes[i]].theta, cs.modes[cs.optical_modes[i - 1]].theta);
  }
  for (size_t i = 1; i < cs.acoustic_modes.size(); ++i)
    EXPECT_LT(cs.modes[cs.acoustic_modes[i]].theta, cs.modes[cs.acoustic_modes[i - 1]].theta);
}

TEST(MinChainSize, ScanAgreesWithExact) {
  const double eps = 1e-6;
  int ns = min_chain_size(1.0, 2.3, 1.3, 3.5, eps);
  EXPECT_GT(ns, 2);
  double at = solve_semi_infinite(1.0, 2.3, 1.3)[0].a_tilde;
  for (int n : {ns, ns + 2}) {
    auto cs = classify_spectrum(ChainConfig{n, 1.0, 2.3, 1.3, 3.5});
    for (const auto& m : cs.modes)
      if (!m.te.on_unit_circle() && std::abs(m.te.a.real() - at) < 1e-3)
        EXPECT_LT(std::abs(m.c2 / m.c1), 3 * eps) << n;
  }
  auto cs = classify_spectrum(ChainConfig{ns - 3, 1.0, 2.3, 1.3, 3.5});
  for (const auto& m : cs.modes)
    if (!m.te.on_unit_circle() && std::abs(m.te.a.real() - at) < 1e-2) EXPECT_GT(std::abs(m.c2 / m.c1), eps);
}

TEST(MinChainSize, VacuousBound) {
  EXPECT_EQ(min_chain_size(1.0, 2.3, 1.3, 3.5, std::numeric_limits<double>::infinity()), 2);
}

TEST(MinChainSize, SpecialCaseScaling) {
  int small_k = min_chain_size(1.0, 2.3, 2.3, 5.0, 1e-6);
  int large_k = min_chain_size(1.0, 2.3, 2.3, 500.0, 1e-6);
  EXPECT_LT(large_k, small_k);
}

TEST(MinChainSize, NoEdgeState) {
  EXPECT_THROW(min_chain_size(2.3, 1.0, 1.5, 3.0, 1e-6), Error);
}
