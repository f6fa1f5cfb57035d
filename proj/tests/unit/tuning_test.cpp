#include <gtest/gtest.h>

#include <cmath>

#include "nnpanel/error.hpp"
#include "nnpanel/simulation.hpp"
#include "nnpanel/tuning.hpp"
#include "test_support.hpp"

namespace nnpanel {
namespace {

using testing::gaussian;
using testing::random_panel;
using testing::rng_for;

MatrixXd kron(const MatrixXd& A, const MatrixXd& B) {
  MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return out;
}

VectorXd vec(const MatrixXd& Z) {
  return Eigen::Map<const VectorXd>(Z.data(), Z.size());
}

TEST(PcaFactors, NormalizationAndBestApproximation) {
  auto rng = rng_for(1);
  const MatrixXd Z = gaussian(rng, 9, 7);
  const FactorPair fp = pca_factors(Z, 2);
  ASSERT_EQ(fp.rank(), 2);
  EXPECT_LE((fp.factors.transpose() * fp.factors / 7.0 - MatrixXd::Identity(2, 2))
                .norm(),
            1e-8);
  const MatrixXd LL = fp.loadings.transpose() * fp.loadings;
  EXPECT_NEAR(LL(0, 1), 0.0, 1e-10);
  EXPECT_GE(LL(0, 0), LL(1, 1));
  Eigen::JacobiSVD<MatrixXd> jac(Z);
  const double tail = jac.singularValues().tail(5).squaredNorm();
  EXPECT_NEAR((Z - fp.product()).squaredNorm(), tail, 1e-10);
  // No random rank-2 candidate fits better.
  for (int j = 0; j < 100; ++j) {
    const MatrixXd C = (fp.loadings + gaussian(rng, 9, 2, 0.1)) *
                       (fp.factors + gaussian(rng, 7, 2, 0.1)).transpose();
    EXPECT_GE((Z - C).squaredNorm(), tail - 1e-10);
  }
}

TEST(PcaFactors, ExactLowRankRecoversSpans) {
  auto rng = rng_for(2);
  const MatrixXd l0 = gaussian(rng, 10, 2);
  const MatrixXd f0 = gaussian(rng, 8, 2);
  const FactorPair fp = pca_factors(MatrixXd(l0 * f0.transpose()), 2);
  EXPECT_LE((projector_pair(fp.loadings).onto - projector_pair(l0).onto).norm(), 1e-8);
  EXPECT_LE((projector_pair(fp.factors).onto - projector_pair(f0).onto).norm(), 1e-8);
}

TEST(PcaFactors, ZeroRankAndRangeErrors) {
  const FactorPair fp = pca_factors(MatrixXd::Ones(4, 3), 0);
  EXPECT_EQ(fp.rank(), 0);
  EXPECT_EQ(fp.product().norm(), 0.0);
  EXPECT_EQ(fp.product().rows(), 4);
  EXPECT_THROW(pca_factors(MatrixXd::Ones(4, 3), 4), Error);
  EXPECT_THROW(pca_factors(MatrixXd::Ones(4, 3), -1), Error);
}

TEST(BetaStep, NoFactorsIsPooledOls) {
  auto rng = rng_for(3);
  PanelData d = random_panel(rng, 6, 5, VectorXd::Constant(2, 1.0), 1);
  const FactorPair empty{MatrixXd(6, 0), MatrixXd(5, 0)};
  EXPECT_LE((beta_step(d, empty) - pooled_ols(d).beta).norm(), 1e-12);
}

TEST(BetaStep, AnnihilatedFactorsGiveTruth) {
  auto rng = rng_for(4);
  VectorXd beta0(2);
  beta0 << -0.3, 1.2;
  PanelData d = random_panel(rng, 8, 7, beta0, 0, 0.0);
  const MatrixXd l0 = gaussian(rng, 8, 2);
  const MatrixXd f0 = gaussian(rng, 7, 2);
  d.Y += l0 * f0.transpose();
  EXPECT_LE((beta_step(d, FactorPair{l0, f0}) - beta0).norm(), 1e-10);
}

TEST(BetaStep, MatchesKroneckerConstruction) {
  auto rng = rng_for(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int N = 3 + rep % 6, T = 3 + (rep * 5) % 6, R = 1 + rep % 2;
    PanelData d = random_panel(rng, N, T, VectorXd::Constant(2, 1.0), R);
    const FactorPair fp{gaussian(rng, N, R), gaussian(rng, T, R)};
    const MatrixXd Ml = projector_pair(fp.loadings).orthogonal;
    const MatrixXd Mf = projector_pair(fp.factors).orthogonal;
    const MatrixXd M = kron(Mf, Ml);  // acts on column-major vec
    MatrixXd x(N * T, 2);
    for (int k = 0; k < 2; ++k) x.col(k) = vec(d.X[k]);
    const VectorXd oracle =
        (x.transpose() * M * x).ldlt().solve(x.transpose() * M * vec(d.Y));
    EXPECT_LE((beta_step(d, fp) - oracle).norm(), 1e-10 * (1 + oracle.norm()));
  }
}

TEST(BetaStep, ShapeMismatchIsRejected) {
  auto rng = rng_for(6);
  PanelData d = random_panel(rng, 5, 4, VectorXd::Ones(1));
  const FactorPair bad{gaussian(rng, 4, 1), gaussian(rng, 4, 1)};
  try {
    beta_step(d, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(PostIterate, FixedPointGivesConstantTrajectory) {
  auto rng = rng_for(7);
  PanelData d = random_panel(rng, 20, 15, VectorXd::Constant(2, 1.0), 2);
  const VectorXd fixed = fit_ls_local(d, 2, pooled_ols(d).beta).beta;
  const EstimationResult r = post_iterate(d, 2, fixed, 3);
  ASSERT_EQ(r.beta_path.size(), 4u);
  for (const VectorXd& b : r.beta_path) EXPECT_LE((b - fixed).norm(), 1e-8);
  EXPECT_EQ(r.objective_trace.size(), 4u);
}

TEST(PostIterate, NoiselessModelIsExactAfterOneStep) {
  auto rng = rng_for(8);
  VectorXd beta0(2);
  beta0 << 1.0, -2.0;
  PanelData d = random_panel(rng, 25, 20, beta0, 2, 0.0);
  const VectorXd start = beta0 + 1e-3 * testing::gaussian_vector(rng, 2);
  const EstimationResult r = post_iterate(d, 2, start, 1);
  // Spans fitted at a perturbed start are only close, so the error
  // contracts rather than vanishing.
  const EstimationResult r2 = post_iterate(d, 2, r.beta, 1);
  EXPECT_LE((r.beta - beta0).norm(), 1e-4);
  EXPECT_LE((r2.beta - beta0).norm(), (r.beta - beta0).norm());
}

TEST(PostIterate, ExactStartStaysExact) {
  auto rng = rng_for(9);
  VectorXd beta0(1);
  beta0 << 0.75;
  PanelData d = random_panel(rng, 12, 12, beta0, 1, 0.0);
  const EstimationResult r = post_iterate(d, 1, beta0, 2);
  EXPECT_LE((r.beta - beta0).norm(), 1e-12);
  EXPECT_NEAR(r.objective_trace.back(), 0.0, 1e-24);
}

TEST(PostIterate, RejectsZeroSteps) {
  auto rng = rng_for(10);
  PanelData d = random_panel(rng, 5, 5, VectorXd::Ones(1));
  try {
    post_iterate(d, 1, VectorXd::Ones(1), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::domain);
  }
}

TEST(PostIterate, TrajectoryAgreesWithRepeatedSingleSteps) {
  auto rng = rng_for(11);
  PanelData d = random_panel(rng, 30, 25, VectorXd::Constant(2, 1.0), 2);
  const VectorXd start = pooled_ols(d).beta;
  const EstimationResult r = post_iterate(d, 2, start, 3);
  VectorXd b = start;
  for (int s = 1; s <= 3; ++s) {
    b = beta_step(d, pca_factors(combine(d, b), 2));
    EXPECT_LE((r.beta_path[s] - b).norm(), 1e-12);
  }
}

TEST(SelectPsi, NoiselessDataGivesZeroPsi) {
  auto rng = rng_for(12);
  PanelData d = random_panel(rng, 20, 20, VectorXd::Constant(1, 1.0), 0, 0.0);
  const TuningReport rep = select_psi(d, 2);
  EXPECT_EQ(rep.psi_hat, 0.0);
}

TEST(SelectPsi, PureNoiseUsesNextSingularValue) {
  auto rng = rng_for(13);
  PanelData d;
  d.Y = gaussian(rng, 30, 25);
  const TuningReport rep = select_psi(d, 8);
  const VectorXd s = singular_values(d.Y);
  EXPECT_NEAR(rep.psi_hat, 2 * s(8) / std::sqrt(750.0), 1e-12);
  EXPECT_EQ(rep.cleaned_spectrum.size(), 25 - 8);
  EXPECT_NEAR(rep.cleaned_spectrum.values(0), s(8), 1e-12);
  EXPECT_EQ(estimate_rank(d, rep), 0);
  EXPECT_EQ(rep.r_hat, 0);
}

TEST(SelectPsi, RMaxBeyondSpectrumGivesZeroAndWarns) {
  auto rng = rng_for(14);
  PanelData d;
  d.Y = gaussian(rng, 5, 4);
  const TuningReport rep = select_psi(d, 4);
  EXPECT_EQ(rep.psi_hat, 0.0);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_THROW(select_psi(d, -1), Error);
}

TEST(SelectPsi, ScaleEquivariance) {
  auto rng = rng_for(15);
  PanelData d = random_panel(rng, 30, 30, VectorXd::Constant(1, 1.0), 2);
  const double a = select_psi(d).psi_hat;
  for (MatrixXd& x : d.X) x *= 3.0;
  d.Y *= 3.0;
  EXPECT_NEAR(select_psi(d).psi_hat, 3.0 * a, 1e-6 * a);
}

TEST(SelectPsi, McDesignIsInUnitInterval) {
  DgpSpec spec;
  spec.seed = 2024;
  const GeneratedPanel g = generate(spec);
  const TuningReport rep = select_psi(g.data, 8);
  EXPECT_GT(rep.psi_hat, 0.0);
  EXPECT_LT(rep.psi_hat, 1.0);
  // Regression value from the first seeded run.
  EXPECT_NEAR(rep.psi_hat, 0.339687256, 1e-6);
  EXPECT_EQ(rep.r_hat, 2);
}

TEST(EstimateRank, CleanSpectrumCountsFactors) {
  auto rng = rng_for(16);
  VectorXd beta0(1);
  beta0 << 2.0;
  PanelData d = random_panel(rng, 30, 30, beta0, 0, 0.0);
  d.Y += 5 * gaussian(rng, 30, 2) * gaussian(rng, 30, 2).transpose();
  d.Y += gaussian(rng, 30, 30, 1e-3);
  TuningReport rep;
  rep.residual_spectrum = svd(combine(d, beta0));
  rep.psi_hat = 2 * rep.residual_spectrum.values(8) / 30.0;
  EXPECT_EQ(estimate_rank(d, rep), 2);
  rep.psi_hat = 0.0;  // every nonzero value is counted
  EXPECT_EQ(estimate_rank(d, rep), 30);
  EXPECT_THROW(estimate_rank(d, rep, 0.0), Error);
}

TEST(EstimateRank, FactorFreeDataIsMostlyZero) {
  int zero = 0;
  for (int rep = 0; rep < 10; ++rep) {
    auto rng = rng_for(100 + rep);
    PanelData d = random_panel(rng, 100, 100, VectorXd::Constant(1, 1.0), 0);
    if (select_psi(d).r_hat == 0) ++zero;
  }
  EXPECT_GE(zero, 9);
}

TEST(PostIterate, ContractsTowardLocalLsOnMcDesign) {
  DgpSpec spec;
  spec.N = spec.T = 100;
  spec.seed = 2024;
  const PanelData d = generate(spec, 1).data;
  const TuningReport t = select_psi(d);
  const EstimationResult r = post_iterate(d, 2, t.beta_star, 6);
  const VectorXd ls = fit_ls_local(d, 2, t.beta_star).beta;
  for (int s = 1; s < 6; ++s) {
    const double step = (r.beta_path[s + 1] - r.beta_path[s]).norm();
    const double previous = (r.beta_path[s] - r.beta_path[s - 1]).norm();
    EXPECT_LE(step, 0.2 * previous) << "step " << s;
  }
  EXPECT_LE((r.beta_path[2] - ls).norm(), 1e-3);
  EXPECT_LE((r.beta_path[6] - ls).norm(), 1e-9);
}

}  // namespace
}  // namespace nnpanel
