#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "adprog/error.hpp"
#include "adprog/gp.hpp"
#include "test_util.hpp"

using namespace adprog;
using namespace adprog::gp;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd col(std::initializer_list<double> v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) { return col(v).col(0); }

// Direct dense evaluation of the evidence, independent of the factor-based code.
double lml_oracle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& h) {
  const Eigen::Index N = X.rows();
  Eigen::MatrixXd K(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) K(i, j) = kernel_eval(h.kernel, X.row(i).transpose(), X.row(j).transpose());
  }
  K.diagonal().array() += h.noise_variance();
  const Eigen::VectorXd r = y.array() - h.prior_mean;
  const double logdet = std::log(K.determinant());
  return -0.5 * r.dot(K.inverse() * r) - 0.5 * logdet - 0.5 * static_cast<double>(N) * kLog2Pi;
}

GPHyper random_hyper(std::mt19937_64& rng, KernelKind kind, Eigen::Index D) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double sf2 = std::exp(u(rng));
  const double noise = std::exp(u(rng) - 1.0);
  if (kind == KernelKind::RbfArd) {
    Eigen::VectorXd ell(D);
    for (Eigen::Index d = 0; d < D; ++d) ell[d] = std::exp(u(rng));
    return GPHyper::make(KernelSpec::rbf_ard(sf2, ell), noise, u(rng));
  }
  return GPHyper::make(KernelSpec::rbf_iso(sf2, std::exp(u(rng))), noise, u(rng));
}

}  // namespace

TEST(Kernel, Examples) {
  const auto k1 = KernelSpec::rbf_iso(1.0, 1.0);
  EXPECT_DOUBLE_EQ(kernel_eval(k1, vec({0.3, -1}), vec({0.3, -1})), 1.0);
  EXPECT_NEAR(kernel_eval(k1, vec({0, 0}), vec({1, 1})), std::exp(-1.0), 1e-15);
  const auto k2 = KernelSpec::rbf_iso(2.0, 1.0);
  EXPECT_NEAR(kernel_eval(k2, vec({0, 0}), vec({1, 1})), 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_THROW(kernel_eval(k1, vec({0}), vec({0, 1})), DataError);
  EXPECT_THROW(KernelSpec::rbf_ard(1.0, vec({1, 1})).check_dimension(3), DataError);
}

TEST(Kernel, ArdMatchesIsoWithEqualLengthscales) {
  std::mt19937_64 rng(1);
  const auto iso = KernelSpec::rbf_iso(1.7, 0.8);
  const auto ard = KernelSpec::rbf_ard(1.7, Eigen::VectorXd::Constant(3, 0.8));
  for (int i = 0; i < 50; ++i) {
    const auto a = testutil::random_vector(rng, 3);
    const auto b = testutil::random_vector(rng, 3);
    EXPECT_NEAR(kernel_eval(iso, a, b), kernel_eval(ard, a, b), 1e-14);
    EXPECT_DOUBLE_EQ(kernel_eval(ard, a, b), kernel_eval(ard, b, a));
  }
}

TEST(Kernel, GramIsSymmetricPsd) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 1, 20);
    const Eigen::Index D = testutil::uniform_int(rng, 1, 4);
    const auto h = random_hyper(rng, trial % 2 ? KernelKind::RbfArd : KernelKind::RbfIso, D);
    const Eigen::MatrixXd K = h.kernel.gram(testutil::random_matrix(rng, N, D));
    EXPECT_LE((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * es.eigenvalues().maxCoeff());
  }
}

TEST(Fit, ScalarAlpha) {
  const auto m = gp_fit(col({0}), vec({1}), GPHyper::make(KernelSpec::rbf_iso(1, 1), 0.1, 0.0));
  EXPECT_NEAR(m.alpha()[0], 1.0 / 1.1, 1e-15);
}

TEST(Fit, FactorReconstructsGram) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 1, 15);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, N, 2);
    const auto h = random_hyper(rng, KernelKind::RbfIso, 2);
    const auto m = gp_fit(X, testutil::random_vector(rng, N), h);
    Eigen::MatrixXd K = h.kernel.gram(X);
    K.diagonal().array() += h.noise_variance() + m.jitter();
    const Eigen::MatrixXd LLt = m.gram_factor() * m.gram_factor().transpose();
    EXPECT_LE((LLt - K).norm(), 1e-8 * K.norm());
  }
}

TEST(Fit, DuplicateRowsWithoutNoiseEngageJitter) {
  const auto h = GPHyper::make(KernelSpec::rbf_iso(1, 1), 0.0, 0.0);
  const auto m = gp_fit(col({0.5, 0.5, 1.0}), vec({1, 1, 2}), h);
  EXPECT_GT(m.jitter(), 0.0);
  const auto p = gp_predict(m, vec({0.5}));
  EXPECT_NEAR(p.mean, 1.0, 1e-3);
}

TEST(Fit, RejectsBadInput) {
  const auto h = GPHyper::make(KernelSpec::rbf_iso(1, 1), 0.1, 0.0);
  EXPECT_THROW(gp_fit(col({0, 1}), vec({1}), h), DataError);
  EXPECT_THROW(gp_fit(col({0, std::nan("")}), vec({1, 2}), h), DataError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
  bad(0, 1) = bad(1, 0) = 5.0;
  EXPECT_THROW(factorize_with_jitter(bad, 1.0), NumericalError);
}

TEST(Predict, Examples) {
  const auto prior = gp_fit(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), GPHyper::make(KernelSpec::rbf_iso(3, 1), 0.1, 7));
  auto p = gp_predict(prior, vec({2}));
  EXPECT_DOUBLE_EQ(p.mean, 7.0);
  EXPECT_DOUBLE_EQ(p.variance, 3.0);

  const auto one = gp_fit(col({0}), vec({1}), GPHyper::make(KernelSpec::rbf_iso(1, 1), 0.0, 0.0));
  p = gp_predict(one, vec({1}));
  EXPECT_NEAR(p.mean, std::exp(-0.5), 1e-12);
  EXPECT_NEAR(p.variance, 1.0 - std::exp(-1.0), 1e-12);
  EXPECT_THROW(gp_predict(one, vec({1, 2})), DataError);
}

// Near-noiseless fits reproduce their training targets.
TEST(Predict, InterpolatesTrainingPoints) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 1, 8);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, N, 2, 3.0);
    const Eigen::VectorXd y = testutil::random_vector(rng, N);
    const auto m = gp_fit(X, y, GPHyper::make(KernelSpec::rbf_iso(1, 1), 1e-10, 0.0));
    for (Eigen::Index i = 0; i < N; ++i) {
      const auto p = gp_predict(m, X.row(i).transpose());
      EXPECT_NEAR(p.mean, y[i], 1e-6);
      EXPECT_NEAR(p.variance, 0.0, 1e-8);
    }
  }
}

TEST(Predict, VarianceBoundedByPriorAndShrinksWithData) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 1, 12);
    const auto h = random_hyper(rng, KernelKind::RbfArd, 3);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, N + 1, 3);
    const Eigen::VectorXd y = testutil::random_vector(rng, N + 1);
    const auto smaller = gp_fit(X.topRows(N), y.head(N), h);
    const auto larger = gp_fit(X, y, h);
    for (int q = 0; q < 10; ++q) {
      const Eigen::VectorXd xs = testutil::random_vector(rng, 3);
      const double prior = kernel_eval(h.kernel, xs, xs);
      const auto a = gp_predict(smaller, xs);
      const auto b = gp_predict(larger, xs);
      EXPECT_GE(a.variance, 0.0);
      EXPECT_LE(a.variance, prior + 1e-10);
      EXPECT_LE(b.variance, a.variance + 1e-10);
    }
  }
}

TEST(Predict, BatchMatchesPointwise) {
  std::mt19937_64 rng(6);
  const auto h = random_hyper(rng, KernelKind::RbfIso, 2);
  const auto m = gp_fit(testutil::random_matrix(rng, 10, 2), testutil::random_vector(rng, 10), h);
  const Eigen::MatrixXd Q = testutil::random_matrix(rng, 5, 2);
  Eigen::VectorXd mean, var;
  m.predict(Q, mean, var);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const auto p = gp_predict(m, Q.row(i).transpose());
    EXPECT_NEAR(mean[i], p.mean, 1e-12);
    EXPECT_NEAR(var[i], p.variance, 1e-12);
  }
}

// Function-space and weight-space posteriors agree under a linear kernel.
TEST(Predict, MatchesBayesianLinearRegression) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 0, 10);
    const Eigen::Index M = testutil::uniform_int(rng, 1, 5);
    const Eigen::MatrixXd A = testutil::random_matrix(rng, M, M);
    const Eigen::MatrixXd S0 = A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(M, M);
    const double noise = std::exp(std::uniform_real_distribution<double>(-2, 1)(rng));
    const Eigen::MatrixXd Phi = testutil::random_matrix(rng, N, M);
    const Eigen::VectorXd y = testutil::random_vector(rng, N);
    const auto blr = blr_posterior(Phi, y, Eigen::VectorXd::Zero(M), S0, noise);
    const auto m = gp_fit(Phi, y, GPHyper::make(KernelSpec::linear(S0), noise, 0.0));
    for (int q = 0; q < 5; ++q) {
      const Eigen::VectorXd phi = testutil::random_vector(rng, M);
      const auto p = gp_predict(m, phi);
      EXPECT_NEAR(p.mean, phi.dot(blr.m_N), 1e-8);
      EXPECT_NEAR(p.variance, phi.dot(blr.S_N * phi), 1e-8);
    }
  }
}

TEST(Blr, Examples) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  auto post = blr_posterior(one, vec({1}), vec({0}), one, 1.0);
  EXPECT_NEAR(post.S_N(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(post.m_N[0], 0.5, 1e-15);

  post = blr_posterior(one, vec({1}), vec({0.3}), one, 1e12);
  EXPECT_NEAR(post.m_N[0], 0.3, 1e-9);
  EXPECT_NEAR(post.S_N(0, 0), 1.0, 1e-9);

  post = blr_posterior(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), vec({0.3}), 2.0 * one, 1.0);
  EXPECT_DOUBLE_EQ(post.m_N[0], 0.3);
  EXPECT_DOUBLE_EQ(post.S_N(0, 0), 2.0);

  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  EXPECT_THROW(blr_posterior(Eigen::MatrixXd::Ones(1, 2), vec({1}), vec({0, 0}), indefinite, 1.0), DataError);
}

TEST(Blr, PosteriorCovarianceIsSpd) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index M = testutil::uniform_int(rng, 1, 5);
    const Eigen::Index N = testutil::uniform_int(rng, 0, 20);
    const auto post = blr_posterior(testutil::random_matrix(rng, N, M), testutil::random_vector(rng, N),
                                    Eigen::VectorXd::Zero(M), Eigen::MatrixXd::Identity(M, M), 0.5);
    EXPECT_LE((post.S_N - post.S_N.transpose()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(post.S_N);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Evidence, ScalarValue) {
  const auto m = gp_fit(col({0}), vec({0}), GPHyper::make(KernelSpec::rbf_iso(1, 1), 1.0, 0.0));
  EXPECT_NEAR(log_marginal_likelihood(m).value, -0.5 * std::log(2.0) - 0.5 * kLog2Pi, 1e-12);
  EXPECT_NEAR(log_marginal_likelihood(m).value, -1.265512, 1e-6);
}

TEST(Evidence, MatchesDenseOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 1, 8);
    const auto h = random_hyper(rng, trial % 2 ? KernelKind::RbfArd : KernelKind::RbfIso, 2);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, N, 2);
    const Eigen::VectorXd y = testutil::random_vector(rng, N);
    EXPECT_NEAR(log_marginal_likelihood(gp_fit(X, y, h)).value, lml_oracle(X, y, h), 1e-8);
  }
}

// Analytic gradient against central differences on random small problems.
TEST(Evidence, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  constexpr double step = 1e-5;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 1, 8);
    const Eigen::Index D = testutil::uniform_int(rng, 1, 3);
    const auto h = random_hyper(rng, trial % 2 ? KernelKind::RbfArd : KernelKind::RbfIso, D);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, N, D);
    const Eigen::VectorXd y = testutil::random_vector(rng, N);
    const auto analytic = log_marginal_likelihood(gp_fit(X, y, h)).gradient;
    const Eigen::VectorXd theta = h.packed();
    ASSERT_EQ(analytic.size(), theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      GPHyper up = h, down = h;
      Eigen::VectorXd t = theta;
      t[k] += step;
      up.unpack(t);
      t[k] -= 2 * step;
      down.unpack(t);
      const double fd = (log_marginal_likelihood(gp_fit(X, y, up)).value -
                         log_marginal_likelihood(gp_fit(X, y, down)).value) / (2 * step);
      EXPECT_LE(std::abs(fd - analytic[k]), 1e-4 * std::max(1.0, std::abs(fd))) << "param " << k;
    }
  }
}

TEST(Evidence, SignSymmetry) {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd X = testutil::random_matrix(rng, 6, 2);
  const Eigen::VectorXd y = testutil::random_vector(rng, 6);
  const auto h = random_hyper(rng, KernelKind::RbfIso, 2);
  GPHyper hp = h, hn = h;
  hp.prior_mean = 0.7;
  hn.prior_mean = -0.7;
  EXPECT_NEAR(log_marginal_likelihood(gp_fit(X, y, hp)).value, log_marginal_likelihood(gp_fit(X, -y, hn)).value,
              1e-12);
}

TEST(Optimize, NeverDecreasesEvidence) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 15; ++trial) {
    const Eigen::Index N = testutil::uniform_int(rng, 3, 30);
    const Eigen::Index D = testutil::uniform_int(rng, 1, 3);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, N, D);
    const Eigen::VectorXd y = X.col(0).array().sin().matrix() + testutil::random_vector(rng, N, 0.1);
    OptimizeOptions o;
    o.budget = 30;
    const auto init = random_hyper(rng, trial % 2 ? KernelKind::RbfArd : KernelKind::RbfIso, D);
    const auto r = optimize_hyperparameters(X, y, init, o);
    const double before = log_marginal_likelihood(gp_fit(X, y, init)).value;
    const double after = log_marginal_likelihood(gp_fit(X, y, r.hyper)).value;
    EXPECT_GE(after, before - 1e-12);
    EXPECT_NEAR(r.final_value, after, 1e-9);
    const auto again = optimize_hyperparameters(X, y, init, o);
    EXPECT_EQ(again.hyper.packed(), r.hyper.packed());
  }
}

TEST(Optimize, StationaryStartIsReturnedUnchanged) {
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd X = testutil::random_matrix(rng, 20, 1);
  const Eigen::VectorXd y = X.col(0).array().cos().matrix() + testutil::random_vector(rng, 20, 0.1);
  OptimizeOptions o;
  o.budget = 200;
  o.gradient_tolerance = 1e-9;
  const auto first = optimize_hyperparameters(X, y, default_hyper(X, y), o);
  ASSERT_LT(first.gradient_norm, 1e-8);
  const auto second = optimize_hyperparameters(X, y, first.hyper, o);
  EXPECT_EQ(second.iterations, 0);
  EXPECT_EQ(second.hyper.packed(), first.hyper.packed());
}

// Generate from a known GP and refit: the lengthscale comes back within a factor 1.5.
TEST(Optimize, RecoversLengthscale) {
  std::mt19937_64 rng(14);
  constexpr Eigen::Index N = 100;
  Eigen::MatrixXd X(N, 1);
  for (Eigen::Index i = 0; i < N; ++i) X(i, 0) = std::uniform_real_distribution<double>(0, 10)(rng);
  const auto truth = GPHyper::make(KernelSpec::rbf_iso(1.0, 0.5), 0.01, 0.0);
  Eigen::MatrixXd K = truth.kernel.gram(X);
  K.diagonal().array() += truth.noise_variance() + 1e-10;
  const Eigen::MatrixXd L = K.llt().matrixL();
  const Eigen::VectorXd y = L * testutil::random_vector(rng, N);
  const auto init = GPHyper::make(KernelSpec::rbf_iso(1.0, 1.0), 0.1, 0.0);
  const auto fitted = optimize_hyperparameters(X, y, init, 200);
  const double ell = std::exp(fitted.kernel.log_lengthscale[0]);
  EXPECT_GT(ell, 0.5 / 1.5);
  EXPECT_LT(ell, 0.5 * 1.5);
}

TEST(Optimize, RejectsBadOptions) {
  const auto h = GPHyper::make(KernelSpec::rbf_iso(1, 1), 0.1, 0.0);
  EXPECT_THROW(optimize_hyperparameters(col({0, 1}), vec({0, 1}), h, 0), ConfigError);
  EXPECT_THROW(optimize_hyperparameters(col({0, 1}), vec({0, 1}),
                                        GPHyper::make(KernelSpec::linear(Eigen::MatrixXd::Ones(1, 1)), 0.1, 0.0), 5),
               ConfigError);
}

TEST(Serialize, RoundTripReproducesPredictions) {
  std::mt19937_64 rng(15);
  const auto h = random_hyper(rng, KernelKind::RbfArd, 3);
  const auto m = gp_fit(testutil::random_matrix(rng, 12, 3), testutil::random_vector(rng, 12), h);
  const auto dir = testutil::scratch_dir("gp_serialize");
  save(m, dir / "model.json");
  const auto back = load(dir / "model.json");
  EXPECT_EQ(back.X(), m.X());
  EXPECT_EQ(back.y(), m.y());
  EXPECT_EQ(back.hyper().packed(), m.hyper().packed());
  for (int q = 0; q < 5; ++q) {
    const Eigen::VectorXd xs = testutil::random_vector(rng, 3);
    EXPECT_EQ(gp_predict(back, xs).mean, gp_predict(m, xs).mean);
    EXPECT_EQ(gp_predict(back, xs).variance, gp_predict(m, xs).variance);
  }
  EXPECT_THROW(deserialize("{\"format\":\"other\"}"), DataError);
}
