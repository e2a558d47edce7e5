#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace adprog::gp {

enum class KernelKind {
  RbfIso,
  RbfArd,
  /// k(x, x') = x^T S x'. Not optimizable; exists so that GP predictions can
  /// be checked against the weight-space (Bayesian linear regression) posterior.
  Linear,
};

/// Covariance function. Scale parameters are stored as logs so the optimizer
/// works on an unconstrained vector.
struct KernelSpec {
  KernelKind kind = KernelKind::RbfIso;
  double log_signal_variance = 0.0;
  Eigen::VectorXd log_lengthscale = Eigen::VectorXd::Zero(1);  // size 1 (iso) or D (ard)
  Eigen::MatrixXd linear_weight_cov;                          // Linear only

  static KernelSpec rbf_iso(double signal_variance, double lengthscale);
  static KernelSpec rbf_ard(double signal_variance, const Eigen::VectorXd& lengthscales);
  static KernelSpec linear(const Eigen::MatrixXd& weight_cov);

  double signal_variance() const;
  /// Number of optimizable kernel log-parameters (signal variance first).
  Eigen::Index num_params() const;

  /// Throws DataError when the kernel cannot be evaluated on D-dimensional inputs.
  void check_dimension(Eigen::Index D) const;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;
  /// Rows of A and B are inputs; returns the |A| x |B| covariance matrix.
  Eigen::MatrixXd cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const;
  Eigen::MatrixXd gram(const Eigen::MatrixXd& X) const { return cross(X, X); }
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime);

struct GPHyper {
  KernelSpec kernel;
  double log_noise_variance = std::log(0.1);
  double prior_mean = 0.0;

  double noise_variance() const { return std::exp(log_noise_variance); }
  static GPHyper make(KernelSpec kernel, double noise_variance, double prior_mean);

  /// [log sf2, log ell..., log noise]
  Eigen::VectorXd packed() const;
  void unpack(const Eigen::VectorXd& theta);
};

/// Default initialization: signal variance var(y), lengthscale sqrt(D),
/// noise 0.1 var(y), prior mean mean(y).
GPHyper default_hyper(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct Cholesky {
  Eigen::MatrixXd L;  // lower triangular
  double jitter = 0.0;
};

/// Factorizes A (+ jitter I). Tries without jitter first, then escalates
/// 1e-10, 1e-9, ..., 1e-4 times `jitter_scale`. A factor is rejected when a
/// squared pivot falls below 1e-14 of the largest diagonal entry.
Cholesky factorize_with_jitter(const Eigen::MatrixXd& A, double jitter_scale);

class TrainedGP {
 public:
  TrainedGP() = default;

  const GPHyper& hyper() const { return hyper_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& gram_factor() const { return chol_.L; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double jitter() const { return chol_.jitter; }
  Eigen::Index size() const { return X_.rows(); }
  Eigen::Index dim() const { return dim_; }

  Prediction predict(const Eigen::VectorXd& x) const;
  /// Rows of Xs are query points.
  void predict(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const;

  /// L^{-1} k(X, Q) for the query rows Q (N x |Q|).
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& Q) const;

 private:
  friend TrainedGP gp_fit(const Eigen::MatrixXd&, const Eigen::VectorXd&, const GPHyper&);
  GPHyper hyper_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::Index dim_ = 0;
  Cholesky chol_;
  Eigen::VectorXd alpha_;
};

/// Rows of X are inputs. N = 0 yields the prior.
/// Throws NumericalError("kernel matrix not PD") when factorization fails at max jitter.
TrainedGP gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& hyper);

/// Posterior mean and latent variance. Variance below zero by less than
/// 1e-10 (relative to the prior variance) is clamped; larger negative values throw.
Prediction gp_predict(const TrainedGP& model, const Eigen::VectorXd& x_star);

struct LogMarginalLikelihood {
  double value = 0.0;
  Eigen::VectorXd gradient;  // d/d[log sf2, log ell..., log noise]
};

LogMarginalLikelihood log_marginal_likelihood(const TrainedGP& model);

struct OptimizeOptions {
  int budget = 100;
  double gradient_tolerance = 1e-6;
  /// Lower bound on the noise variance, relative to var(y).
  double min_noise_ratio = 1e-6;
  /// When > 0 and N exceeds it, optimize on evenly spaced rows only.
  Eigen::Index max_rows = 0;
};

struct OptimizeReport {
  GPHyper hyper;
  int iterations = 0;
  double initial_value = 0.0;
  double final_value = 0.0;
  double gradient_norm = 0.0;
};

/// Quasi-Newton (L-BFGS directions) ascent on the log hyperparameters with
/// backtracking line search. The returned evidence is never below the initial one.
OptimizeReport optimize_hyperparameters(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& init,
                                        const OptimizeOptions& options);
GPHyper optimize_hyperparameters(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& init,
                                 int budget);

struct BLRPosterior {
  Eigen::VectorXd m_N;
  Eigen::MatrixXd S_N;
};

/// Weight posterior of y = Phi theta + eps, eps ~ N(0, noise), theta ~ N(m0, S0).
BLRPosterior blr_posterior(const Eigen::MatrixXd& Phi, const Eigen::VectorXd& y, const Eigen::VectorXd& m0,
                           const Eigen::MatrixXd& S0, double noise_variance);

/// Versioned JSON: hyperparameters, training inputs and targets. The factor
/// is recomputed on load.
std::string serialize(const TrainedGP& model);
TrainedGP deserialize(const std::string& text);
void save(const TrainedGP& model, const std::filesystem::path& path);
TrainedGP load(const std::filesystem::path& path);

}  // namespace adprog::gp
