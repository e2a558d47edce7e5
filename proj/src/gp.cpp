#include "adprog/gp.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <json.hpp>

#include "adprog/error.hpp"

namespace adprog::gp {

namespace {

// Squared scaled distances between rows of A and B (RBF kernels only).
Eigen::MatrixXd scaled_sqdist(const KernelSpec& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd As = A;
  Eigen::MatrixXd Bs = B;
  if (k.kind == KernelKind::RbfIso) {
    const double inv = std::exp(-k.log_lengthscale[0]);
    As *= inv;
    Bs *= inv;
  } else {
    const Eigen::RowVectorXd inv = (-k.log_lengthscale.array()).exp().matrix().transpose();
    As.array().rowwise() *= inv.array();
    Bs.array().rowwise() *= inv.array();
  }
  Eigen::MatrixXd d2 = (-2.0) * As * Bs.transpose();
  d2.colwise() += As.rowwise().squaredNorm();
  d2.rowwise() += Bs.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

bool try_llt(const Eigen::MatrixXd& A, Eigen::MatrixXd& L) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) return false;
  L = llt.matrixL();
  const double max_diag = A.diagonal().maxCoeff();
  const double min_pivot2 = L.diagonal().array().square().minCoeff();
  return std::isfinite(min_pivot2) && min_pivot2 > 1e-14 * max_diag;
}

double variance_tolerance(double prior_variance) { return 1e-10 * std::max(1.0, prior_variance); }

double clamp_variance(double v, double prior_variance) {
  if (v >= 0.0) return v;
  if (v >= -variance_tolerance(prior_variance)) return 0.0;
  throw NumericalError("negative predictive variance " + std::to_string(v) + ": numerical breakdown");
}

double sample_variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 0.0;
  const double m = y.mean();
  return (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
}

}  // namespace

KernelSpec KernelSpec::rbf_iso(double signal_variance, double lengthscale) {
  if (!(signal_variance > 0.0) || !(lengthscale > 0.0)) throw DataError("kernel scales must be positive");
  KernelSpec k;
  k.kind = KernelKind::RbfIso;
  k.log_signal_variance = std::log(signal_variance);
  k.log_lengthscale = Eigen::VectorXd::Constant(1, std::log(lengthscale));
  return k;
}

KernelSpec KernelSpec::rbf_ard(double signal_variance, const Eigen::VectorXd& lengthscales) {
  if (!(signal_variance > 0.0) || lengthscales.size() == 0 || !(lengthscales.array() > 0.0).all()) {
    throw DataError("kernel scales must be positive");
  }
  KernelSpec k;
  k.kind = KernelKind::RbfArd;
  k.log_signal_variance = std::log(signal_variance);
  k.log_lengthscale = lengthscales.array().log().matrix();
  return k;
}

KernelSpec KernelSpec::linear(const Eigen::MatrixXd& weight_cov) {
  if (weight_cov.rows() != weight_cov.cols()) throw DataError("linear kernel weight covariance must be square");
  KernelSpec k;
  k.kind = KernelKind::Linear;
  k.log_lengthscale.resize(0);
  k.linear_weight_cov = weight_cov;
  return k;
}

double KernelSpec::signal_variance() const { return std::exp(log_signal_variance); }

Eigen::Index KernelSpec::num_params() const {
  switch (kind) {
    case KernelKind::RbfIso: return 2;
    case KernelKind::RbfArd: return 1 + log_lengthscale.size();
    case KernelKind::Linear: return 0;
  }
  return 0;
}

void KernelSpec::check_dimension(Eigen::Index D) const {
  if (kind == KernelKind::RbfArd && log_lengthscale.size() != D) {
    throw DataError("ARD lengthscale has " + std::to_string(log_lengthscale.size()) + " entries, inputs have " +
                    std::to_string(D));
  }
  if (kind == KernelKind::Linear && linear_weight_cov.rows() != D) {
    throw DataError("linear kernel expects dimension " + std::to_string(linear_weight_cov.rows()));
  }
}

double KernelSpec::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (a.size() != b.size()) throw DataError("kernel_eval: dimension mismatch");
  check_dimension(a.size());
  switch (kind) {
    case KernelKind::RbfIso: {
      const double r2 = (a - b).squaredNorm() * std::exp(-2.0 * log_lengthscale[0]);
      return signal_variance() * std::exp(-0.5 * r2);
    }
    case KernelKind::RbfArd: {
      const double r2 = ((a - b).array() * (-log_lengthscale.array()).exp()).square().sum();
      return signal_variance() * std::exp(-0.5 * r2);
    }
    case KernelKind::Linear: return a.dot(linear_weight_cov * b);
  }
  return 0.0;
}

Eigen::MatrixXd KernelSpec::cross(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) const {
  if (A.cols() != B.cols()) throw DataError("kernel: dimension mismatch");
  check_dimension(A.cols());
  if (kind == KernelKind::Linear) return A * linear_weight_cov * B.transpose();
  return signal_variance() * (-0.5 * scaled_sqdist(*this, A, B).array()).exp().matrix();
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& x_prime) {
  return spec(x, x_prime);
}

GPHyper GPHyper::make(KernelSpec kernel, double noise_variance, double prior_mean) {
  if (noise_variance < 0.0) throw DataError("noise variance must be non-negative");
  GPHyper h;
  h.kernel = std::move(kernel);
  h.log_noise_variance = std::log(noise_variance);
  h.prior_mean = prior_mean;
  return h;
}

Eigen::VectorXd GPHyper::packed() const {
  const Eigen::Index p = kernel.num_params();
  Eigen::VectorXd theta(p + 1);
  if (p > 0) {
    theta[0] = kernel.log_signal_variance;
    theta.segment(1, p - 1) = kernel.log_lengthscale;
  }
  theta[p] = log_noise_variance;
  return theta;
}

void GPHyper::unpack(const Eigen::VectorXd& theta) {
  const Eigen::Index p = kernel.num_params();
  if (theta.size() != p + 1) throw DataError("hyperparameter vector has wrong length");
  if (p > 0) {
    kernel.log_signal_variance = theta[0];
    kernel.log_lengthscale = theta.segment(1, p - 1);
  }
  log_noise_variance = theta[p];
}

GPHyper default_hyper(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  double var = sample_variance(y);
  if (!(var > 0.0)) var = 1.0;
  const double ell = std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, X.cols())));
  return GPHyper::make(KernelSpec::rbf_iso(var, ell), 0.1 * var, y.size() ? y.mean() : 0.0);
}

Cholesky factorize_with_jitter(const Eigen::MatrixXd& A, double jitter_scale) {
  Cholesky out;
  if (A.rows() == 0) return out;
  if (!A.allFinite()) throw NumericalError("kernel matrix not PD: non-finite entries");
  if (try_llt(A, out.L)) return out;
  if (jitter_scale > 0.0) {
    for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
      const double jitter = rel * jitter_scale;
      Eigen::MatrixXd B = A;
      B.diagonal().array() += jitter;
      if (try_llt(B, out.L)) {
        out.jitter = jitter;
        return out;
      }
    }
  }
  throw NumericalError("kernel matrix not PD");
}

TrainedGP gp_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& hyper) {
  if (X.rows() != y.size()) throw DataError("gp_fit: X has " + std::to_string(X.rows()) + " rows, y has " +
                                            std::to_string(y.size()));
  if (!X.allFinite() || !y.allFinite()) throw DataError("gp_fit: non-finite training data");
  hyper.kernel.check_dimension(X.cols());
  TrainedGP m;
  m.hyper_ = hyper;
  m.X_ = X;
  m.y_ = y;
  m.dim_ = X.cols();
  const Eigen::Index N = X.rows();
  if (N == 0) {
    m.alpha_.resize(0);
    return m;
  }
  Eigen::MatrixXd K = hyper.kernel.gram(X);
  const double scale = K.trace() / static_cast<double>(N);
  K.diagonal().array() += hyper.noise_variance();
  m.chol_ = factorize_with_jitter(K, scale);
  const Eigen::MatrixXd& L = m.chol_.L;
  m.alpha_ = L.triangularView<Eigen::Lower>().solve((y.array() - hyper.prior_mean).matrix());
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(m.alpha_);
  return m;
}

Eigen::MatrixXd TrainedGP::whiten(const Eigen::MatrixXd& Q) const {
  Eigen::MatrixXd V = hyper_.kernel.cross(X_, Q);
  if (X_.rows() > 0) chol_.L.triangularView<Eigen::Lower>().solveInPlace(V);
  return V;
}

void TrainedGP::predict(const Eigen::MatrixXd& Xs, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const {
  if (Xs.cols() != dim_ && X_.rows() > 0) throw DataError("gp_predict: dimension mismatch");
  hyper_.kernel.check_dimension(Xs.cols());
  const Eigen::Index M = Xs.rows();
  mean = Eigen::VectorXd::Constant(M, hyper_.prior_mean);
  variance.resize(M);
  for (Eigen::Index i = 0; i < M; ++i) variance[i] = hyper_.kernel(Xs.row(i).transpose(), Xs.row(i).transpose());
  if (X_.rows() == 0) return;
  const Eigen::MatrixXd Ks = hyper_.kernel.cross(X_, Xs);
  mean.noalias() += Ks.transpose() * alpha_;
  const Eigen::MatrixXd V = chol_.L.triangularView<Eigen::Lower>().solve(Ks);
  const Eigen::VectorXd explained = V.colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < M; ++i) variance[i] = clamp_variance(variance[i] - explained[i], variance[i]);
}

Prediction TrainedGP::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd mean, var;
  predict(Eigen::MatrixXd(x.transpose()), mean, var);
  return {mean[0], var[0]};
}

Prediction gp_predict(const TrainedGP& model, const Eigen::VectorXd& x_star) { return model.predict(x_star); }

LogMarginalLikelihood log_marginal_likelihood(const TrainedGP& model) {
  const auto& hyper = model.hyper();
  const auto& kernel = hyper.kernel;
  const Eigen::Index N = model.size();
  const Eigen::Index P = kernel.num_params();
  LogMarginalLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(P + 1);
  if (N == 0) return out;

  const Eigen::VectorXd r = model.y().array() - hyper.prior_mean;
  const auto& L = model.gram_factor();
  out.value = -0.5 * r.dot(model.alpha()) - L.diagonal().array().log().sum() -
              0.5 * static_cast<double>(N) * std::log(2.0 * std::numbers::pi);

  // W = alpha alpha^T - K^{-1}; dL/dtheta = 0.5 tr(W dK/dtheta).
  Eigen::MatrixXd Kinv = Eigen::MatrixXd::Identity(N, N);
  L.triangularView<Eigen::Lower>().solveInPlace(Kinv);
  L.transpose().triangularView<Eigen::Upper>().solveInPlace(Kinv);
  Eigen::MatrixXd W = model.alpha() * model.alpha().transpose() - Kinv;

  if (kernel.kind != KernelKind::Linear) {
    const Eigen::MatrixXd& X = model.X();
    const Eigen::MatrixXd Kf = kernel.gram(X);
    const Eigen::MatrixXd WK = W.cwiseProduct(Kf);
    out.gradient[0] = 0.5 * WK.sum();
    if (kernel.kind == KernelKind::RbfIso) {
      out.gradient[1] = 0.5 * WK.cwiseProduct(scaled_sqdist(kernel, X, X)).sum();
    } else {
      for (Eigen::Index d = 0; d < X.cols(); ++d) {
        const double inv2 = std::exp(-2.0 * kernel.log_lengthscale[d]);
        double acc = 0.0;
        for (Eigen::Index j = 0; j < N; ++j) {
          for (Eigen::Index i = 0; i < N; ++i) {
            const double diff = X(i, d) - X(j, d);
            acc += WK(i, j) * diff * diff;
          }
        }
        out.gradient[1 + d] = 0.5 * acc * inv2;
      }
    }
  }
  out.gradient[P] = 0.5 * hyper.noise_variance() * W.trace();
  return out;
}

OptimizeReport optimize_hyperparameters(const Eigen::MatrixXd& X_all, const Eigen::VectorXd& y_all,
                                        const GPHyper& init, const OptimizeOptions& options) {
  if (options.budget < 1) throw ConfigError("optimizer budget must be >= 1");
  if (init.kernel.kind == KernelKind::Linear) throw ConfigError("linear kernel hyperparameters are not optimizable");

  Eigen::MatrixXd X = X_all;
  Eigen::VectorXd y = y_all;
  if (options.max_rows > 0 && X_all.rows() > options.max_rows) {
    const Eigen::Index n = options.max_rows;
    X.resize(n, X_all.cols());
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index src = (i * X_all.rows()) / n;
      X.row(i) = X_all.row(src);
      y[i] = y_all[src];
    }
  }

  double var_y = sample_variance(y);
  if (!(var_y > 0.0)) var_y = 1.0;
  const double min_log_noise = std::log(options.min_noise_ratio * var_y);
  constexpr double kMaxLog = 25.0;

  GPHyper hyper = init;
  auto project = [&](Eigen::VectorXd theta) {
    theta = theta.cwiseMax(-kMaxLog).cwiseMin(kMaxLog);
    theta[theta.size() - 1] = std::max(theta[theta.size() - 1], min_log_noise);
    return theta;
  };
  struct Eval {
    double value;
    Eigen::VectorXd grad;
  };
  auto evaluate = [&](const Eigen::VectorXd& theta) -> std::optional<Eval> {
    GPHyper h = init;
    h.unpack(theta);
    try {
      const auto lml = log_marginal_likelihood(gp_fit(X, y, h));
      if (!std::isfinite(lml.value) || !lml.gradient.allFinite()) return std::nullopt;
      return Eval{lml.value, lml.gradient};
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };

  Eigen::VectorXd theta = init.packed();
  auto current = evaluate(theta);
  if (!current) throw NumericalError("non-finite log marginal likelihood at initial hyperparameters");

  OptimizeReport report;
  report.initial_value = current->value;
  report.hyper = init;
  report.final_value = current->value;
  report.gradient_norm = current->grad.norm();
  if (report.gradient_norm < options.gradient_tolerance) return report;

  // L-BFGS memory on the ascent problem (minimizing -lml).
  constexpr std::size_t kMemory = 8;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
  for (int it = 0; it < options.budget; ++it) {
    const Eigen::VectorXd g = -current->grad;  // gradient of the minimized objective
    Eigen::VectorXd q = g;
    std::vector<double> alphas(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, yk] = memory[k];
      alphas[k] = s.dot(q) / yk.dot(s);
      q -= alphas[k] * yk;
    }
    if (!memory.empty()) {
      const auto& [s, yk] = memory.back();
      q *= s.dot(yk) / yk.squaredNorm();
    } else {
      q /= std::max(1.0, g.norm());
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, yk] = memory[k];
      const double beta = yk.dot(q) / yk.dot(s);
      q += (alphas[k] - beta) * s;
    }
    Eigen::VectorXd direction = -q;
    if (direction.dot(g) >= 0.0) {
      memory.clear();
      direction = -g / std::max(1.0, g.norm());
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd next_theta;
    std::optional<Eval> next;
    for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
      next_theta = project(theta + step * direction);
      if ((next_theta - theta).norm() == 0.0) break;
      next = evaluate(next_theta);
      if (next && next->value >= current->value &&
          next->value >= current->value + 1e-4 * (-g).dot(next_theta - theta)) {
        accepted = true;
        break;
      }
    }
    report.iterations = it + 1;
    if (!accepted) break;

    const Eigen::VectorXd s = next_theta - theta;
    const Eigen::VectorXd yk = (-next->grad) - g;
    if (s.dot(yk) > 1e-12 * s.norm() * yk.norm()) {
      memory.emplace_back(s, yk);
      if (memory.size() > kMemory) memory.pop_front();
    }
    theta = next_theta;
    current = next;
    if (current->grad.norm() < options.gradient_tolerance) break;
  }
  report.hyper = init;
  report.hyper.unpack(theta);
  report.final_value = current->value;
  report.gradient_norm = current->grad.norm();
  return report;
}

GPHyper optimize_hyperparameters(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GPHyper& init,
                                 int budget) {
  OptimizeOptions options;
  options.budget = budget;
  return optimize_hyperparameters(X, y, init, options).hyper;
}

BLRPosterior blr_posterior(const Eigen::MatrixXd& Phi, const Eigen::VectorXd& y, const Eigen::VectorXd& m0,
                           const Eigen::MatrixXd& S0, double noise_variance) {
  const Eigen::Index M = S0.rows();
  if (S0.cols() != M || m0.size() != M || Phi.cols() != M || Phi.rows() != y.size()) {
    throw DataError("blr_posterior: inconsistent dimensions");
  }
  if (!(noise_variance > 0.0)) throw DataError("blr_posterior: noise variance must be positive");
  if (!S0.isApprox(S0.transpose(), 1e-12)) throw DataError("blr_posterior: S0 not SPD (asymmetric)");
  Eigen::LLT<Eigen::MatrixXd> s0_llt(S0);
  if (s0_llt.info() != Eigen::Success || (s0_llt.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any()) {
    throw DataError("blr_posterior: S0 not SPD");
  }
  const Eigen::MatrixXd S0_inv = s0_llt.solve(Eigen::MatrixXd::Identity(M, M));
  const Eigen::MatrixXd precision = S0_inv + Phi.transpose() * Phi / noise_variance;
  Eigen::LLT<Eigen::MatrixXd> p_llt(precision);
  if (p_llt.info() != Eigen::Success) throw NumericalError("blr_posterior: posterior precision not PD");
  BLRPosterior post;
  post.S_N = p_llt.solve(Eigen::MatrixXd::Identity(M, M));
  post.S_N = 0.5 * (post.S_N + post.S_N.transpose());
  post.m_N = p_llt.solve(S0_inv * m0 + Phi.transpose() * y / noise_variance);
  return post;
}

namespace {

std::string kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::RbfIso: return "rbf_iso";
    case KernelKind::RbfArd: return "rbf_ard";
    case KernelKind::Linear: return "linear";
  }
  return "?";
}

}  // namespace

std::string serialize(const TrainedGP& model) {
  const auto& h = model.hyper();
  nlohmann::ordered_json j;
  j["format"] = "adprog.gp";
  j["version"] = 1;
  j["kernel"]["kind"] = kind_name(h.kernel.kind);
  if (h.kernel.kind == KernelKind::Linear) {
    std::vector<std::vector<double>> S;
    for (Eigen::Index r = 0; r < h.kernel.linear_weight_cov.rows(); ++r) {
      S.emplace_back(h.kernel.linear_weight_cov.row(r).begin(), h.kernel.linear_weight_cov.row(r).end());
    }
    j["kernel"]["weight_cov"] = S;
  } else {
    j["kernel"]["signal_variance"] = h.kernel.signal_variance();
    std::vector<double> ell;
    for (auto v : h.kernel.log_lengthscale) ell.push_back(std::exp(v));
    j["kernel"]["lengthscale"] = ell;
  }
  j["noise_variance"] = h.noise_variance();
  j["prior_mean"] = h.prior_mean;
  j["dim"] = model.dim();
  std::vector<std::vector<double>> X;
  for (Eigen::Index r = 0; r < model.X().rows(); ++r) X.emplace_back(model.X().row(r).begin(), model.X().row(r).end());
  j["X"] = X;
  j["y"] = std::vector<double>(model.y().begin(), model.y().end());
  return j.dump();
}

TrainedGP deserialize(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "adprog.gp") throw DataError("not a serialized GP");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported GP file version");
    const auto& jk = j.at("kernel");
    const std::string kind = jk.at("kind").get<std::string>();
    KernelSpec kernel;
    if (kind == "linear") {
      const auto S = jk.at("weight_cov").get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd W(static_cast<Eigen::Index>(S.size()), static_cast<Eigen::Index>(S.size()));
      for (std::size_t r = 0; r < S.size(); ++r) {
        for (std::size_t c = 0; c < S.size(); ++c) W(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = S[r].at(c);
      }
      kernel = KernelSpec::linear(W);
    } else {
      const auto ell = jk.at("lengthscale").get<std::vector<double>>();
      const double sf2 = jk.at("signal_variance").get<double>();
      if (kind == "rbf_iso") {
        kernel = KernelSpec::rbf_iso(sf2, ell.at(0));
      } else if (kind == "rbf_ard") {
        kernel = KernelSpec::rbf_ard(sf2, Eigen::Map<const Eigen::VectorXd>(ell.data(), static_cast<Eigen::Index>(ell.size())));
      } else {
        throw DataError("unknown kernel kind '" + kind + "'");
      }
    }
    const auto hyper = GPHyper::make(kernel, j.at("noise_variance").get<double>(), j.at("prior_mean").get<double>());
    const auto rows = j.at("X").get<std::vector<std::vector<double>>>();
    const auto y = j.at("y").get<std::vector<double>>();
    const auto D = j.at("dim").get<Eigen::Index>();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), D);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != D) throw DataError("serialized GP: ragged X");
      for (Eigen::Index c = 0; c < D; ++c) X(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    return gp_fit(X, Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), hyper);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("serialized GP: ") + e.what());
  }
}

void save(const TrainedGP& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize(model) << '\n';
}

TrainedGP load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace adprog::gp
