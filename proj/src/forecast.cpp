#include "adprog/forecast.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "adprog/error.hpp"

namespace adprog::forecast {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::sGP: return "sGP";
    case ModelKind::pGP: return "pGP";
    case ModelKind::tGP: return "tGP";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "sGP") return ModelKind::sGP;
  if (name == "pGP") return ModelKind::pGP;
  if (name == "tGP") return ModelKind::tGP;
  throw DataError("unknown model kind '" + std::string(name) + "'");
}

SourceModel train_source(const SupervisedSet& train, const SourceOptions& options) {
  if (train.rows() == 0) throw DataError("train_source: empty training set");
  if (!train.X.allFinite()) throw DataError("train_source: training inputs contain missing cells; normalize first");
  SourceModel model;
  const Eigen::MatrixXd& X = train.X;
  for (std::size_t h = 0; h < 4; ++h) {
    const Eigen::VectorXd y = train.y.col(static_cast<Eigen::Index>(h));
    gp::GPHyper init = gp::default_hyper(X, y);
    const double sf2 = options.signal_variance.value_or(init.kernel.signal_variance());
    const double ell = options.lengthscale.value_or(std::exp(init.kernel.log_lengthscale[0]));
    if (options.kernel == gp::KernelKind::RbfArd) {
      init.kernel = gp::KernelSpec::rbf_ard(sf2, Eigen::VectorXd::Constant(X.cols(), ell));
    } else {
      init.kernel = gp::KernelSpec::rbf_iso(sf2, ell);
    }
    if (options.noise_variance) init.log_noise_variance = std::log(*options.noise_variance);

    gp::GPHyper hyper = init;
    if (options.budget > 0) {
      gp::OptimizeOptions opt = options.optimize;
      opt.budget = options.budget;
      hyper = gp::optimize_hyperparameters(X, y, init, opt).hyper;
    }
    model.horizon[h] = gp::gp_fit(X, y, hyper);
  }
  return model;
}

std::vector<HistoryRow> causal_history(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                       const std::vector<int>& anchors, int anchor) {
  std::vector<HistoryRow> out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (anchors[i] >= anchor) continue;
    HistoryRow row;
    row.x = X.row(static_cast<Eigen::Index>(i)).transpose();
    bool any = false;
    for (std::size_t h = 0; h < 4; ++h) {
      if (anchors[i] + kHorizons[h] <= anchor) {
        row.y[h] = Y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h));
        any = true;
      }
    }
    if (any) out.push_back(std::move(row));
  }
  return out;
}

gp::Prediction SourcePredictor::predict(std::size_t horizon, const Eigen::VectorXd& x) const {
  return gp::gp_predict(source_->horizon.at(horizon), x);
}

PersonalizedPredictor personalize(const SourceModel& source, const std::vector<HistoryRow>& history) {
  PersonalizedPredictor p;
  p.source_ = &source;
  for (const auto& row : history) {
    if (row.x.size() != source.dim()) {
      throw DataError("personalize: history row has dimension " + std::to_string(row.x.size()) + ", source expects " +
                      std::to_string(source.dim()));
    }
  }
  for (std::size_t h = 0; h < 4; ++h) {
    const gp::TrainedGP& gp = source.horizon[h];
    std::vector<const HistoryRow*> rows;
    for (const auto& r : history) {
      if (r.y[h]) rows.push_back(&r);
    }
    auto& st = p.state_[h];
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m == 0) continue;
    st.H.resize(m, source.dim());
    Eigen::VectorXd yH(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      st.H.row(i) = rows[static_cast<std::size_t>(i)]->x.transpose();
      yH[i] = *rows[static_cast<std::size_t>(i)]->y[h];
    }
    const auto& kernel = gp.hyper().kernel;
    const Eigen::MatrixXd KHH = kernel.gram(st.H);
    Eigen::VectorXd muH = Eigen::VectorXd::Constant(m, gp.hyper().prior_mean);
    Eigen::MatrixXd SigmaHH = KHH;
    if (gp.size() > 0) {
      st.V = gp.whiten(st.H);
      muH.noalias() += kernel.cross(gp.X(), st.H).transpose() * gp.alpha();
      SigmaHH.noalias() -= st.V.transpose() * st.V;
    } else {
      st.V.resize(0, m);
    }
    SigmaHH = 0.5 * (SigmaHH + SigmaHH.transpose());
    SigmaHH.diagonal().array() += gp.hyper().noise_variance();
    st.C = gp::factorize_with_jitter(SigmaHH, KHH.trace() / static_cast<double>(m)).L;
    st.weights = st.C.triangularView<Eigen::Lower>().solve(yH - muH);
  }
  return p;
}

gp::Prediction PersonalizedPredictor::predict(std::size_t horizon, const Eigen::VectorXd& x) const {
  const gp::TrainedGP& gp = source_->horizon.at(horizon);
  const auto& st = state_[horizon];
  if (st.H.rows() == 0) return gp::gp_predict(gp, x);
  if (x.size() != source_->dim()) throw DataError("pGP predict: dimension mismatch");

  const auto& kernel = gp.hyper().kernel;
  const Eigen::MatrixXd xq = x.transpose();
  const double prior_var = kernel(x, x);
  double mean = gp.hyper().prior_mean;
  double var = prior_var;
  Eigen::VectorXd cross = kernel.cross(st.H, xq).col(0);  // Sigma_s(H, x)
  if (gp.size() > 0) {
    const Eigen::VectorXd v = gp.whiten(xq).col(0);
    mean += kernel.cross(gp.X(), xq).col(0).dot(gp.alpha());
    var -= v.squaredNorm();
    cross.noalias() -= st.V.transpose() * v;
  }
  const Eigen::VectorXd w = st.C.triangularView<Eigen::Lower>().solve(cross);
  mean += w.dot(st.weights);
  var -= w.squaredNorm();
  if (var < 0.0) {
    if (var < -1e-10 * std::max(1.0, prior_var)) throw NumericalError("pGP: negative predictive variance");
    var = 0.0;
  }
  return {mean, var};
}

TargetPredictor train_target(const std::vector<HistoryRow>& history, const SourceModel& source) {
  TargetPredictor t;
  bool any = false;
  for (const auto& row : history) {
    if (row.x.size() != source.dim()) throw DataError("train_target: history row dimension mismatch");
  }
  for (std::size_t h = 0; h < 4; ++h) {
    std::vector<const HistoryRow*> rows;
    for (const auto& r : history) {
      if (r.y[h]) rows.push_back(&r);
    }
    if (rows.empty()) continue;
    any = true;
    const auto m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd X(m, source.dim());
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      X.row(i) = rows[static_cast<std::size_t>(i)]->x.transpose();
      y[i] = *rows[static_cast<std::size_t>(i)]->y[h];
    }
    gp::GPHyper hyper = source.horizon[h].hyper();
    hyper.prior_mean = y.mean();
    t.horizon_[h] = gp::gp_fit(X, y, hyper);
  }
  if (!any) throw DataError("tGP undefined before first observation");
  return t;
}

gp::Prediction TargetPredictor::predict(std::size_t horizon, const Eigen::VectorXd& x) const {
  const auto& model = horizon_.at(horizon);
  if (!model) throw DataError("tGP has no observations for horizon " + std::to_string(kHorizons.at(horizon)));
  return gp::gp_predict(*model, x);
}

HorizonForecast forecast(const HorizonPredictor& predictor, const Eigen::VectorXd& x, int anchor_month,
                         std::string patient_id, const HorizonPredictor* fallback) {
  HorizonForecast f;
  f.patient_id = std::move(patient_id);
  f.anchor_month = anchor_month;
  f.kind = predictor.kind();
  for (std::size_t h = 0; h < 4; ++h) {
    gp::Prediction pred;
    if (predictor.has_horizon(h)) {
      pred = predictor.predict(h, x);
    } else if (fallback) {
      pred = fallback->predict(h, x);
      f.fallback[h] = true;
    } else {
      throw DataError(std::string(to_string(predictor.kind())) + " cannot forecast horizon " +
                      std::to_string(kHorizons[h]));
    }
    f.raw_mean[h] = pred.mean;
    f.mean[h] = std::clamp(pred.mean, kScoreMin, kScoreMax);
    f.variance[h] = std::max(0.0, pred.variance);
  }
  return f;
}

std::array<double, 4> ensemble_average(const HorizonForecast& a, const HorizonForecast& b, const HorizonForecast& c) {
  std::array<bool, 3> seen{};
  for (const auto* f : {&a, &b, &c}) seen[static_cast<std::size_t>(f->kind)] = true;
  if (!(seen[0] && seen[1] && seen[2])) throw DataError("ensemble_average: need one sGP, one pGP and one tGP forecast");
  if (a.patient_id != b.patient_id || a.patient_id != c.patient_id || a.anchor_month != b.anchor_month ||
      a.anchor_month != c.anchor_month) {
    throw DataError("ensemble_average: forecasts refer to different patients or anchors");
  }
  std::array<double, 4> out{};
  for (std::size_t h = 0; h < 4; ++h) out[h] = (a.mean[h] + b.mean[h] + c.mean[h]) / 3.0;
  return out;
}

}  // namespace adprog::forecast
