#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "adprog/gp.hpp"
#include "adprog/preprocess.hpp"

namespace adprog::forecast {

enum class ModelKind { sGP, pGP, tGP };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

inline constexpr double kScoreMin = 0.0;
inline constexpr double kScoreMax = 85.0;

struct HorizonForecast {
  std::string patient_id;
  int anchor_month = 0;
  ModelKind kind = ModelKind::sGP;
  std::array<double, 4> mean{};      // clamped to [0, 85]
  std::array<double, 4> raw_mean{};  // before clamping
  std::array<double, 4> variance{};
  /// Horizons answered by the source model because the requested variant
  /// had no observations to condition on.
  std::array<bool, 4> fallback{};
};

/// Four independent single-output GPs, one per horizon, sharing the training rows.
struct SourceModel {
  std::array<gp::TrainedGP, 4> horizon;

  Eigen::Index dim() const { return horizon[0].dim(); }
};

struct SourceOptions {
  gp::KernelKind kernel = gp::KernelKind::RbfIso;
  /// Optional overrides of the data-driven initialization.
  std::optional<double> signal_variance;
  std::optional<double> lengthscale;
  std::optional<double> noise_variance;
  /// 0 disables evidence optimization.
  int budget = 100;
  gp::OptimizeOptions optimize;
};

/// `train` must already be standardized. Each horizon GP gets a constant
/// prior mean equal to its training-target mean.
SourceModel train_source(const SupervisedSet& train, const SourceOptions& options = {});

/// A past visit of the patient being forecast: its inputs and whichever
/// horizon targets had been observed by the forecast time.
struct HistoryRow {
  Eigen::VectorXd x;
  std::array<std::optional<double>, 4> y;
};

/// Rows of one patient with anchor s < `anchor`, keeping horizon h only when
/// s + h <= anchor (the score had been recorded by then).
std::vector<HistoryRow> causal_history(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                                       const std::vector<int>& anchors, int anchor);

class HorizonPredictor {
 public:
  virtual ~HorizonPredictor() = default;
  virtual ModelKind kind() const = 0;
  /// False when this predictor has nothing to condition on for `horizon`.
  virtual bool has_horizon(std::size_t horizon) const = 0;
  virtual gp::Prediction predict(std::size_t horizon, const Eigen::VectorXd& x) const = 0;
};

class SourcePredictor final : public HorizonPredictor {
 public:
  explicit SourcePredictor(const SourceModel& source) : source_(&source) {}
  ModelKind kind() const override { return ModelKind::sGP; }
  bool has_horizon(std::size_t) const override { return true; }
  gp::Prediction predict(std::size_t horizon, const Eigen::VectorXd& x) const override;

 private:
  const SourceModel* source_;
};

/// Source posterior used as the prior and conditioned on the patient's own
/// observed rows under the source hyperparameters. Equivalent to an exact GP
/// on (source rows + history rows), computed by block conditioning.
class PersonalizedPredictor final : public HorizonPredictor {
 public:
  ModelKind kind() const override { return ModelKind::pGP; }
  bool has_horizon(std::size_t) const override { return true; }
  gp::Prediction predict(std::size_t horizon, const Eigen::VectorXd& x) const override;
  std::size_t history_size(std::size_t horizon) const { return static_cast<std::size_t>(state_[horizon].H.rows()); }

 private:
  friend PersonalizedPredictor personalize(const SourceModel&, const std::vector<HistoryRow>&);
  struct HorizonState {
    Eigen::MatrixXd H;        // history inputs (m x D)
    Eigen::MatrixXd V;        // L^{-1} k(X, H)
    Eigen::MatrixXd C;        // chol(Sigma_s(H,H) + noise I)
    Eigen::VectorXd weights;  // C^{-1} (y_H - mu_s(H))
  };
  const SourceModel* source_ = nullptr;
  std::array<HorizonState, 4> state_;
};

PersonalizedPredictor personalize(const SourceModel& source, const std::vector<HistoryRow>& history);

/// GP on the patient's own rows only, reusing the source hyperparameters
/// (prior mean = mean of the patient's observed targets for that horizon).
class TargetPredictor final : public HorizonPredictor {
 public:
  ModelKind kind() const override { return ModelKind::tGP; }
  bool has_horizon(std::size_t horizon) const override { return horizon_[horizon].has_value(); }
  gp::Prediction predict(std::size_t horizon, const Eigen::VectorXd& x) const override;

 private:
  friend TargetPredictor train_target(const std::vector<HistoryRow>&, const SourceModel&);
  std::array<std::optional<gp::TrainedGP>, 4> horizon_;
};

/// Throws DataError("tGP undefined before first observation") when no
/// history row carries any observed target.
TargetPredictor train_target(const std::vector<HistoryRow>& history, const SourceModel& source);

/// Four (mean, variance) pairs. Horizons the predictor cannot answer are
/// taken from `fallback` when given (flagged), otherwise an error is raised.
HorizonForecast forecast(const HorizonPredictor& predictor, const Eigen::VectorXd& x, int anchor_month,
                         std::string patient_id = {}, const HorizonPredictor* fallback = nullptr);

/// Per-horizon arithmetic mean of the sGP, pGP and tGP means (any order).
std::array<double, 4> ensemble_average(const HorizonForecast& a, const HorizonForecast& b, const HorizonForecast& c);

}  // namespace adprog::forecast
