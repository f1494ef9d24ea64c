#include "capmeter/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "capmeter/errors.hpp"
#include "capmeter/text.hpp"

namespace capmeter {

namespace {

void require_rows(std::span<const std::size_t> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");
}

// ---------------------------------------------------------------------------
// k nearest neighbours

class KnnModel final : public PredictiveModel {
 public:
  KnnModel(const Dataset& data, std::span<const std::size_t> rows, const KnnConfig& cfg)
      : cfg_(cfg), task_(data.task), m_(data.m_classes), train_(data.subset(rows)), row_ids_(rows.begin(), rows.end()) {}

  double log_prob(std::span<const double> x, double y) const override {
    const std::size_t n = train_.size();
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.k), n);
    const Eigen::Map<const Eigen::RowVectorXd> q(x.data(), static_cast<Eigen::Index>(x.size()));

    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = {(train_.inputs.row(static_cast<Eigen::Index>(i)) - q).squaredNorm(), i};
    // Ties go to the lowest dataset row index.
    const auto closer = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      if (row_ids_[a.second] != row_ids_[b.second]) return row_ids_[a.second] < row_ids_[b.second];
      return a.second < b.second;
    };
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end(), closer);

    if (task_ == Task::Regression) {
      double mean = 0.0;
      for (std::size_t i = 0; i < k; ++i) mean += train_.labels[dist[i].second];
      return gaussian_log_prob(y, mean / static_cast<double>(k), cfg_.sigma);
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (train_.label(dist[i].second) == static_cast<int>(y)) ++hits;
    return std::log((static_cast<double>(hits) + cfg_.alpha) /
                    (static_cast<double>(k) + cfg_.alpha * static_cast<double>(m_)));
  }

 private:
  KnnConfig cfg_;
  Task task_;
  int m_;
  Dataset train_;
  std::vector<std::size_t> row_ids_;
};

class KnnLearner final : public Learner {
 public:
  explicit KnnLearner(const KnnConfig& cfg) : cfg_(cfg) {
    if (cfg.k < 1) throw Error(ErrorCode::InvalidArgument, "knn needs k >= 1");
    if (!(cfg.alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "knn smoothing alpha must be positive");
  }
  std::string describe() const override {
    return "knn(k=" + std::to_string(cfg_.k) + ",alpha=" + text::format_real(cfg_.alpha) + ")";
  }
  std::unique_ptr<PredictiveModel> fit(const Dataset& data, std::span<const std::size_t> rows,
                                       std::uint64_t) const override {
    require_rows(rows);
    return std::make_unique<KnnModel>(data, rows, cfg_);
  }

 private:
  KnnConfig cfg_;
};

// ---------------------------------------------------------------------------
// Parametric learners

class ParametricPredictor final : public PredictiveModel {
 public:
  ParametricPredictor(std::shared_ptr<const ParametricModel> model, std::vector<double> w)
      : model_(std::move(model)), w_(std::move(w)) {}
  double log_prob(std::span<const double> x, double y) const override { return model_->log_prob(w_, x, y); }
  std::span<const double> weights() const override { return w_; }

 private:
  std::shared_ptr<const ParametricModel> model_;
  std::vector<double> w_;
};

// Multiplies inputs by a fixed scalar before handing them to the wrapped model.
class ScaledInputPredictor final : public PredictiveModel {
 public:
  ScaledInputPredictor(std::unique_ptr<PredictiveModel> inner, double scale)
      : inner_(std::move(inner)), scale_(scale) {}
  double log_prob(std::span<const double> x, double y) const override {
    std::vector<double> scaled(x.begin(), x.end());
    for (double& v : scaled) v *= scale_;
    return inner_->log_prob(scaled, y);
  }
  std::span<const double> weights() const override { return inner_->weights(); }

 private:
  std::unique_ptr<PredictiveModel> inner_;
  double scale_;
};

class LogisticLearner final : public Learner {
 public:
  explicit LogisticLearner(const LogisticConfig& cfg) : cfg_(cfg) {
    if (cfg.l2 < 0.0 || cfg.prior_precision < 0.0)
      throw Error(ErrorCode::InvalidArgument, "l2 and prior precision must be non-negative");
    if (cfg.epochs < 1 || !(cfg.lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "need epochs >= 1 and lr > 0");
  }

  std::string describe() const override {
    std::ostringstream s;
    s << "logistic(l2=" << text::format_real(cfg_.l2) << ",prior_precision=" << text::format_real(cfg_.prior_precision)
      << ",epochs=" << cfg_.epochs
      << ",lr=" << text::format_real(cfg_.lr) << ")";
    return s.str();
  }

  std::shared_ptr<const ParametricModel> parametric_model(const Dataset& data) const override {
    return std::make_shared<LinearModel>(data.feature_dim(), output_spec_for(data, cfg_.sigma));
  }

  std::unique_ptr<PredictiveModel> fit(const Dataset& data, std::span<const std::size_t> rows,
                                       std::uint64_t) const override {
    require_rows(rows);
    auto model = parametric_model(data);
    const Dataset train = data.subset(rows);
    const auto n = static_cast<double>(train.size());

    // Smoothness bound: the softmax log-partition has curvature <= 1/2 in the logits.
    const double mean_sq = (train.inputs.rowwise().squaredNorm().array() + 1.0).mean();
    const double curvature = data.is_regression() ? 1.0 / (cfg_.sigma * cfg_.sigma) : 0.5;
    const double penalty = cfg_.l2 + cfg_.prior_precision / n;
    const double step = std::min(cfg_.lr, 1.0 / (curvature * mean_sq + penalty));

    std::vector<double> w(model->dim(), 0.0);
    std::vector<double> g(w.size());
    for (int it = 0; it < cfg_.epochs; ++it) {
      std::fill(g.begin(), g.end(), 0.0);
      const double loss = model->nll_sum(w, train.inputs, train.labels, g) / n;
      if (!std::isfinite(loss))
        throw Error(ErrorCode::NonFiniteLoss, "logistic training diverged at iteration " + std::to_string(it));
      double gmax = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        g[i] = g[i] / n + penalty * w[i];
        gmax = std::max(gmax, std::abs(g[i]));
      }
      if (gmax < cfg_.grad_tol) break;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * g[i];
    }
    return std::make_unique<ParametricPredictor>(std::move(model), std::move(w));
  }

 private:
  LogisticConfig cfg_;
};

class MlpLearner final : public Learner {
 public:
  explicit MlpLearner(const MlpConfig& cfg) : cfg_(cfg) {
    if (cfg.hidden < 1) throw Error(ErrorCode::InvalidArgument, "mlp needs hidden >= 1");
    if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr_max > 0.0))
      throw Error(ErrorCode::InvalidArgument, "mlp needs epochs >= 1, batch >= 1, lr_max > 0");
  }

  std::string describe() const override {
    std::ostringstream s;
    s << "mlp(hidden=" << cfg_.hidden << ",epochs=" << cfg_.epochs << ",lr_max=" << text::format_real(cfg_.lr_max)
      << ",batch=" << cfg_.batch << ",weight_decay=" << text::format_real(cfg_.weight_decay)
      << (cfg_.normalize_inputs ? ",normalized" : "") << ")";
    return s.str();
  }

  std::shared_ptr<const ParametricModel> parametric_model(const Dataset& data) const override {
    return std::make_shared<MlpModel>(data.feature_dim(), cfg_.hidden, output_spec_for(data, cfg_.sigma));
  }

  std::unique_ptr<PredictiveModel> fit(const Dataset& data, std::span<const std::size_t> rows,
                                       std::uint64_t seed) const override {
    require_rows(rows);
    if (cfg_.normalize_inputs) {
      // Train on a copy scaled to unit mean squared input norm.
      Dataset train = data.subset(rows);
      const double ms = train.inputs.rowwise().squaredNorm().mean();
      const double scale = ms > 0.0 ? 1.0 / std::sqrt(ms) : 1.0;
      train.inputs *= scale;
      std::vector<std::size_t> all(train.size());
      std::iota(all.begin(), all.end(), std::size_t{0});
      return std::make_unique<ScaledInputPredictor>(train_sgd(train, all, seed), scale);
    }
    return train_sgd(data, rows, seed);
  }

 private:
  std::unique_ptr<PredictiveModel> train_sgd(const Dataset& data, std::span<const std::size_t> rows,
                                             std::uint64_t seed) const {
    auto model = parametric_model(data);
    Rng rng(seed);
    std::vector<double> w(model->dim());
    model->initialize(rng, w);
    std::vector<double> velocity(w.size(), 0.0);
    std::vector<double> g(w.size());

    std::vector<std::size_t> order(rows.begin(), rows.end());
    const std::size_t n = order.size();
    const std::size_t batch = std::min(cfg_.batch, n);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const double total_steps = static_cast<double>(steps_per_epoch) * cfg_.epochs;

    std::size_t t = 0;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += batch, ++t) {
        const std::size_t stop = std::min(n, start + batch);
        const std::span<const std::size_t> mb(order.data() + start, stop - start);
        std::fill(g.begin(), g.end(), 0.0);
        const double loss = model->nll_sum(w, data, mb, g);
        if (!std::isfinite(loss))
          throw Error(ErrorCode::NonFiniteLoss, "mlp training diverged in epoch " + std::to_string(epoch));

        // One-cycle cosine decay from lr_max towards zero.
        const double lr = cfg_.lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / total_steps));
        const double scale = 1.0 / static_cast<double>(mb.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double gi = g[i] * scale + cfg_.weight_decay * w[i];
          velocity[i] = cfg_.momentum * velocity[i] + gi;
          w[i] -= lr * (gi + cfg_.momentum * velocity[i]);
        }
      }
    }
    return std::make_unique<ParametricPredictor>(std::move(model), std::move(w));
  }

  MlpConfig cfg_;
};

class ConstantModel final : public PredictiveModel {
 public:
  explicit ConstantModel(int m) : log_p_(-std::log(static_cast<double>(m))) {}
  double log_prob(std::span<const double>, double) const override { return log_p_; }

 private:
  double log_p_;
};

class ConstantLearner final : public Learner {
 public:
  std::string describe() const override { return "constant-uniform"; }
  std::unique_ptr<PredictiveModel> fit(const Dataset& data, std::span<const std::size_t> rows,
                                       std::uint64_t) const override {
    require_rows(rows);
    if (data.is_regression()) throw Error(ErrorCode::InvalidArgument, "constant-uniform learner is for classification");
    return std::make_unique<ConstantModel>(data.m_classes);
  }
};

}  // namespace

std::unique_ptr<Learner> knn_learner(const KnnConfig& config) { return std::make_unique<KnnLearner>(config); }
std::unique_ptr<Learner> logistic_learner(const LogisticConfig& config) {
  return std::make_unique<LogisticLearner>(config);
}
std::unique_ptr<Learner> mlp_learner(const MlpConfig& config) { return std::make_unique<MlpLearner>(config); }
std::unique_ptr<Learner> constant_learner() { return std::make_unique<ConstantLearner>(); }

}  // namespace capmeter
