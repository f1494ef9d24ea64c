#include "capmeter/models.hpp"

#include <cmath>
#include <numbers>

#include "capmeter/errors.hpp"

namespace capmeter {

namespace {

using Eigen::Index;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

// Per-row negative log-likelihood of a logits matrix; overwrites `logits` with
// d(nll)/d(logits) when `want_grad`.
double softmax_nll(RowMatrix& logits, std::span<const double> y, bool want_grad) {
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    const auto label = static_cast<Index>(y[static_cast<std::size_t>(r)]);
    total += lse - row(label);
    if (want_grad) {
      row = (row.array() - lse).exp();
      row(label) -= 1.0;
    }
  }
  return total;
}

double gaussian_nll(RowMatrix& pred, std::span<const double> y, double sigma, bool want_grad) {
  const double log_norm = std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
  const double inv_var = 1.0 / (sigma * sigma);
  double total = 0.0;
  for (Index r = 0; r < pred.rows(); ++r) {
    const double resid = pred(r, 0) - y[static_cast<std::size_t>(r)];
    total += 0.5 * resid * resid * inv_var + log_norm;
    if (want_grad) pred(r, 0) = resid * inv_var;
  }
  return total;
}

}  // namespace

OutputSpec output_spec_for(const Dataset& data, double sigma) {
  return {data.task, data.is_regression() ? 1 : data.m_classes, sigma};
}

double gaussian_log_prob(double y, double f, double sigma) {
  const double z = (y - f) / sigma;
  return -0.5 * z * z - std::log(sigma * std::sqrt(2.0 * std::numbers::pi));
}

double ParametricModel::nll_sum(std::span<const double> w, const Dataset& data,
                                std::span<const std::size_t> rows, std::span<double> grad) const {
  RowMatrix x(static_cast<Index>(rows.size()), static_cast<Index>(data.feature_dim()));
  std::vector<double> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Index>(r)) = data.inputs.row(static_cast<Index>(rows[r]));
    y[r] = data.labels[rows[r]];
  }
  return nll_sum(w, x, y, grad);
}

// ---------------------------------------------------------------------------

LinearModel::LinearModel(std::size_t d, OutputSpec out)
    : d_(d), out_(out), outputs_(out.task == Task::Regression ? 1 : static_cast<std::size_t>(out.m_classes - 1)) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "linear model needs d >= 1");
  if (out.task == Task::Classification && out.m_classes < 2)
    throw Error(ErrorCode::InvalidArgument, "classification needs at least two classes");
  if (out.task == Task::Regression && !(out.sigma > 0.0))
    throw Error(ErrorCode::InvalidArgument, "regression sigma must be positive");
}

void LinearModel::initialize(Rng&, std::span<double> w) const {
  std::fill(w.begin(), w.end(), 0.0);
}

double LinearModel::log_prob(std::span<const double> w, std::span<const double> x, double y) const {
  const auto o = static_cast<Index>(outputs_);
  const auto d = static_cast<Index>(d_);
  ConstMap weights(w.data(), o, d);
  ConstVec bias(w.data() + o * d, o);
  const Eigen::VectorXd z = weights * ConstVec(x.data(), d) + bias;
  if (out_.task == Task::Regression) return gaussian_log_prob(y, z(0), out_.sigma);

  const double mx = std::max(0.0, z.maxCoeff());
  const double lse = mx + std::log(std::exp(-mx) + (z.array() - mx).exp().sum());
  const auto label = static_cast<Index>(y);
  return (label == 0 ? 0.0 : z(label - 1)) - lse;
}

double LinearModel::nll_sum(std::span<const double> w, const RowMatrix& x, std::span<const double> y,
                            std::span<double> grad) const {
  const auto o = static_cast<Index>(outputs_);
  const auto d = static_cast<Index>(d_);
  ConstMap weights(w.data(), o, d);
  ConstVec bias(w.data() + o * d, o);
  const bool want_grad = !grad.empty();

  if (out_.task == Task::Regression) {
    RowMatrix pred = (x * weights.transpose()).rowwise() + bias.transpose();
    const double total = gaussian_nll(pred, y, out_.sigma, want_grad);
    if (want_grad) {
      Map(grad.data(), o, d).noalias() += pred.transpose() * x;
      Vec(grad.data() + o * d, o) += pred.colwise().sum().transpose();
    }
    return total;
  }

  // Full logits with the reference class pinned at zero.
  RowMatrix logits(x.rows(), o + 1);
  logits.col(0).setZero();
  logits.rightCols(o) = (x * weights.transpose()).rowwise() + bias.transpose();
  const double total = softmax_nll(logits, y, want_grad);
  if (want_grad) {
    const auto dz = logits.rightCols(o);
    Map(grad.data(), o, d).noalias() += dz.transpose() * x;
    Vec(grad.data() + o * d, o) += dz.colwise().sum().transpose();
  }
  return total;
}

// ---------------------------------------------------------------------------

MlpModel::MlpModel(std::size_t d, std::size_t hidden, OutputSpec out)
    : d_(d), hidden_(hidden), out_(out), outputs_(out.task == Task::Regression ? 1 : static_cast<std::size_t>(out.m_classes)) {
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "mlp needs d >= 1");
  if (hidden == 0) throw Error(ErrorCode::InvalidArgument, "mlp needs hidden >= 1");
  if (out.task == Task::Classification && out.m_classes < 2)
    throw Error(ErrorCode::InvalidArgument, "classification needs at least two classes");
  if (out.task == Task::Regression && !(out.sigma > 0.0))
    throw Error(ErrorCode::InvalidArgument, "regression sigma must be positive");
}

// Layout: W1 (h x d), b1 (h), W2 (o x h), b2 (o).
std::size_t MlpModel::dim() const { return hidden_ * d_ + hidden_ + outputs_ * hidden_ + outputs_; }

void MlpModel::initialize(Rng& rng, std::span<double> w) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d_));
  const double s2 = std::sqrt(1.0 / static_cast<double>(hidden_));
  std::size_t k = 0;
  for (std::size_t i = 0; i < hidden_ * d_; ++i) w[k++] = s1 * normal(rng);
  for (std::size_t i = 0; i < hidden_; ++i) w[k++] = 0.0;
  for (std::size_t i = 0; i < outputs_ * hidden_; ++i) w[k++] = s2 * normal(rng);
  for (std::size_t i = 0; i < outputs_; ++i) w[k++] = 0.0;
}

double MlpModel::log_prob(std::span<const double> w, std::span<const double> x, double y) const {
  RowMatrix row = ConstMap(x.data(), 1, static_cast<Index>(d_));
  const double nll = nll_sum(w, row, std::span<const double>(&y, 1), {});
  return -nll;
}

double MlpModel::nll_sum(std::span<const double> w, const RowMatrix& x, std::span<const double> y,
                         std::span<double> grad) const {
  const auto h = static_cast<Index>(hidden_);
  const auto d = static_cast<Index>(d_);
  const auto o = static_cast<Index>(outputs_);
  const double* p = w.data();
  ConstMap w1(p, h, d);
  ConstVec b1(p + h * d, h);
  ConstMap w2(p + h * d + h, o, h);
  ConstVec b2(p + h * d + h + o * h, o);

  const RowMatrix pre = (x * w1.transpose()).rowwise() + b1.transpose();
  const RowMatrix act = pre.cwiseMax(0.0);
  RowMatrix out = (act * w2.transpose()).rowwise() + b2.transpose();

  const bool want_grad = !grad.empty();
  const double total = out_.task == Task::Regression ? gaussian_nll(out, y, out_.sigma, want_grad)
                                                     : softmax_nll(out, y, want_grad);
  if (!want_grad) return total;

  double* g = grad.data();
  Map(g + h * d + h, o, h).noalias() += out.transpose() * act;
  Vec(g + h * d + h + o * h, o) += out.colwise().sum().transpose();
  RowMatrix dact = out * w2;
  dact = (pre.array() > 0.0).select(dact, 0.0);
  Map(g, h, d).noalias() += dact.transpose() * x;
  Vec(g + h * d, h) += dact.colwise().sum().transpose();
  return total;
}

}  // namespace capmeter
