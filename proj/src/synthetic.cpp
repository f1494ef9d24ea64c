#include "capmeter/synthetic.hpp"

#include <cmath>

#include "capmeter/errors.hpp"
#include "capmeter/rng.hpp"

namespace capmeter {

Dataset gen_synthetic(const SyntheticConfig& config, std::size_t n) {
  if (config.d < 1) throw Error(ErrorCode::InvalidArgument, "synthetic data needs d >= 1");
  if (!(config.kappa >= 0.0)) throw Error(ErrorCode::InvalidArgument, "kappa must be non-negative");
  if (config.teacher_hidden < 1) throw Error(ErrorCode::InvalidArgument, "teacher needs at least one hidden unit");
  if (config.m_classes < 2) throw Error(ErrorCode::InvalidArgument, "need at least two classes");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "N must be at least 1");

  const auto d = static_cast<Eigen::Index>(config.d);
  const auto h = static_cast<Eigen::Index>(config.teacher_hidden);
  const auto m = static_cast<Eigen::Index>(config.m_classes);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Teacher weights ~ N(0, 1/fan_in).
  Rng teacher_rng(derive_seed(config.seed, {stream::kTeacher}));
  RowMatrix w1(h, d);
  RowMatrix w2(m, h);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(config.d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(config.teacher_hidden));
  for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = s1 * normal(teacher_rng);
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = s2 * normal(teacher_rng);

  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) scale(j) = std::exp(-0.5 * config.kappa * static_cast<double>(j + 1));

  Dataset ds;
  ds.task = Task::Classification;
  ds.m_classes = config.m_classes;
  ds.inputs.resize(static_cast<Eigen::Index>(n), d);
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    Rng row_rng(derive_seed(config.seed, {stream::kInputs, r}));
    auto x = ds.inputs.row(static_cast<Eigen::Index>(r));
    for (Eigen::Index j = 0; j < d; ++j) x(j) = scale(j) * normal(row_rng);
    const Eigen::VectorXd hidden = (w1 * x.transpose()).cwiseMax(0.0);
    const Eigen::VectorXd logits = w2 * hidden;
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    ds.labels[r] = static_cast<double>(best);
  }
  return ds;
}

}  // namespace capmeter
