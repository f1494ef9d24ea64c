#pragma once

#include <cstdint>

#include "capmeter/dataset.hpp"

namespace capmeter {

// Gaussian inputs with variances exp(-kappa * i), i = 1..d, labelled by the argmax
// of a fixed random one-hidden-layer ReLU teacher.
struct SyntheticConfig {
  std::size_t d = 20;
  double kappa = 1.0;
  std::size_t teacher_hidden = 1000;
  int m_classes = 2;
  std::uint64_t seed = 0;
};

// Row i depends only on (config, i), so a larger N extends a smaller one.
Dataset gen_synthetic(const SyntheticConfig& config, std::size_t n);

}  // namespace capmeter
