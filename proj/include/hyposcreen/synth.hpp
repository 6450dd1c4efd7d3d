#pragma once

#include <cstdint>

#include "hyposcreen/dataset.hpp"

namespace hyposcreen {

struct SyntheticSpec {
  std::size_t n_per_class = 500;
  double delta = 2.0;        // mean shift of positives along each informative dim
  std::size_t dims = 10;
  std::size_t informative = 1;
  std::uint64_t seed = 0;
  // Fraction by which the class separation shrinks for female rows, which
  // plants a higher error rate in that subgroup. 0 = no effect.
  double subgroup_effect = 0.0;
};

// Unit-variance Gaussian classes whose means differ by delta on the first
// `informative` dims only. Labels alternate 1, 0, 1, 0, ...; demographics are
// drawn from the same seeded stream.
LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace hyposcreen
