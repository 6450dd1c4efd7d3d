#include "hyposcreen/synth.hpp"

#include <cstdio>
#include <string>

#include "hyposcreen/error.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen {

LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.dims < 1 || spec.informative < 1 || spec.informative > spec.dims)
    throw Error(ErrorCode::BadShape, "need dims >= informative >= 1");
  if (spec.n_per_class < 1) throw Error(ErrorCode::BadShape, "need at least one row per class");
  if (!(spec.subgroup_effect >= 0.0 && spec.subgroup_effect <= 1.0))
    throw Error(ErrorCode::BadShape, "subgroup_effect must lie in [0, 1]");

  static constexpr const char* kCohorts[] = {"home_global", "clinic", "pd_care", "home_bd"};
  static constexpr const char* kEthnicities[] = {"white", "black", "asian", "hispanic", "other"};

  LabeledDataset data;
  const int width = spec.dims < 10 ? 1 : spec.dims < 100 ? 2 : 3;
  for (std::size_t j = 0; j < spec.dims; ++j) {
    char name[16];
    std::snprintf(name, sizeof name, "x%0*zu", width, j);
    data.feature_names.emplace_back(name);
  }

  Rng rng(spec.seed);
  const std::size_t n = 2 * spec.n_per_class;
  data.features = Matrix(n, spec.dims);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : 0;
    Demographics demo;
    demo.cohort = kCohorts[rng.below(4)];
    demo.sex = rng.below(2) == 0 ? "M" : "F";
    demo.age = 40.0 + std::floor(40.0 * rng.uniform());
    demo.ethnicity = kEthnicities[rng.below(5)];
    if (label == 1) demo.disease_duration = std::floor(15.0 * rng.uniform());

    const double shift = label == 1 ? spec.delta * (*demo.sex == "F" ? 1.0 - spec.subgroup_effect : 1.0) : 0.0;
    for (std::size_t j = 0; j < spec.dims; ++j)
      data.features(i, j) = rng.normal() + (j < spec.informative ? shift : 0.0);

    char id[24];
    std::snprintf(id, sizeof id, "S%05zu", i);
    data.participant_ids.emplace_back(id);
    data.labels.push_back(label);
    data.demographics.push_back(std::move(demo));
  }
  return data;
}

}  // namespace hyposcreen
