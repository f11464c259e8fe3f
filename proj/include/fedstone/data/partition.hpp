#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedstone/data/dataset.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/random.hpp"

namespace fedstone {

struct DatasetPartition {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> validation;
  std::vector<LabeledSample> test;
  Source source = Source::kA;
  std::uint64_t seed = 0;
};

namespace detail {

// Buckets samples by label after a canonical sort by id, so results do not
// depend on input order.
inline std::vector<std::vector<LabeledSample>> by_class(std::vector<LabeledSample> samples) {
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<std::vector<LabeledSample>> buckets(kNumClasses);
  for (auto& s : samples) {
    if (s.label < 0 || s.label >= static_cast<int>(kNumClasses))
      throw InputError("sample label out of range");
    buckets[static_cast<std::size_t>(s.label)].push_back(std::move(s));
  }
  return buckets;
}

inline void sort_by_id(std::vector<LabeledSample>& v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

}  // namespace detail

/// Stratified split: exactly `per_class_test` test samples per class, then
/// round(validation_fraction * remainder) validation samples per class.
inline DatasetPartition partition_dataset(std::vector<LabeledSample> samples,
                                          int per_class_test, double validation_fraction,
                                          std::uint64_t seed) {
  if (samples.empty()) throw InputError("cannot partition an empty dataset");
  if (per_class_test < 0) throw InputError("per_class_test must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw InputError("validation_fraction must lie in [0, 1)");
  const Source source = samples.front().source;
  for (const auto& s : samples)
    if (s.source != source) throw InputError("partition input mixes dataset sources");

  DatasetPartition part;
  part.source = source;
  part.seed = seed;
  auto buckets = detail::by_class(std::move(samples));
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    auto& bucket = buckets[k];
    const auto need = static_cast<std::size_t>(per_class_test) + 1;
    if (bucket.size() < need)
      throw InputError("class " + std::string(class_names(source)[k]) + " has " +
                       std::to_string(bucket.size()) + " samples; need at least " +
                       std::to_string(need));
    Rng rng = derive_stream(seed, {static_cast<std::uint64_t>(source), k, fnv1a("partition")});
    rng.shuffle(bucket);
    const std::size_t n_test = static_cast<std::size_t>(per_class_test);
    const std::size_t pool = bucket.size() - n_test;
    const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(pool)));
    for (std::size_t i = 0; i < bucket.size(); ++i) {
      auto& dst = i < n_test ? part.test : (i < n_test + n_val ? part.validation : part.train);
      dst.push_back(std::move(bucket[i]));
    }
  }
  detail::sort_by_id(part.train);
  detail::sort_by_id(part.validation);
  detail::sort_by_id(part.test);
  return part;
}

namespace detail {

inline std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> halve(
    std::vector<LabeledSample> samples, std::uint64_t seed, std::uint64_t split_key) {
  auto buckets = by_class(std::move(samples));
  std::vector<LabeledSample> good, corrupted;
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    auto& bucket = buckets[k];
    Rng rng = derive_stream(seed, {split_key, k, fnv1a("good_corrupted")});
    rng.shuffle(bucket);
    const std::size_t n_good = (bucket.size() + 1) / 2;  // odd extra goes to good
    for (std::size_t i = 0; i < bucket.size(); ++i)
      (i < n_good ? good : corrupted).push_back(std::move(bucket[i]));
  }
  sort_by_id(good);
  sort_by_id(corrupted);
  return {std::move(good), std::move(corrupted)};
}

}  // namespace detail

/// Halves every split class-stratified. Returns (good, corrupted); with an
/// odd class count the extra sample goes to the good half. Corruption itself
/// is applied separately.
inline std::pair<DatasetPartition, DatasetPartition> split_good_corrupted(
    const DatasetPartition& part, std::uint64_t seed) {
  DatasetPartition good, bad;
  good.source = bad.source = part.source;
  good.seed = bad.seed = part.seed;
  const std::uint64_t src = static_cast<std::uint64_t>(part.source) << 8;
  std::tie(good.train, bad.train) = detail::halve(part.train, seed, src | 1);
  std::tie(good.validation, bad.validation) = detail::halve(part.validation, seed, src | 2);
  std::tie(good.test, bad.test) = detail::halve(part.test, seed, src | 3);
  return {std::move(good), std::move(bad)};
}

}  // namespace fedstone
