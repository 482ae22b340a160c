#include "face_manifold/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "face_manifold/errors.hpp"
#include "face_manifold/parallel.hpp"

namespace face_manifold {

std::vector<double> corrupt_entries(std::span<const double> clean, double sigma,
                                    std::size_t count, Rng& rng) {
  const std::size_t p = clean.size();
  if (count > p) {
    throw InvalidArgument(fmt::format("cannot corrupt {} of {} entries", count, p));
  }
  std::vector<double> noisy(clean.begin(), clean.end());
  // Partial Fisher-Yates: the first `count` slots become a uniform subset.
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, p - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) noisy[order[i]] += sigma * noise(rng);
  return noisy;
}

std::vector<double> corrupt(std::span<const double> clean, double sigma, Rng& rng) {
  if (clean.empty()) throw InvalidArgument("cannot corrupt an empty parameter vector");
  std::uniform_int_distribution<std::size_t> how_many(1, clean.size());
  const std::size_t count = how_many(rng);
  return corrupt_entries(clean, sigma, count, rng);
}

ParamDataset build_dataset(ParamGroup group, const std::vector<std::vector<double>>& clean_set,
                           const CorruptionConfig& config, unsigned threads) {
  if (clean_set.empty()) throw InvalidArgument("clean set is empty");
  if (!(config.sigma > 0.0) || !std::isfinite(config.sigma)) {
    throw InvalidArgument(fmt::format("noise sigma must be positive, got {}", config.sigma));
  }
  if (config.copies < 1) throw InvalidArgument("copies must be >= 1");
  const std::size_t p = clean_set.front().size();
  if (p == 0) throw InvalidArgument("clean samples have no entries");
  for (std::size_t i = 0; i < clean_set.size(); ++i) {
    if (clean_set[i].size() != p) {
      throw DimensionError(fmt::format("ragged clean set: sample {} has {} entries, sample 0 has {}",
                                       i, clean_set[i].size(), p));
    }
  }

  ParamDataset out;
  out.group = group;
  out.param_count = static_cast<std::uint32_t>(p);
  out.pairs.resize(clean_set.size() * config.copies);
  parallel_for(out.pairs.size(), resolve_threads(threads), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = k / config.copies;
      const std::size_t j = k % config.copies;
      Rng rng = make_stream(config.seed, "corrupt", i, j);
      out.pairs[k].clean = clean_set[i];
      out.pairs[k].noisy = corrupt(clean_set[i], config.sigma, rng);
    }
  });
  return out;
}

std::vector<std::vector<double>> sample_clean_set(const MorphableModel& model, ParamGroup group,
                                                  std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_stream(seed, "clean", i, static_cast<std::uint64_t>(group));
    out.push_back(sample_normal(model, group, rng).values);
  }
  return out;
}

namespace {

void rescale(ParamDataset& dataset, auto&& op) {
  for (auto& pair : dataset.pairs) {
    for (auto& x : pair.clean) x = op(x);
    for (auto& x : pair.noisy) x = op(x);
  }
}

}  // namespace

ParamDataset normalize_shape(ParamDataset dataset) {
  if (dataset.group != ParamGroup::identity) {
    throw InvalidArgument("only identity (shape) datasets are normalized");
  }
  if (dataset.normalization != 1.0) {
    throw InvalidArgument(fmt::format("dataset already normalized (normalization = {})",
                                      dataset.normalization));
  }
  rescale(dataset, [](double x) { return x / kShapeNormalizationDivisor; });
  dataset.normalization = kShapeNormalization;
  return dataset;
}

ParamDataset denormalize_shape(ParamDataset dataset) {
  if (dataset.group != ParamGroup::identity) {
    throw InvalidArgument("only identity (shape) datasets are denormalized");
  }
  if (dataset.normalization != kShapeNormalization) {
    throw InvalidArgument(fmt::format("dataset is not normalized (normalization = {})",
                                      dataset.normalization));
  }
  rescale(dataset, [](double x) { return x * kShapeNormalizationDivisor; });
  dataset.normalization = 1.0;
  return dataset;
}

std::vector<std::size_t> clean_groups(const ParamDataset& dataset) {
  std::vector<std::size_t> starts;
  for (std::size_t k = 0; k < dataset.pairs.size(); ++k) {
    if (k == 0 || dataset.pairs[k].clean != dataset.pairs[k - 1].clean) starts.push_back(k);
  }
  starts.push_back(dataset.pairs.size());
  return starts;
}

std::pair<ParamDataset, ParamDataset> split(const ParamDataset& dataset, double test_fraction,
                                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument(
        fmt::format("test fraction must lie in (0, 1), got {}", test_fraction));
  }
  const auto starts = clean_groups(dataset);
  const std::size_t groups = starts.size() - 1;

  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, "split");
  std::shuffle(order.begin(), order.end(), rng);

  auto test_groups = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(groups)));
  test_groups = std::max<std::size_t>(test_groups, 1);
  if (groups >= 2) test_groups = std::min(test_groups, groups - 1);
  test_groups = std::min(test_groups, groups);

  std::vector<bool> is_test(groups, false);
  for (std::size_t g = 0; g < test_groups; ++g) is_test[order[g]] = true;

  ParamDataset train{dataset.group, dataset.param_count, {}, dataset.normalization};
  ParamDataset test{dataset.group, dataset.param_count, {}, dataset.normalization};
  for (std::size_t g = 0; g < groups; ++g) {
    auto& side = is_test[g] ? test : train;
    for (std::size_t k = starts[g]; k < starts[g + 1]; ++k) side.pairs.push_back(dataset.pairs[k]);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// .fds: "FDS1", u8 group, u32 P, u64 pair-count, f64 normalization,
// then pair-count blocks of [clean(P), noisy(P)] as f64.

std::string serialize_dataset(const ParamDataset& dataset) {
  detail::BinaryWriter w;
  w.magic("FDS1");
  w.put<std::uint8_t>(static_cast<std::uint8_t>(dataset.group));
  w.put<std::uint32_t>(dataset.param_count);
  w.put<std::uint64_t>(dataset.pairs.size());
  w.put<double>(dataset.normalization);
  for (const auto& pair : dataset.pairs) {
    if (pair.clean.size() != dataset.param_count || pair.noisy.size() != dataset.param_count) {
      throw DimensionError("dataset pair length differs from param_count");
    }
    w.put_array<double>(pair.clean);
    w.put_array<double>(pair.noisy);
  }
  return w.bytes();
}

ParamDataset deserialize_dataset(std::string bytes) {
  detail::BinaryReader r(std::move(bytes), "dataset");
  r.expect_magic("FDS1");
  ParamDataset d;
  const auto group = r.get<std::uint8_t>("header.group");
  if (group > 1) throw FormatError(fmt::format("dataset file: invalid group byte {}", group));
  d.group = static_cast<ParamGroup>(group);
  d.param_count = r.get<std::uint32_t>("header.P");
  const auto count = r.get<std::uint64_t>("header.pair_count");
  d.normalization = r.get<double>("header.normalization");
  if (!(d.normalization > 0.0) || !std::isfinite(d.normalization)) {
    throw FormatError(fmt::format("dataset file: invalid normalization {}", d.normalization));
  }
  const std::uint64_t block = 2ULL * d.param_count * sizeof(double);
  if (block != 0 && count > r.remaining() / block) {
    r.truncated(fmt::format("pairs (declared {} pairs of {} entries)", count, d.param_count),
                count * block);
  }
  d.pairs.resize(count);
  for (auto& pair : d.pairs) {
    pair.clean = r.get_array<double>(d.param_count, "pairs.clean");
    pair.noisy = r.get_array<double>(d.param_count, "pairs.noisy");
  }
  r.expect_end();
  return d;
}

void save_dataset(const ParamDataset& dataset, const std::filesystem::path& path) {
  detail::write_file(path, serialize_dataset(dataset));
}

ParamDataset load_dataset(const std::filesystem::path& path) {
  return deserialize_dataset(detail::read_file(path, "dataset"));
}

}  // namespace face_manifold
