#pragma once

// Clean/noisy parameter-pair datasets built by sparse random corruption.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "face_manifold/morphable_model.hpp"
#include "face_manifold/rng.hpp"

namespace face_manifold {

struct SamplePair {
  std::vector<double> clean;
  std::vector<double> noisy;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

/// Multiplier applied to identity parameters before they reach a network.
inline constexpr double kShapeNormalization = 1e-5;
inline constexpr double kShapeNormalizationDivisor = 1e5;

struct ParamDataset {
  ParamGroup group = ParamGroup::expression;
  std::uint32_t param_count = 0;
  std::vector<SamplePair> pairs;
  /// 1 for raw units, kShapeNormalization once identity data is normalized.
  double normalization = 1.0;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  friend bool operator==(const ParamDataset&, const ParamDataset&) = default;
};

struct CorruptionConfig {
  double sigma = 2.0;         // noise std, raw parameter units
  std::uint32_t copies = 50;  // noisy versions per clean sample
  std::uint64_t seed = 0;
};

/// Adds N(0, sigma) noise to `count` distinct, uniformly chosen entries.
std::vector<double> corrupt_entries(std::span<const double> clean, double sigma,
                                    std::size_t count, Rng& rng);

/// Draws count ~ U{1..P}, then corrupt_entries().
std::vector<double> corrupt(std::span<const double> clean, double sigma, Rng& rng);

/// Pair (i * copies + j) corrupts clean sample i with stream (seed, "corrupt", i, j).
/// Output is identical for any thread count.
ParamDataset build_dataset(ParamGroup group, const std::vector<std::vector<double>>& clean_set,
                           const CorruptionConfig& config, unsigned threads = 1);

/// `count` Gaussian draws (sample_normal) from stream (seed, "clean", i).
std::vector<std::vector<double>> sample_clean_set(const MorphableModel& model, ParamGroup group,
                                                  std::size_t count, std::uint64_t seed);

/// Divides every identity entry by 1e5. Rejects expression data and
/// already-normalized datasets.
ParamDataset normalize_shape(ParamDataset dataset);
/// Inverse of normalize_shape.
ParamDataset denormalize_shape(ParamDataset dataset);

/// Consecutive runs of pairs sharing a bitwise-identical clean vector.
/// Returns the start offset of each run plus a final end sentinel.
std::vector<std::size_t> clean_groups(const ParamDataset& dataset);

/// Partitions whole clean-sample groups so no clean face appears on both sides.
/// The test side gets round(fraction * groups) groups (at least one, and one
/// is always left for training when there are two or more).
std::pair<ParamDataset, ParamDataset> split(const ParamDataset& dataset, double test_fraction,
                                            std::uint64_t seed);

std::string serialize_dataset(const ParamDataset& dataset);
ParamDataset deserialize_dataset(std::string bytes);
void save_dataset(const ParamDataset& dataset, const std::filesystem::path& path);
ParamDataset load_dataset(const std::filesystem::path& path);

}  // namespace face_manifold
