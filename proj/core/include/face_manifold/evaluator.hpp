#pragma once

// Analyses over trained networks: noise sweeps, synthetic generation from
// uniform draws, covariance-trace diversity and 2D PCA scatter projections.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "face_manifold/autoencoder.hpp"
#include "face_manifold/dataset.hpp"
#include "face_manifold/morphable_model.hpp"

namespace face_manifold {

using Samples = std::vector<std::vector<double>>;

struct SweepPoint {
  double sigma = 0.0;
  double input_mse = 0.0;
  double output_mse = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
};

/// `count` values log-spaced from sigma_train / 4 to 4 * sigma_train.
std::vector<double> default_sweep_sigmas(double sigma_train, std::size_t count = 9);

/// For each sigma, corrupts `clean_set` (raw units) with build_dataset using the
/// same seed at every sigma, normalizes identity data, and evaluates MSEs.
SweepResult noise_sweep(const AutoencoderWeights& weights, ParamGroup group,
                        const Samples& clean_set, const std::vector<double>& sigmas,
                        std::uint32_t copies, std::uint64_t seed, unsigned threads = 0);

/// R^2 of the least-squares fit y = a + b x + c x^2.
double quadratic_fit_r_squared(const std::vector<double>& x, const std::vector<double>& y);

struct SyntheticSets {
  ParamDataset shape;       // clean = denoised, noisy = raw uniform draw; raw units
  ParamDataset expression;
};

inline constexpr double kDefaultShapeInterval = 10.0;
inline constexpr double kDefaultExpressionInterval = 15.0;

/// Draws `count` uniform vectors per group (streams (seed, "synthetic-identity", i)
/// and (seed, "synthetic-expression", i)), denoises them, and returns
/// (denoised, raw) pairs. Shape vectors pass through the network normalized.
SyntheticSets generate_synthetic(const MorphableModel& model,
                                 const AutoencoderWeights* shape_weights,
                                 const AutoencoderWeights* exp_weights, std::size_t count,
                                 double k_shape = kDefaultShapeInterval,
                                 double k_exp = kDefaultExpressionInterval,
                                 std::uint64_t seed = 0, unsigned threads = 0);

/// Trace of the unbiased (n - 1) sample covariance.
double covariance_trace(const Samples& samples);

struct Pca2d {
  std::vector<double> mean;
  std::array<std::vector<double>, 2> components;  // unit vectors, descending eigenvalue
  std::array<double, 2> eigenvalues{};
  std::array<std::size_t, 2> iterations{};
};

inline constexpr double kPowerIterationTolerance = 1e-10;
inline constexpr std::size_t kPowerIterationMaxSteps = 10000;

/// Top two covariance eigenvectors by power iteration with deflation. Each
/// eigenvector's first nonzero coordinate is made positive.
Pca2d fit_pca_2d(const Samples& samples);
std::vector<std::array<double, 2>> project_2d(const Pca2d& pca, const Samples& samples);
/// fit_pca_2d + project_2d on the same samples.
std::vector<std::array<double, 2>> pca_project_2d(const Samples& samples);

struct NamedSamples {
  std::string name;
  Samples samples;
};

struct DiversityEntry {
  std::string name;
  std::size_t samples_used = 0;
  bool short_of_requested = false;  // fewer than sample_count available; all were used
  double trace = 0.0;
};

struct DiversityRatio {
  std::string numerator;
  std::string denominator;
  double ratio = 0.0;
};

struct ScatterRow {
  std::string dataset;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct DiversityReport {
  std::vector<DiversityEntry> entries;
  std::vector<DiversityRatio> ratios;  // every pair i < j: trace_i / trace_j
  std::vector<ScatterRow> scatter;     // PCA fit on the union of used samples
};

/// Traces over the first `sample_count` samples of each dataset. Scatter rows
/// cover the first `scatter_cap` of those per dataset (0: all of them).
DiversityReport diversity_report(const std::vector<NamedSamples>& datasets,
                                 std::size_t sample_count = 2000, std::size_t scatter_cap = 0);

/// Clean-side vectors of a dataset, multiplied back to raw units.
Samples clean_samples(const ParamDataset& dataset);

std::string sweep_csv(const SweepResult& sweep);
std::string scatter_csv(const DiversityReport& report);

}  // namespace face_manifold
