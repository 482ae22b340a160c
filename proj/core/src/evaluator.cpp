#include "face_manifold/evaluator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <iterator>

#include "face_manifold/errors.hpp"
#include "face_manifold/trainer.hpp"

namespace face_manifold {

std::vector<double> default_sweep_sigmas(double sigma_train, std::size_t count) {
  if (!(sigma_train > 0.0)) throw InvalidArgument("training sigma must be positive");
  if (count < 2) throw InvalidArgument("a sweep needs at least two sigmas");
  std::vector<double> sigmas(count);
  const double lo = std::log(sigma_train / 4.0);
  const double hi = std::log(sigma_train * 4.0);
  for (std::size_t i = 0; i < count; ++i) {
    sigmas[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return sigmas;
}

SweepResult noise_sweep(const AutoencoderWeights& weights, ParamGroup group,
                        const Samples& clean_set, const std::vector<double>& sigmas,
                        std::uint32_t copies, std::uint64_t seed, unsigned threads) {
  if (clean_set.empty()) throw InvalidArgument("noise_sweep: clean set is empty");
  if (sigmas.empty()) throw InvalidArgument("noise_sweep: no sigmas given");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0) || (i > 0 && !(sigmas[i] > sigmas[i - 1]))) {
      throw InvalidArgument("noise_sweep: sigmas must be positive and strictly increasing");
    }
  }
  SweepResult result;
  for (const double sigma : sigmas) {
    auto data = build_dataset(group, clean_set, {sigma, copies, seed}, threads);
    if (group == ParamGroup::identity) data = normalize_shape(std::move(data));
    const auto report = evaluate_mse(weights, data, threads);
    result.points.push_back({sigma, report.input_mse, report.output_mse});
  }
  return result;
}

double quadratic_fit_r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw InvalidArgument("quadratic fit needs at least three (x, y) points");
  }
  // Normal equations in the monomials 1, x, x^2 (x rescaled for conditioning).
  double scale = 0.0;
  for (const double v : x) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  double a[3][4] = {};
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = x[k] / scale;
    const double basis[3] = {1.0, t, t * t};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) a[r][c] += basis[r] * basis[c];
      a[r][3] += basis[r] * y[k];
    }
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    if (a[col][col] == 0.0) throw InvalidArgument("quadratic fit: degenerate x values");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  const double coef[3] = {a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]};
  double mean = 0.0;
  for (const double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double t = x[k] / scale;
    const double fit = coef[0] + coef[1] * t + coef[2] * t * t;
    ss_res += (y[k] - fit) * (y[k] - fit);
    ss_tot += (y[k] - mean) * (y[k] - mean);
  }
  return ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

SyntheticSets generate_synthetic(const MorphableModel& model,
                                 const AutoencoderWeights* shape_weights,
                                 const AutoencoderWeights* exp_weights, std::size_t count,
                                 double k_shape, double k_exp, std::uint64_t seed,
                                 unsigned threads) {
  if (shape_weights == nullptr || exp_weights == nullptr) {
    throw InvalidArgument("generate_synthetic needs trained shape and expression weights");
  }
  if (shape_weights->spec.input_length != model.param_count(ParamGroup::identity)) {
    throw DimensionError(fmt::format("shape network takes {} parameters, model has {}",
                                     shape_weights->spec.input_length,
                                     model.param_count(ParamGroup::identity)));
  }
  if (exp_weights->spec.input_length != model.param_count(ParamGroup::expression)) {
    throw DimensionError(fmt::format("expression network takes {} parameters, model has {}",
                                     exp_weights->spec.input_length,
                                     model.param_count(ParamGroup::expression)));
  }
  if (!(k_shape > 0.0) || !(k_exp > 0.0)) {
    throw InvalidArgument("uniform interval multipliers must be positive");
  }

  auto run = [&](ParamGroup group, const AutoencoderWeights& weights, double k,
                 std::string_view tag, double divisor) {
    Samples raw(count);
    Samples inputs(count);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng = make_stream(seed, tag, i);
      raw[i] = sample_uniform(model, group, k, rng).values;
      inputs[i] = raw[i];
      for (auto& v : inputs[i]) v /= divisor;
    }
    auto denoised = denoise_batch(weights, inputs, threads);
    ParamDataset out{group, static_cast<std::uint32_t>(model.param_count(group)), {}, 1.0};
    out.pairs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      for (auto& v : denoised[i]) v *= divisor;
      out.pairs.push_back({std::move(denoised[i]), std::move(raw[i])});
    }
    return out;
  };
  return {run(ParamGroup::identity, *shape_weights, k_shape, "synthetic-identity",
              kShapeNormalizationDivisor),
          run(ParamGroup::expression, *exp_weights, k_exp, "synthetic-expression", 1.0)};
}

namespace {

std::size_t uniform_width(const Samples& samples, std::size_t min_count, const char* what) {
  if (samples.size() < min_count) {
    throw InvalidArgument(
        fmt::format("{} needs at least {} samples, got {}", what, min_count, samples.size()));
  }
  const std::size_t d = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != d) throw DimensionError(fmt::format("{}: samples have unequal lengths", what));
  }
  return d;
}

std::vector<double> column_means(const Samples& samples, std::size_t d) {
  std::vector<double> mean(d, 0.0);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
  }
  for (auto& m : mean) m /= static_cast<double>(samples.size());
  return mean;
}

}  // namespace

double covariance_trace(const Samples& samples) {
  const std::size_t d = uniform_width(samples, 2, "covariance_trace");
  const auto mean = column_means(samples, d);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double ss = 0.0;
    for (const auto& s : samples) {
      const double dev = s[j] - mean[j];
      ss += dev * dev;
    }
    total += ss;
  }
  return total / static_cast<double>(samples.size() - 1);
}

namespace {

using Matrix = std::vector<double>;  // d x d row-major

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> multiply(const Matrix& m, const std::vector<double>& v) {
  const std::size_t d = v.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += m[r * d + c] * v[c];
    out[r] = s;
  }
  return out;
}

void remove_component(std::vector<double>& v, const std::vector<double>& unit) {
  double c = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) c += v[j] * unit[j];
  for (std::size_t j = 0; j < v.size(); ++j) v[j] -= c * unit[j];
}

void fix_sign(std::vector<double>& v) {
  for (const double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0) {
        for (auto& y : v) y = -y;
      }
      return;
    }
  }
}

struct EigenPair {
  std::vector<double> vector;
  double value = 0.0;
  std::size_t iterations = 0;
};

// Dominant eigenpair of a symmetric PSD matrix, restricted to the complement of `exclude`.
EigenPair power_iteration(const Matrix& cov, std::size_t d, const std::vector<double>* exclude,
                          double negligible) {
  EigenPair result;
  std::vector<double> v(d);
  Rng rng = make_stream(0, "pca-start", exclude == nullptr ? 0 : 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& x : v) x = normal(rng);
  if (exclude != nullptr) remove_component(v, *exclude);
  double n = norm(v);
  for (auto& x : v) x /= n;

  for (std::size_t it = 1; it <= kPowerIterationMaxSteps; ++it) {
    auto w = multiply(cov, v);
    if (exclude != nullptr) remove_component(w, *exclude);
    n = norm(w);
    result.iterations = it;
    if (n <= negligible) {
      // Remaining spectrum is numerically zero; any unit vector in the complement will do.
      result.value = 0.0;
      result.vector = v;
      return result;
    }
    for (auto& x : w) x /= n;
    double delta = 0.0;
    for (std::size_t j = 0; j < d; ++j) delta += (w[j] - v[j]) * (w[j] - v[j]);
    v = std::move(w);
    if (std::sqrt(delta) < kPowerIterationTolerance) break;
  }
  const auto cv = multiply(cov, v);
  double rayleigh = 0.0;
  for (std::size_t j = 0; j < d; ++j) rayleigh += v[j] * cv[j];
  result.value = std::max(rayleigh, 0.0);
  result.vector = std::move(v);
  return result;
}

}  // namespace

Pca2d fit_pca_2d(const Samples& samples) {
  const std::size_t d = uniform_width(samples, 3, "pca_project_2d");
  if (d < 2) throw InvalidArgument("pca_project_2d needs at least two dimensions");
  Pca2d pca;
  pca.mean = column_means(samples, d);

  Matrix cov(d * d, 0.0);
  std::vector<double> centered(d);
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = s[j] - pca.mean[j];
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = r; c < d; ++c) cov[r * d + c] += centered[r] * centered[c];
    }
  }
  const double denom = static_cast<double>(samples.size() - 1);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r; c < d; ++c) {
      cov[r * d + c] /= denom;
      cov[c * d + r] = cov[r * d + c];
    }
  }
  double trace = 0.0;
  for (std::size_t j = 0; j < d; ++j) trace += cov[j * d + j];
  if (!(trace > 0.0)) throw InvalidArgument("pca_project_2d: all samples are identical");

  auto first = power_iteration(cov, d, nullptr, 0.0);
  // Deflate, then keep the iterate orthogonal to the first component.
  Matrix deflated = cov;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      deflated[r * d + c] -= first.value * first.vector[r] * first.vector[c];
    }
  }
  auto second = power_iteration(deflated, d, &first.vector, 1e-13 * trace);

  fix_sign(first.vector);
  fix_sign(second.vector);
  pca.components = {std::move(first.vector), std::move(second.vector)};
  pca.eigenvalues = {first.value, second.value};
  pca.iterations = {first.iterations, second.iterations};
  return pca;
}

std::vector<std::array<double, 2>> project_2d(const Pca2d& pca, const Samples& samples) {
  const std::size_t d = pca.mean.size();
  std::vector<std::array<double, 2>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.size() != d) throw DimensionError("project_2d: sample length differs from PCA fit");
    std::array<double, 2> p{0.0, 0.0};
    for (std::size_t j = 0; j < d; ++j) {
      const double c = s[j] - pca.mean[j];
      p[0] += c * pca.components[0][j];
      p[1] += c * pca.components[1][j];
    }
    out.push_back(p);
  }
  return out;
}

std::vector<std::array<double, 2>> pca_project_2d(const Samples& samples) {
  return project_2d(fit_pca_2d(samples), samples);
}

DiversityReport diversity_report(const std::vector<NamedSamples>& datasets,
                                 std::size_t sample_count, std::size_t scatter_cap) {
  if (datasets.empty()) throw InvalidArgument("diversity_report: no datasets given");
  if (sample_count < 2) throw InvalidArgument("diversity_report: sample_count must be >= 2");
  DiversityReport report;
  std::vector<Samples> used;
  Samples pooled;
  for (const auto& named : datasets) {
    const std::size_t n = std::min(sample_count, named.samples.size());
    Samples subset(named.samples.begin(), named.samples.begin() + static_cast<std::ptrdiff_t>(n));
    report.entries.push_back({named.name, n, named.samples.size() < sample_count,
                              covariance_trace(subset)});
    pooled.insert(pooled.end(), subset.begin(), subset.end());
    used.push_back(std::move(subset));
  }
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < report.entries.size(); ++j) {
      const auto& a = report.entries[i];
      const auto& b = report.entries[j];
      report.ratios.push_back({a.name, b.name, a.trace / b.trace});
    }
  }
  const auto pca = fit_pca_2d(pooled);
  for (std::size_t i = 0; i < used.size(); ++i) {
    const std::size_t n = scatter_cap == 0 ? used[i].size() : std::min(scatter_cap, used[i].size());
    Samples head(used[i].begin(), used[i].begin() + static_cast<std::ptrdiff_t>(n));
    for (const auto& p : project_2d(pca, head)) {
      report.scatter.push_back({datasets[i].name, p[0], p[1]});
    }
  }
  return report;
}

Samples clean_samples(const ParamDataset& dataset) {
  Samples out;
  out.reserve(dataset.size());
  const double to_raw = 1.0 / dataset.normalization;
  for (const auto& pair : dataset.pairs) {
    auto v = pair.clean;
    if (dataset.normalization != 1.0) {
      for (auto& x : v) x = dataset.normalization == kShapeNormalization
                                ? x * kShapeNormalizationDivisor
                                : x * to_raw;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "sigma,input_mse,output_mse\n";
  auto it = std::back_inserter(out);
  for (const auto& p : sweep.points) {
    fmt::format_to(it, "{:.17g},{:.17g},{:.17g}\n", p.sigma, p.input_mse, p.output_mse);
  }
  return out;
}

std::string scatter_csv(const DiversityReport& report) {
  std::string out = "dataset,pc1,pc2\n";
  auto it = std::back_inserter(out);
  for (const auto& row : report.scatter) {
    fmt::format_to(it, "{},{:.17g},{:.17g}\n", row.dataset, row.pc1, row.pc2);
  }
  return out;
}

}  // namespace face_manifold
