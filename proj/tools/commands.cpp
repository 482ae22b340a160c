#include "commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>

#include "face_manifold/autoencoder.hpp"
#include "face_manifold/dataset.hpp"
#include "face_manifold/errors.hpp"
#include "face_manifold/evaluator.hpp"
#include "face_manifold/morphable_model.hpp"
#include "face_manifold/parallel.hpp"
#include "face_manifold/trainer.hpp"

namespace face_manifold::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Raised for flag combinations CLI11 validators cannot express.
struct UsageError : InvalidArgument {
  using InvalidArgument::InvalidArgument;
};

struct Manifest {
  std::string subcommand;
  Json config = Json::object();
  Json paths = Json::object();
  std::uint64_t seed = 0;

  Json to_json() const {
    return Json{{"subcommand", subcommand},
                {"config", config},
                {"paths", paths},
                {"seed", seed},
                {"version", version()}};
  }
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(fmt::format("cannot open {} for writing", path.string()));
  f << text;
  if (!f.flush()) throw Error(fmt::format("write to {} failed", path.string()));
}

void write_json(const fs::path& path, const Json& json) { write_text(path, json.dump(2) + "\n"); }

ParamGroup group_flag(const std::string& text) {
  try {
    return parse_param_group(text);
  } catch (const InvalidArgument&) {
    throw UsageError(fmt::format("--group must be shape or expression, got '{}'", text));
  }
}

// Training noise level (raw units) when --sigma is not given.
double default_sigma(ParamGroup group) { return group == ParamGroup::identity ? 5e5 : 2.0; }

// Networks see identity data divided by 1e5; raw identity inputs are scaled on the way in and out.
std::vector<std::vector<double>> denoise_raw(const AutoencoderWeights& weights,
                                             const ParamDataset& data, unsigned threads) {
  const bool scale = data.group == ParamGroup::identity && data.normalization == 1.0;
  std::vector<std::vector<double>> inputs;
  inputs.reserve(data.size());
  for (const auto& p : data.pairs) {
    inputs.push_back(p.noisy);
    if (scale)
      for (auto& v : inputs.back()) v /= kShapeNormalizationDivisor;
  }
  auto out = denoise_batch(weights, inputs, threads);
  if (scale)
    for (auto& row : out)
      for (auto& v : row) v *= kShapeNormalizationDivisor;
  return out;
}

// One clean vector per clean-sample group, in raw units.
Samples distinct_clean(const ParamDataset& data) {
  const auto all = clean_samples(data);
  const auto groups = clean_groups(data);
  Samples out;
  for (std::size_t g = 0; g + 1 < groups.size(); ++g) out.push_back(all[groups[g]]);
  return out;
}

// ---------------------------------------------------------------- make-model

struct MakeModelOptions {
  std::uint32_t vertices = 642;
  std::uint32_t p_id = 199;
  std::uint32_t p_exp = 29;
  double decay = 0.8;
  std::uint64_t seed = 0;
  std::string out;
};

void add_make_model(CLI::App& app, MakeModelOptions& o) {
  auto* c = app.add_subcommand("make-model", "Write a procedural morphable model (.fmm)");
  c->add_option("--vertices", o.vertices, "Vertex count (10*4^s+2)")->capture_default_str();
  c->add_option("--p-id", o.p_id, "Identity parameter count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--p-exp", o.p_exp, "Expression parameter count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--decay", o.decay, "Geometric scale decay in (0, 1]")
      ->check(CLI::Range(1e-300, 1.0))
      ->capture_default_str();
  c->add_option("--seed", o.seed)->capture_default_str();
  c->add_option("--out", o.out, "Output .fmm path")->required();
}

void run_make_model(const MakeModelOptions& o, std::ostream& out) {
  if (!is_icosphere_vertex_count(o.vertices))
    throw UsageError(fmt::format("--vertices {} is not of the form 10*4^s+2", o.vertices));
  const auto model = make_toy_model(o.vertices, o.p_id, o.p_exp, o.decay, o.seed);
  save_model(model, o.out);
  fmt::print(out, "wrote {} ({} vertices, {} identity, {} expression parameters)\n", o.out,
             o.vertices, o.p_id, o.p_exp);
}

// -------------------------------------------------------------- make-dataset

struct MakeDatasetOptions {
  std::string model;
  std::string group = "expression";
  std::uint32_t count = 400;
  std::optional<double> sigma;
  std::uint32_t copies = 50;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string train_out;
  std::string test_out;
  unsigned threads = 0;
};

void add_make_dataset(CLI::App& app, MakeDatasetOptions& o) {
  auto* c = app.add_subcommand("make-dataset", "Sample, corrupt and split a pair dataset (.fds)");
  c->add_option("--model", o.model, "Input .fmm")->required();
  c->add_option("--group", o.group, "shape or expression")->capture_default_str();
  c->add_option("--count", o.count, "Clean samples")->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--sigma", o.sigma, "Noise std in raw units (default 500000 shape, 2 expression)")
      ->check(CLI::PositiveNumber);
  c->add_option("--copies", o.copies, "Noisy versions per clean sample")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--test-fraction", o.test_fraction, "Share of clean samples held out")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c->add_option("--seed", o.seed)->capture_default_str();
  c->add_option("--train-out", o.train_out)->required();
  c->add_option("--test-out", o.test_out)->required();
  c->add_option("--threads", o.threads, "Worker threads (0: FACE_MANIFOLD_THREADS or 1)");
}

void run_make_dataset(const MakeDatasetOptions& o, std::ostream& out) {
  const auto group = group_flag(o.group);
  if (o.test_fraction <= 0.0 || o.test_fraction >= 1.0)
    throw UsageError("--test-fraction must lie strictly between 0 and 1");
  if (o.count < 2) throw UsageError("--count must be at least 2 to leave a test split");
  const auto model = load_model(o.model);
  const auto clean = sample_clean_set(model, group, o.count, o.seed);
  const CorruptionConfig cfg{o.sigma.value_or(default_sigma(group)), o.copies, o.seed};
  auto data = build_dataset(group, clean, cfg, resolve_threads(o.threads));
  if (group == ParamGroup::identity) data = normalize_shape(std::move(data));
  const auto [train_set, test_set] = split(data, o.test_fraction, o.seed);
  save_dataset(train_set, o.train_out);
  save_dataset(test_set, o.test_out);
  fmt::print(out, "{} pairs: {} train -> {}, {} test -> {}\n", data.size(), train_set.size(),
             o.train_out, test_set.size(), o.test_out);
}

// --------------------------------------------------------------------- train

struct TrainOptions {
  std::string train;
  std::string test;
  std::string out;
  std::string metrics;
  std::string timing;
  TrainConfig config;
};

void add_train(CLI::App& app, TrainOptions& o) {
  auto* c = app.add_subcommand("train", "Train a denoising autoencoder (.fwt + metrics JSON)");
  c->add_option("--train", o.train, "Training .fds")->required();
  c->add_option("--test", o.test, "Held-out .fds")->required();
  c->add_option("--out", o.out, "Output .fwt")->required();
  c->add_option("--metrics", o.metrics, "Metrics JSON (losses per epoch)")->required();
  c->add_option("--timing", o.timing, "Optional JSON with wall-clock seconds per epoch");
  c->add_option("--epochs", o.config.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--lr", o.config.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--batch", o.config.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--seed", o.config.seed)->capture_default_str();
  c->add_option("--threads", o.config.threads, "Worker threads (0: FACE_MANIFOLD_THREADS or 1)");
}

void run_train(const TrainOptions& o, std::ostream& out) {
  const auto train_set = load_dataset(o.train);
  const auto test_set = load_dataset(o.test);
  const auto spec = AutoencoderSpec::build(train_set.param_count);
  const auto result = train(spec, train_set, test_set, o.config,
                            [&](std::size_t epoch, const TrainHistory& h) {
                              fmt::print(out, "epoch {:>3}  train {:.6g}  test {:.6g}  ({:.1f} s)\n",
                                         epoch + 1, h.train_loss.back(), h.test_loss.back(),
                                         h.seconds.back());
                              out.flush();
                            });
  save_weights(result.weights, o.out);

  Manifest m{"train"};
  m.config = Json{{"epochs", o.config.epochs},
                  {"learning_rate", o.config.learning_rate},
                  {"batch_size", o.config.batch_size}};
  m.paths = Json{{"train", o.train}, {"test", o.test}, {"out", o.out}, {"metrics", o.metrics}};
  m.seed = o.config.seed;
  const auto final_test = evaluate_mse(result.weights, test_set, o.config.threads);
  write_json(o.metrics, Json{{"manifest", m.to_json()},
                             {"group", to_string(train_set.group)},
                             {"train_pairs", train_set.size()},
                             {"test_pairs", test_set.size()},
                             {"train_loss", result.history.train_loss},
                             {"test_loss", result.history.test_loss},
                             {"test_output_mse", final_test.output_mse},
                             {"test_input_mse", final_test.input_mse}});
  if (!o.timing.empty()) write_json(o.timing, Json{{"seconds", result.history.seconds}});
  fmt::print(out, "test output MSE {:.6g} (input {:.6g}); wrote {} and {}\n", final_test.output_mse,
             final_test.input_mse, o.out, o.metrics);
}

// ------------------------------------------------------------------ generate

struct GenerateOptions {
  std::string model;
  std::string shape_weights;
  std::string exp_weights;
  std::uint32_t count = 2000;
  double k_shape = kDefaultShapeInterval;
  double k_exp = kDefaultExpressionInterval;
  std::uint64_t seed = 0;
  std::string shape_out;
  std::string exp_out;
  std::uint32_t export_obj = 0;
  std::string obj_dir = "obj";
  unsigned threads = 0;
};

void add_generate(CLI::App& app, GenerateOptions& o) {
  auto* c = app.add_subcommand("generate", "Denoise uniform draws into a synthetic dataset");
  c->add_option("--model", o.model)->required();
  c->add_option("--shape-weights", o.shape_weights)->required();
  c->add_option("--exp-weights", o.exp_weights)->required();
  c->add_option("--count", o.count, "Samples per group")->capture_default_str();
  c->add_option("--k-shape", o.k_shape, "Uniform half-width in identity scales")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--k-exp", o.k_exp, "Uniform half-width in expression scales")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--seed", o.seed)->capture_default_str();
  c->add_option("--shape-out", o.shape_out, "Output .fds, pairs are (denoised, raw)")->required();
  c->add_option("--exp-out", o.exp_out)->required();
  c->add_option("--export-obj", o.export_obj, "Write meshes for the first n faces")
      ->capture_default_str();
  c->add_option("--obj-dir", o.obj_dir)->capture_default_str();
  c->add_option("--threads", o.threads, "Worker threads (0: FACE_MANIFOLD_THREADS or 1)");
}

void run_generate(const GenerateOptions& o, std::ostream& out) {
  if (o.export_obj > o.count) throw UsageError("--export-obj cannot exceed --count");
  const auto model = load_model(o.model);
  const auto shape_w = load_weights(o.shape_weights, model.param_count(ParamGroup::identity));
  const auto exp_w = load_weights(o.exp_weights, model.param_count(ParamGroup::expression));
  const auto sets = generate_synthetic(model, &shape_w, &exp_w, o.count, o.k_shape, o.k_exp,
                                       o.seed, o.threads);
  save_dataset(sets.shape, o.shape_out);
  save_dataset(sets.expression, o.exp_out);

  const ParamVector zero_id{ParamGroup::identity,
                            std::vector<double>(model.param_count(ParamGroup::identity), 0.0)};
  const ParamVector zero_exp{ParamGroup::expression,
                             std::vector<double>(model.param_count(ParamGroup::expression), 0.0)};
  const fs::path dir(o.obj_dir);
  for (std::uint32_t i = 0; i < o.export_obj; ++i) {
    const auto& s = sets.shape.pairs[i];
    const auto& e = sets.expression.pairs[i];
    auto mesh = [&](const ParamVector& id, const ParamVector& exp) {
      return export_obj(synthesize_face(model, id, exp));
    };
    write_text(dir / fmt::format("face_{:04}_shape_noisy.obj", i),
               mesh({ParamGroup::identity, s.noisy}, zero_exp));
    write_text(dir / fmt::format("face_{:04}_shape_denoised.obj", i),
               mesh({ParamGroup::identity, s.clean}, zero_exp));
    write_text(dir / fmt::format("face_{:04}_exp_noisy.obj", i),
               mesh(zero_id, {ParamGroup::expression, e.noisy}));
    write_text(dir / fmt::format("face_{:04}_exp_denoised.obj", i),
               mesh(zero_id, {ParamGroup::expression, e.clean}));
  }
  fmt::print(out, "{} shape and {} expression pairs written; {} OBJ files\n", sets.shape.size(),
             sets.expression.size(), 4 * o.export_obj);
}

// ------------------------------------------------------------------ evaluate

struct EvaluateOptions {
  std::string sweep;
  std::string weights;
  std::string clean;
  std::optional<double> sigma;
  std::uint32_t sweep_points = 9;
  std::uint32_t sweep_copies = 10;
  std::vector<std::string> datasets;
  std::string diversity;
  std::string scatter;
  std::uint32_t samples = 2000;
  std::uint32_t scatter_cap = 70;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

void add_evaluate(CLI::App& app, EvaluateOptions& o) {
  auto* c = app.add_subcommand("evaluate", "Noise sweep, diversity traces and PCA scatter");
  c->add_option("--sweep", o.sweep, "Output CSV: sigma,input_mse,output_mse");
  c->add_option("--weights", o.weights, "Network for --sweep");
  c->add_option("--clean", o.clean, ".fds whose clean vectors seed the sweep");
  c->add_option("--sigma", o.sigma, "Training noise std (sweep spans sigma/4..4 sigma)")
      ->check(CLI::PositiveNumber);
  c->add_option("--sweep-points", o.sweep_points)->check(CLI::Range(2u, 1000u))->capture_default_str();
  c->add_option("--sweep-copies", o.sweep_copies)->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--dataset", o.datasets,
                "NAME=PATH or NAME@noisy=PATH; clean side unless @noisy (repeatable)");
  c->add_option("--diversity", o.diversity, "Output JSON with traces and ratios");
  c->add_option("--scatter", o.scatter, "Output CSV: dataset,pc1,pc2");
  c->add_option("--samples", o.samples, "Samples per dataset for traces")
      ->check(CLI::Range(2u, 100000000u))
      ->capture_default_str();
  c->add_option("--scatter-cap", o.scatter_cap, "Scatter rows per dataset (0: all)")
      ->capture_default_str();
  c->add_option("--seed", o.seed, "Corruption seed for --sweep")->capture_default_str();
  c->add_option("--threads", o.threads, "Worker threads (0: FACE_MANIFOLD_THREADS or 1)");
}

NamedSamples load_named(const std::string& flag) {
  const auto eq = flag.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == flag.size())
    throw UsageError(fmt::format("--dataset expects NAME=PATH, got '{}'", flag));
  std::string name = flag.substr(0, eq);
  const std::string path = flag.substr(eq + 1);
  bool noisy = false;
  if (const auto at = name.find('@'); at != std::string::npos) {
    const auto side = name.substr(at + 1);
    if (side != "noisy" && side != "clean")
      throw UsageError(fmt::format("--dataset side must be clean or noisy, got '{}'", side));
    noisy = side == "noisy";
    name.resize(at);
  }
  auto data = load_dataset(path);
  if (noisy)
    for (auto& p : data.pairs) std::swap(p.clean, p.noisy);
  return {name, clean_samples(data)};
}

void run_evaluate(const EvaluateOptions& o, std::ostream& out) {
  if (o.sweep.empty() && o.diversity.empty() && o.scatter.empty())
    throw UsageError("evaluate needs at least one of --sweep, --diversity, --scatter");

  if (!o.sweep.empty()) {
    if (o.weights.empty() || o.clean.empty())
      throw UsageError("--sweep needs --weights and --clean");
    const auto data = load_dataset(o.clean);
    const auto weights = load_weights(o.weights, data.param_count);
    const auto sigmas = default_sweep_sigmas(o.sigma.value_or(default_sigma(data.group)), o.sweep_points);
    const auto sweep = noise_sweep(weights, data.group, distinct_clean(data), sigmas, o.sweep_copies,
                                   o.seed, o.threads);
    write_text(o.sweep, sweep_csv(sweep));
    fmt::print(out, "sweep: {} sigmas -> {}\n", sweep.points.size(), o.sweep);
  }

  if (!o.diversity.empty() || !o.scatter.empty()) {
    if (o.datasets.empty()) throw UsageError("--diversity/--scatter need at least one --dataset");
    std::vector<NamedSamples> named;
    for (const auto& d : o.datasets) named.push_back(load_named(d));
    const auto report = diversity_report(named, o.samples, o.scatter_cap);
    if (!o.diversity.empty()) {
      Manifest m{"evaluate"};
      m.config = Json{{"samples", o.samples}, {"scatter_cap", o.scatter_cap}};
      m.paths = Json{{"datasets", o.datasets}, {"diversity", o.diversity}};
      if (!o.scatter.empty()) m.paths["scatter"] = o.scatter;
      m.seed = o.seed;
      Json entries = Json::array();
      for (const auto& e : report.entries)
        entries.push_back({{"name", e.name},
                           {"samples_used", e.samples_used},
                           {"short_of_requested", e.short_of_requested},
                           {"trace", e.trace}});
      Json ratios = Json::array();
      for (const auto& r : report.ratios)
        ratios.push_back({{"numerator", r.numerator}, {"denominator", r.denominator}, {"ratio", r.ratio}});
      write_json(o.diversity, Json{{"manifest", m.to_json()}, {"traces", entries}, {"ratios", ratios}});
      for (const auto& e : report.entries)
        fmt::print(out, "trace {:<24} {:.6g} over {} samples\n", e.name, e.trace, e.samples_used);
    }
    if (!o.scatter.empty()) {
      write_text(o.scatter, scatter_csv(report));
      fmt::print(out, "scatter: {} rows -> {}\n", report.scatter.size(), o.scatter);
    }
  }
}

// ------------------------------------------------------------------- denoise

struct DenoiseOptions {
  std::string weights;
  std::string in;
  std::string out;
  unsigned threads = 0;
};

void add_denoise(CLI::App& app, DenoiseOptions& o) {
  auto* c = app.add_subcommand("denoise", "Run a network over the noisy side of a .fds");
  c->add_option("--weights", o.weights)->required();
  c->add_option("--in", o.in)->required();
  c->add_option("--out", o.out, "Output .fds, pairs are (denoised, input)")->required();
  c->add_option("--threads", o.threads, "Worker threads (0: FACE_MANIFOLD_THREADS or 1)");
}

void run_denoise(const DenoiseOptions& o, std::ostream& out) {
  auto data = load_dataset(o.in);
  const auto weights = load_weights(o.weights, data.param_count);
  auto denoised = denoise_raw(weights, data, o.threads);
  for (std::size_t i = 0; i < data.size(); ++i) data.pairs[i].clean = std::move(denoised[i]);
  save_dataset(data, o.out);
  fmt::print(out, "denoised {} vectors -> {}\n", data.size(), o.out);
}

}  // namespace

const char* version() { return FACE_MANIFOLD_VERSION; }

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn and sample the face-parameter manifold with a denoising autoencoder",
               "face_manifold"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  MakeModelOptions make_model;
  MakeDatasetOptions make_dataset;
  TrainOptions train_opts;
  GenerateOptions generate;
  EvaluateOptions evaluate;
  DenoiseOptions denoise;
  add_make_model(app, make_model);
  add_make_dataset(app, make_dataset);
  add_train(app, train_opts);
  add_generate(app, generate);
  add_evaluate(app, evaluate);
  add_denoise(app, denoise);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsageError;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const auto name = sub->get_name();
    if (name == "make-model") run_make_model(make_model, out);
    else if (name == "make-dataset") run_make_dataset(make_dataset, out);
    else if (name == "train") run_train(train_opts, out);
    else if (name == "generate") run_generate(generate, out);
    else if (name == "evaluate") run_evaluate(evaluate, out);
    else if (name == "denoise") run_denoise(denoise, out);
    return kExitOk;
  } catch (const UsageError& e) {
    fmt::print(err, "usage error: {}\n", e.what());
    return kExitUsageError;
  } catch (const InvalidArgument& e) {
    fmt::print(err, "invalid argument: {}\n", e.what());
    return kExitUsageError;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitRuntimeError;
  }
}

}  // namespace face_manifold::cli
