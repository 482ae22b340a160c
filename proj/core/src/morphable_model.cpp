#include "face_manifold/morphable_model.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <utility>

#include "binary_io.hpp"
#include "face_manifold/errors.hpp"

namespace face_manifold {

std::string_view to_string(ParamGroup group) {
  return group == ParamGroup::identity ? "identity" : "expression";
}

ParamGroup parse_param_group(std::string_view text) {
  if (text == "identity" || text == "shape" || text == "id") return ParamGroup::identity;
  if (text == "expression" || text == "exp") return ParamGroup::expression;
  throw InvalidArgument(fmt::format("unknown parameter group '{}'", text));
}

std::span<const double> MorphableModel::basis_row(ParamGroup group, std::size_t row) const {
  const auto& basis = group == ParamGroup::identity ? id_basis : exp_basis;
  const std::size_t width = coordinate_count();
  return std::span<const double>(basis).subspan(row * width, width);
}

void MorphableModel::validate() const {
  const std::size_t width = coordinate_count();
  if (vertex_count == 0) throw DimensionError("model has no vertices");
  if (mean.size() != width) {
    throw DimensionError(fmt::format("mean has {} entries, expected {}", mean.size(), width));
  }
  if (id_basis.size() != id_scale.size() * width) {
    throw DimensionError(fmt::format("identity basis has {} entries, expected {} x {}",
                                     id_basis.size(), id_scale.size(), width));
  }
  if (exp_basis.size() != exp_scale.size() * width) {
    throw DimensionError(fmt::format("expression basis has {} entries, expected {} x {}",
                                     exp_basis.size(), exp_scale.size(), width));
  }
  auto all_finite = [](const std::vector<double>& v) {
    for (const double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  if (!all_finite(mean) || !all_finite(id_basis) || !all_finite(exp_basis) ||
      !all_finite(id_scale) || !all_finite(exp_scale)) {
    throw InvalidArgument("model contains non-finite values");
  }
  for (const auto* scales : {&id_scale, &exp_scale}) {
    for (const double s : *scales) {
      if (!(s > 0.0)) throw InvalidArgument("model scales must be strictly positive");
    }
  }
  for (const auto& tri : triangles) {
    for (const auto index : tri) {
      if (index >= vertex_count) {
        throw InvalidArgument(
            fmt::format("triangle index {} out of range [0, {})", index, vertex_count));
      }
    }
  }
}

FaceMesh synthesize_face(const MorphableModel& model, const ParamVector& id,
                         const ParamVector& exp) {
  if (id.group != ParamGroup::identity || exp.group != ParamGroup::expression) {
    throw InvalidArgument("synthesize_face expects (identity, expression) parameter vectors");
  }
  if (id.values.size() != model.id_scale.size() || exp.values.size() != model.exp_scale.size()) {
    throw DimensionError(fmt::format(
        "parameter lengths (id {}, exp {}) do not match model (id {}, exp {})", id.values.size(),
        exp.values.size(), model.id_scale.size(), model.exp_scale.size()));
  }
  FaceMesh mesh{model.mean, model.triangles};
  auto accumulate = [&](ParamGroup group, const std::vector<double>& coeffs) {
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const double c = coeffs[k];
      if (c == 0.0) continue;
      const auto row = model.basis_row(group, k);
      for (std::size_t j = 0; j < row.size(); ++j) mesh.positions[j] += c * row[j];
    }
  };
  accumulate(ParamGroup::identity, id.values);
  accumulate(ParamGroup::expression, exp.values);
  return mesh;
}

ParamVector sample_normal(const MorphableModel& model, ParamGroup group, Rng& rng) {
  const auto scale = model.scale(group);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector out{group, std::vector<double>(scale.size())};
  for (std::size_t i = 0; i < scale.size(); ++i) out.values[i] = scale[i] * normal(rng);
  return out;
}

ParamVector sample_normal(const MorphableModel& model, ParamGroup group, std::uint64_t seed) {
  Rng rng = make_stream(seed, "sample-normal", static_cast<std::uint64_t>(group));
  return sample_normal(model, group, rng);
}

ParamVector sample_uniform(const MorphableModel& model, ParamGroup group, double k, Rng& rng) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw InvalidArgument(fmt::format("uniform interval multiplier must be positive, got {}", k));
  }
  const auto scale = model.scale(group);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ParamVector out{group, std::vector<double>(scale.size())};
  for (std::size_t i = 0; i < scale.size(); ++i) out.values[i] = k * scale[i] * unit(rng);
  return out;
}

ParamVector sample_uniform(const MorphableModel& model, ParamGroup group, double k,
                           std::uint64_t seed) {
  Rng rng = make_stream(seed, "sample-uniform", static_cast<std::uint64_t>(group));
  return sample_uniform(model, group, k, rng);
}

// ---------------------------------------------------------------------------
// Procedural model

bool is_icosphere_vertex_count(std::uint32_t vertex_count) {
  for (std::uint64_t v = 12; v <= vertex_count; v = 4 * (v - 2) + 2) {
    if (v == vertex_count) return true;
  }
  return false;
}

namespace {

struct Icosphere {
  std::vector<std::array<double, 3>> vertices;
  std::vector<Triangle> faces;
};

Icosphere make_icosphere(std::uint32_t subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Icosphere s;
  s.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  auto project = [](std::array<double, 3>& p) {
    const double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    for (auto& c : p) c /= n;
  };
  for (auto& p : s.vertices) project(p);

  for (std::uint32_t level = 0; level < subdivisions; ++level) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoints;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
      std::array<double, 3> m{};
      for (int c = 0; c < 3; ++c) m[c] = 0.5 * (s.vertices[a][c] + s.vertices[b][c]);
      project(m);
      const auto index = static_cast<std::uint32_t>(s.vertices.size());
      s.vertices.push_back(m);
      midpoints.emplace(key, index);
      return index;
    };
    std::vector<Triangle> next;
    next.reserve(s.faces.size() * 4);
    for (const auto& f : s.faces) {
      const auto ab = midpoint(f[0], f[1]);
      const auto bc = midpoint(f[1], f[2]);
      const auto ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.faces = std::move(next);
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Sum of a few random plane waves per coordinate. Later rows get higher
// frequencies, mirroring PCA bases where trailing components carry finer detail.
std::vector<double> smooth_random_field(const Icosphere& sphere, double frequency, Rng& rng) {
  constexpr int kWavesPerAxis = 3;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> field(3 * sphere.vertices.size(), 0.0);
  for (int axis = 0; axis < 3; ++axis) {
    for (int w = 0; w < kWavesPerAxis; ++w) {
      std::array<double, 3> dir{normal(rng), normal(rng), normal(rng)};
      const double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
      const double amplitude = normal(rng);
      const double phi = phase(rng);
      for (std::size_t v = 0; v < sphere.vertices.size(); ++v) {
        const auto& p = sphere.vertices[v];
        const double proj = (dir[0] * p[0] + dir[1] * p[1] + dir[2] * p[2]) / n;
        field[3 * v + axis] += amplitude * std::sin(frequency * proj + phi);
      }
    }
  }
  return field;
}

// Rows of an orthogonal basis, each with Euclidean norm `row_norm`.
std::vector<double> orthogonal_basis(const Icosphere& sphere, std::uint32_t rows,
                                     double row_norm, std::uint64_t seed,
                                     std::string_view tag) {
  const std::size_t width = 3 * sphere.vertices.size();
  std::vector<double> basis(rows * width);
  for (std::uint32_t r = 0; r < rows; ++r) {
    const double frequency = 1.0 + 6.0 * r / std::max<std::uint32_t>(1, rows - 1);
    std::span<double> row(basis.data() + r * width, width);
    bool accepted = false;
    for (std::uint64_t attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Rng rng = make_stream(seed, tag, r, attempt);
      auto field = smooth_random_field(sphere, frequency, rng);
      const double original = std::sqrt(dot(field, field));
      // Modified Gram-Schmidt, run twice for orthogonality at rounding level.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::uint32_t q = 0; q < r; ++q) {
          std::span<const double> prev(basis.data() + q * width, width);
          const double c = dot(field, prev) / (row_norm * row_norm);
          for (std::size_t j = 0; j < width; ++j) field[j] -= c * prev[j];
        }
      }
      const double residual = std::sqrt(dot(field, field));
      if (residual > 1e-6 * original) {
        for (std::size_t j = 0; j < width; ++j) row[j] = field[j] * (row_norm / residual);
        accepted = true;
      }
    }
    if (!accepted) {
      throw InvalidArgument(
          fmt::format("could not build {} independent basis rows on {} vertices", rows,
                      sphere.vertices.size()));
    }
  }
  return basis;
}

}  // namespace

MorphableModel make_toy_model(std::uint32_t vertex_count, std::uint32_t p_id,
                              std::uint32_t p_exp, double scale_decay, std::uint64_t seed) {
  if (vertex_count < 4 || !is_icosphere_vertex_count(vertex_count)) {
    throw InvalidArgument(fmt::format(
        "vertex count {} is not reachable by icosphere subdivision (10*4^s+2: 12, 42, 162, "
        "642, 2562, ...)",
        vertex_count));
  }
  if (p_id < 1 || p_exp < 1) {
    throw InvalidArgument(
        fmt::format("parameter counts must be >= 1 (p_id={}, p_exp={})", p_id, p_exp));
  }
  if (std::uint64_t{p_id} > 3ULL * vertex_count || std::uint64_t{p_exp} > 3ULL * vertex_count) {
    throw InvalidArgument(fmt::format("{} vertices support at most {} orthogonal basis rows",
                                      vertex_count, 3ULL * vertex_count));
  }
  if (!(scale_decay > 0.0 && scale_decay <= 1.0)) {
    throw InvalidArgument(fmt::format("scale decay must lie in (0, 1], got {}", scale_decay));
  }

  std::uint32_t subdivisions = 0;
  for (std::uint64_t v = 12; v < vertex_count; v = 4 * (v - 2) + 2) ++subdivisions;
  const Icosphere sphere = make_icosphere(subdivisions);

  MorphableModel model;
  model.vertex_count = vertex_count;
  model.mean.reserve(3 * std::size_t{vertex_count});
  for (const auto& p : sphere.vertices) model.mean.insert(model.mean.end(), p.begin(), p.end());
  model.triangles = sphere.faces;

  auto scales = [&](std::uint32_t count, double scale0) {
    std::vector<double> s(count);
    double value = scale0;
    for (auto& x : s) {
      x = value;
      value *= scale_decay;
    }
    return s;
  };
  model.id_scale = scales(p_id, kToyIdentityScale0);
  model.exp_scale = scales(p_exp, kToyExpressionScale0);

  const double sqrt_n = std::sqrt(static_cast<double>(vertex_count));
  model.id_basis = orthogonal_basis(sphere, p_id, kToyDisplacementPerSigma * sqrt_n /
                                                      kToyIdentityScale0,
                                    seed, "toy-identity-basis");
  model.exp_basis = orthogonal_basis(sphere, p_exp, kToyDisplacementPerSigma * sqrt_n /
                                                        kToyExpressionScale0,
                                     seed, "toy-expression-basis");
  return model;
}

// ---------------------------------------------------------------------------
// .fmm serialization

std::string serialize_model(const MorphableModel& model) {
  model.validate();
  detail::BinaryWriter w;
  w.magic("FMM1");
  w.put<std::uint32_t>(model.vertex_count);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.id_scale.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.exp_scale.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.triangles.size()));
  w.put_array<double>(model.mean);
  w.put_array<double>(model.id_basis);
  w.put_array<double>(model.exp_basis);
  w.put_array<double>(model.id_scale);
  w.put_array<double>(model.exp_scale);
  for (const auto& tri : model.triangles) w.put_array<std::uint32_t>(tri);
  return w.bytes();
}

MorphableModel deserialize_model(std::string bytes) {
  detail::BinaryReader r(std::move(bytes), "model");
  r.expect_magic("FMM1");
  MorphableModel m;
  m.vertex_count = r.get<std::uint32_t>("header.N");
  const auto p_id = r.get<std::uint32_t>("header.P_id");
  const auto p_exp = r.get<std::uint32_t>("header.P_exp");
  const auto t = r.get<std::uint32_t>("header.T");

  const std::uint64_t width = 3ULL * m.vertex_count;
  constexpr std::uint64_t kMaxEntries = std::numeric_limits<std::uint64_t>::max() / 8;
  if (p_id != 0 && width > kMaxEntries / p_id) throw DimensionError("model: identity basis size overflows");
  if (p_exp != 0 && width > kMaxEntries / p_exp) throw DimensionError("model: expression basis size overflows");

  m.mean = r.get_array<double>(width, "mean");
  m.id_basis = r.get_array<double>(width * p_id, "id_basis");
  m.exp_basis = r.get_array<double>(width * p_exp, "exp_basis");
  m.id_scale = r.get_array<double>(p_id, "id_scale");
  m.exp_scale = r.get_array<double>(p_exp, "exp_scale");
  const auto flat = r.get_array<std::uint32_t>(3ULL * t, "triangles");
  m.triangles.resize(t);
  for (std::size_t i = 0; i < t; ++i) m.triangles[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  r.expect_end();
  m.validate();
  return m;
}

void save_model(const MorphableModel& model, const std::filesystem::path& path) {
  detail::write_file(path, serialize_model(model));
}

MorphableModel load_model(const std::filesystem::path& path) {
  return deserialize_model(detail::read_file(path, "model"));
}

// ---------------------------------------------------------------------------

std::string export_obj(const FaceMesh& mesh) {
  std::string out;
  out.reserve(mesh.positions.size() * 12 + mesh.triangles.size() * 16);
  auto it = std::back_inserter(out);
  for (std::size_t v = 0; v + 2 < mesh.positions.size(); v += 3) {
    fmt::format_to(it, "v {:.6f} {:.6f} {:.6f}\n", mesh.positions[v], mesh.positions[v + 1],
                   mesh.positions[v + 2]);
  }
  for (const auto& f : mesh.triangles) {
    fmt::format_to(it, "f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  }
  return out;
}

}  // namespace face_manifold
