#pragma once

// Linear 3D morphable face model: S = mean + id . A_id + exp . A_exp.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "face_manifold/rng.hpp"

namespace face_manifold {

enum class ParamGroup : std::uint8_t { identity = 0, expression = 1 };

std::string_view to_string(ParamGroup group);
/// Parses "identity"/"shape" or "expression"/"exp"; throws InvalidArgument otherwise.
ParamGroup parse_param_group(std::string_view text);

using Triangle = std::array<std::uint32_t, 3>;

/// Mean face, identity/expression bases (row-major, one row of 3N entries per
/// parameter) and per-parameter scales. Scales are standard deviations: they
/// set both the Gaussian spread and the half-width unit of uniform sampling.
struct MorphableModel {
  std::uint32_t vertex_count = 0;
  std::vector<double> mean;       // 3N, x,y,z per vertex
  std::vector<double> id_basis;   // P_id x 3N
  std::vector<double> exp_basis;  // P_exp x 3N
  std::vector<double> id_scale;   // P_id
  std::vector<double> exp_scale;  // P_exp
  std::vector<Triangle> triangles;

  std::size_t coordinate_count() const { return 3 * std::size_t{vertex_count}; }
  std::size_t param_count(ParamGroup group) const {
    return group == ParamGroup::identity ? id_scale.size() : exp_scale.size();
  }
  std::span<const double> scale(ParamGroup group) const {
    return group == ParamGroup::identity ? id_scale : exp_scale;
  }
  std::span<const double> basis_row(ParamGroup group, std::size_t row) const;

  /// Checks sizes, finiteness, positive scales and triangle indices.
  void validate() const;

  friend bool operator==(const MorphableModel&, const MorphableModel&) = default;
};

struct ParamVector {
  ParamGroup group = ParamGroup::expression;
  std::vector<double> values;
};

struct FaceMesh {
  std::vector<double> positions;  // 3N
  std::vector<Triangle> triangles;

  std::size_t vertex_count() const { return positions.size() / 3; }
};

FaceMesh synthesize_face(const MorphableModel& model, const ParamVector& id,
                         const ParamVector& exp);

/// values[i] = scale[i] * z_i with z_i ~ N(0, 1).
ParamVector sample_normal(const MorphableModel& model, ParamGroup group, Rng& rng);
ParamVector sample_normal(const MorphableModel& model, ParamGroup group, std::uint64_t seed);

/// values[i] ~ Uniform(-k * scale[i], k * scale[i]); k must be positive.
ParamVector sample_uniform(const MorphableModel& model, ParamGroup group, double k, Rng& rng);
ParamVector sample_uniform(const MorphableModel& model, ParamGroup group, double k,
                           std::uint64_t seed);

// Leading scales of the procedural model. Expression coefficients live in O(1)
// units; identity coefficients mimic the ~1e5 magnitudes of fitted face-model coefficients.
inline constexpr double kToyExpressionScale0 = 2.0;
inline constexpr double kToyIdentityScale0 = 2.0e5;
// RMS per-vertex displacement (unit-sphere radii) produced by a one-sigma coefficient.
inline constexpr double kToyDisplacementPerSigma = 0.05;

/// Vertex counts an icosphere can have: 10 * 4^s + 2.
bool is_icosphere_vertex_count(std::uint32_t vertex_count);

/// Procedural stand-in for a licensed model: icosphere mean, smooth random
/// orthogonal bases, scale[i] = scale0 * decay^i.
MorphableModel make_toy_model(std::uint32_t vertex_count, std::uint32_t p_id,
                              std::uint32_t p_exp, double scale_decay, std::uint64_t seed);

void save_model(const MorphableModel& model, const std::filesystem::path& path);
MorphableModel load_model(const std::filesystem::path& path);
std::string serialize_model(const MorphableModel& model);
MorphableModel deserialize_model(std::string bytes);

/// Wavefront OBJ: "v x y z" (6 decimals) per vertex, "f a b c" (1-based) per triangle.
std::string export_obj(const FaceMesh& mesh);

}  // namespace face_manifold
