#pragma once

// Deterministic dynamics s' = f(s, a) with explicit Lipschitz constants, an
// optional per-step displacement cap, an optional wall with a hallway gap and
// an optional reflecting box.

#include <optional>

#include <json.hpp>

#include "polexp/policy.hpp"

namespace polexp {

/// A slab wall_x < x_0 < wall_x + thickness across the whole state space,
/// pierced by a cylindrical hallway: points whose transverse coordinates
/// (x_1, ..., x_{d-1}) lie within gap_halfwidth of gap_center.
struct HallwaySpec {
  double wall_x = 2.0;
  Vector gap_center;  // dimension d - 1
  double gap_halfwidth = 0.15;
  double thickness = 0.05;

  void validate(int dim) const;
  bool in_gap(const VectorRef& s) const;
  bool in_slab(double x0) const { return x0 > wall_x && x0 < wall_x + thickness; }
};

struct EnvSpec {
  int dim = 2;
  double lipschitz_state = 1.0;   // L_s
  double lipschitz_action = 1.0;  // L_a
  std::optional<double> delta_cap;
  std::optional<HallwaySpec> barrier;
  std::optional<double> box_halfwidth;  // reflecting walls at +-box_halfwidth

  void validate() const;
};

/// Fraction of delta_cap that a capped displacement may reach, so |s' - s| < delta strictly.
inline constexpr double kCapShrink = 1.0 - 1e-9;

/// One transition. Order: candidate L_s s + L_a a, displacement cap, box
/// reflection, wall collision (stop at the face, keep the motion parallel to it).
Vector step(const EnvSpec& spec, const VectorRef& s, const VectorRef& a);

struct LipschitzConstants {
  double state = 1.0;
  double action = 1.0;
  bool nominal = false;  // true when a cap, wall or box truncates the map
};

LipschitzConstants lipschitz_constants(const EnvSpec& spec);

/// True if the segment from -> to passes through the wall outside the hallway.
bool crosses_wall(const HallwaySpec& wall, const VectorRef& from, const VectorRef& to);

nlohmann::json to_json(const EnvSpec& spec);

}  // namespace polexp
