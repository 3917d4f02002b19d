#include "polexp/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "polexp/error.hpp"

namespace polexp {
namespace {

bool within_tube(const HallwaySpec& wall, const Vector& p) {
  const auto t = p.size() - 1;
  return (p.tail(t) - wall.gap_center).norm() < wall.gap_halfwidth;
}

Vector resolve_wall(const HallwaySpec& wall, const Vector& from, Vector to) {
  if (!crosses_wall(wall, from, to)) return to;
  if (!wall.in_slab(from(0))) {
    // Stop at the face we approached from; transverse motion is kept.
    to(0) = from(0) <= wall.wall_x ? wall.wall_x : wall.wall_x + wall.thickness;
    return to;
  }
  // Inside the hallway: axial motion is kept, transverse offset clamped to the tube.
  const auto t = to.size() - 1;
  const Vector offset = to.tail(t) - wall.gap_center;
  const double limit = wall.gap_halfwidth * kCapShrink;
  const double norm = offset.norm();
  if (norm > limit) to.tail(t) = wall.gap_center + offset * (limit / norm);
  return to;
}

double reflect(double x, double half) {
  const double period = 4.0 * half;
  // Fold into [-half, half] for arbitrarily large excursions.
  double y = std::fmod(x + half, period);
  if (y < 0) y += period;
  return y <= 2.0 * half ? y - half : 3.0 * half - y;
}

}  // namespace

void HallwaySpec::validate(int dim) const {
  if (dim < 2) throw InvalidArgument("barrier: requires dim >= 2");
  if (gap_center.size() != dim - 1)
    throw DimensionError("barrier: gap_center must have dimension " + std::to_string(dim - 1));
  if (!(gap_halfwidth > 0.0)) throw InvalidArgument("barrier: gap_halfwidth must be > 0");
  if (!(thickness > 0.0)) throw InvalidArgument("barrier: thickness must be > 0");
  if (!std::isfinite(wall_x)) throw InvalidArgument("barrier: wall_x must be finite");
}

bool HallwaySpec::in_gap(const VectorRef& s) const {
  const auto t = s.size() - 1;
  return (s.tail(t) - gap_center).norm() < gap_halfwidth;
}

void EnvSpec::validate() const {
  if (dim < 1) throw InvalidArgument("env: dim must be >= 1");
  if (!(lipschitz_state > 0.0)) throw InvalidArgument("env: L_s must be > 0");
  if (!(lipschitz_action > 0.0)) throw InvalidArgument("env: L_a must be > 0");
  if (delta_cap && !(*delta_cap > 0.0)) throw InvalidArgument("env: delta must be > 0");
  if (box_halfwidth && !(*box_halfwidth > 0.0))
    throw InvalidArgument("env: box_halfwidth must be > 0");
  if (barrier) barrier->validate(dim);
}

bool crosses_wall(const HallwaySpec& wall, const VectorRef& from, const VectorRef& to) {
  const double p0 = from(0);
  const double q0 = to(0);
  double lo = 0.0;
  double hi = 1.0;
  if (q0 == p0) {
    if (!wall.in_slab(p0)) return false;
  } else {
    const double ta = (wall.wall_x - p0) / (q0 - p0);
    const double tb = (wall.wall_x + wall.thickness - p0) / (q0 - p0);
    lo = std::max(0.0, std::min(ta, tb));
    hi = std::min(1.0, std::max(ta, tb));
    // Touching a face at a single point is not entering the open slab.
    if (!(lo < hi)) return false;
  }
  const Vector a = from + lo * (to - from);
  const Vector b = from + hi * (to - from);
  // The hallway is convex, so both ends of the in-slab piece inside it suffice.
  return !(within_tube(wall, a) && within_tube(wall, b));
}

Vector step(const EnvSpec& spec, const VectorRef& s, const VectorRef& a) {
  if (s.size() != spec.dim || a.size() != spec.dim)
    throw DimensionError("step: state/action dimensions " + std::to_string(s.size()) + "/" +
                         std::to_string(a.size()) + " do not match env dim " +
                         std::to_string(spec.dim));
  Vector disp = spec.lipschitz_action * a;
  if (spec.lipschitz_state != 1.0) disp += (spec.lipschitz_state - 1.0) * s;
  if (spec.delta_cap) {
    const double limit = *spec.delta_cap * kCapShrink;
    const double norm = disp.norm();
    if (norm > limit) disp *= limit / norm;
  }
  Vector next = s + disp;
  if (spec.box_halfwidth)
    for (auto& x : next)
      if (std::abs(x) > *spec.box_halfwidth) x = reflect(x, *spec.box_halfwidth);
  // Last, so that no transition ever passes through the wall.
  if (spec.barrier) next = resolve_wall(*spec.barrier, s, std::move(next));
  return next;
}

LipschitzConstants lipschitz_constants(const EnvSpec& spec) {
  return {spec.lipschitz_state, spec.lipschitz_action,
          spec.delta_cap.has_value() || spec.barrier.has_value() || spec.box_halfwidth.has_value()};
}

nlohmann::json to_json(const EnvSpec& spec) {
  nlohmann::json j = {{"dim", spec.dim}, {"L_s", spec.lipschitz_state}, {"L_a", spec.lipschitz_action}};
  if (spec.delta_cap) j["delta"] = *spec.delta_cap;
  if (spec.box_halfwidth) j["box_halfwidth"] = *spec.box_halfwidth;
  if (spec.barrier) {
    const auto& b = *spec.barrier;
    j["barrier"] = {{"wall_x", b.wall_x},
                    {"gap_center", std::vector<double>(b.gap_center.begin(), b.gap_center.end())},
                    {"gap_halfwidth", b.gap_halfwidth},
                    {"thickness", b.thickness}};
  }
  return j;
}

}  // namespace polexp
