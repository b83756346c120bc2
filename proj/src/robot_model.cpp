#include "tenseg/robot_model.hpp"

#include <cmath>
#include <numbers>

#include "tenseg/errors.hpp"
#include "tenseg/rng.hpp"

namespace tenseg {

void TensegrityTopology::validate() const {
  if (n_rods < 1) throw InvalidArgumentError("topology: n_rods must be >= 1");
  if (!(rod_length > rod_diameter) || !(rod_diameter > 0.0)) {
    throw InvalidArgumentError("topology: need rod_length > rod_diameter > 0");
  }
  if (!(endcap_radius > 0.0) || endcap_radius > rod_diameter) {
    throw InvalidArgumentError("topology: need 0 < endcap_radius <= rod_diameter");
  }
  if (static_cast<int>(endcap_hsv.size()) != num_endcaps()) {
    throw InvalidArgumentError("topology: endcap_hsv must have one range per endcap");
  }
  for (const auto& range : endcap_hsv) {
    if (range.s_min < 0.0 || range.s_max > 1.0 || range.v_min < 0.0 ||
        range.v_max > 1.0 || range.s_min > range.s_max || range.v_min > range.v_max) {
      throw InvalidArgumentError("topology: saturation/value bounds must lie in [0,1]");
    }
  }
  for (const auto& [i, j] : cables) {
    if (i < 0 || j < 0 || i >= num_endcaps() || j >= num_endcaps()) {
      throw InvalidArgumentError("topology: cable endcap index out of range");
    }
    if (i == j || rod_of_endcap(i) == rod_of_endcap(j)) {
      throw InvalidArgumentError("topology: cable must connect endcaps of different rods");
    }
  }
}

TensegrityTopology TensegrityTopology::three_bar_default() {
  TensegrityTopology topo;
  topo.n_rods = 3;
  topo.rod_length = 0.36;
  topo.rod_diameter = 0.035;
  topo.endcap_radius = 0.0175;

  // Rod k spans bottom node B_k to top node T_{k+1}: endcap 2k is the top
  // (+z) end, endcap 2k+1 the bottom. Cables: bottom triangle, top triangle,
  // three saddle cables (nine total, all across distinct rods).
  topo.cables = {
      {1, 3}, {3, 5}, {5, 1},  // bottom triangle B0-B1-B2
      {4, 0}, {0, 2}, {2, 4},  // top triangle T0-T1-T2
      {1, 4}, {3, 0}, {5, 2},  // saddle B_k-T_k
  };

  auto rod_color = [](double hue_center) {
    HsvRange r;
    r.h_min_deg = hue_center - 10.0;
    r.h_max_deg = hue_center + 10.0;
    if (r.h_min_deg < 0.0) r.h_min_deg += 360.0;
    if (r.h_max_deg >= 360.0) r.h_max_deg -= 360.0;
    r.s_min = 0.55;
    r.s_max = 1.0;
    r.v_min = 0.45;
    r.v_max = 1.0;
    return r;
  };
  const HsvRange red = rod_color(0.0);
  const HsvRange green = rod_color(120.0);
  const HsvRange blue = rod_color(240.0);
  topo.endcap_hsv = {red, red, green, green, blue, blue};

  topo.validate();
  return topo;
}

std::pair<Vec3, Vec3> endcap_positions(const RigidPose& pose,
                                       const TensegrityTopology& topology) {
  const Vec3 half_axis = pose.rotation * Vec3(0.0, 0.0, 0.5 * topology.rod_length);
  return {pose.translation + half_axis, pose.translation - half_axis};
}

RigidPose pose_from_endcaps(const Vec3& q_i, const Vec3& q_j,
                            const Quat& previous,
                            const TensegrityTopology& topology) {
  (void)topology;
  const Vec3 diff = q_i - q_j;
  const double len = diff.norm();
  if (!(len > 0.0)) {
    throw DegenerateGeometryError("pose_from_endcaps: coincident endcaps", 0);
  }
  const Vec3 new_axis = diff / len;
  const Vec3 prev_axis = previous * Vec3::UnitZ();

  RigidPose pose;
  pose.translation = 0.5 * (q_i + q_j);
  // Minimal rotation carrying the old axis onto the new one, composed with
  // the previous rotation, is the geodesically closest axis-aligned rotation.
  pose.rotation = (minimal_rotation_between(prev_axis, new_axis) * previous).normalized();
  return pose;
}

std::vector<EndcapModel> sample_endcap_model(const TensegrityTopology& topology,
                                             int samples_per_endcap,
                                             std::uint64_t seed) {
  if (samples_per_endcap < 100) {
    throw InvalidArgumentError("sample_endcap_model: need >= 100 samples per endcap");
  }
  constexpr double golden_angle = std::numbers::pi * (3.0 - 2.2360679774997896);

  std::vector<EndcapModel> models;
  models.reserve(topology.num_endcaps());
  for (int e = 0; e < topology.num_endcaps(); ++e) {
    Rng rng(seed_combine(seed, static_cast<std::uint64_t>(e)));
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

    EndcapModel model;
    model.endcap_index = e;
    model.local_center = topology.local_endcap_center(e);
    model.points.reserve(samples_per_endcap);
    const double n = samples_per_endcap;
    for (int i = 0; i < samples_per_endcap; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double theta = i * golden_angle + phase;
      const Vec3 unit(rho * std::cos(theta), rho * std::sin(theta), z);
      model.points.push_back(model.local_center + topology.endcap_radius * unit);
    }
    models.push_back(std::move(model));
  }
  return models;
}

}  // namespace tenseg
