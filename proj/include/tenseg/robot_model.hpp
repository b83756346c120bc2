#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tenseg/geometry.hpp"

namespace tenseg {

/// HSV box; hue in degrees with wraparound allowed (min > max wraps through 0),
/// saturation/value in [0, 1].
struct HsvRange {
  double h_min_deg = 0.0, h_max_deg = 360.0;
  double s_min = 0.0, s_max = 1.0;
  double v_min = 0.0, v_max = 1.0;
};

/// Static description of an N-bar tensegrity: rod dimensions, cable edge set
/// over endcap indices, per-endcap segmentation colors. Rod r owns endcaps
/// (2r, 2r+1); endcap 2r sits at +z in the rod's local frame, the main axis
/// is local z.
struct TensegrityTopology {
  int n_rods = 0;
  double rod_length = 0.0;     // meters, endcap center to endcap center
  double rod_diameter = 0.0;   // meters
  double endcap_radius = 0.0;  // meters
  std::vector<std::pair<int, int>> cables;
  std::vector<HsvRange> endcap_hsv;  // size 2 * n_rods

  int num_endcaps() const { return 2 * n_rods; }
  std::pair<int, int> endcaps_of_rod(int rod) const { return {2 * rod, 2 * rod + 1}; }
  static int rod_of_endcap(int endcap) { return endcap / 2; }

  /// Endcap center in the rod's local frame (+z for even indices).
  Vec3 local_endcap_center(int endcap) const {
    return {0.0, 0.0, (endcap % 2 == 0 ? 0.5 : -0.5) * rod_length};
  }

  /// Throws InvalidArgumentError when an invariant is broken.
  void validate() const;

  /// 3-bar prism with the experiment dimensions: 0.36 m rods, 0.0175 m endcap
  /// radius, 0.035 m rod diameter, nine cables, R/G/B endcap colors per rod.
  static TensegrityTopology three_bar_default();
};

/// Sphere-surface sample of one endcap in the rod's local frame.
struct EndcapModel {
  int endcap_index = 0;
  Vec3 local_center = Vec3::Zero();
  std::vector<Vec3> points;  // local frame, on the endcap sphere surface
};

struct RodState {
  int rod_index = 0;
  RigidPose pose;
};

/// World positions of a rod's two endcap centers, (even index, odd index).
std::pair<Vec3, Vec3> endcap_positions(const RigidPose& pose,
                                       const TensegrityTopology& topology);

/// Pose whose endcaps land on (q_i, q_j) with the twist DOF resolved to the
/// rotation geodesically closest to `previous`. q_i is the even endcap (+z).
/// Throws DegenerateGeometryError when the endcaps coincide.
RigidPose pose_from_endcaps(const Vec3& q_i, const Vec3& q_j,
                            const Quat& previous,
                            const TensegrityTopology& topology);

/// Seeded quasi-uniform sphere sampling (Fibonacci lattice with a seeded
/// phase) of every endcap. samples_per_endcap must be >= 100.
std::vector<EndcapModel> sample_endcap_model(const TensegrityTopology& topology,
                                             int samples_per_endcap,
                                             std::uint64_t seed);

}  // namespace tenseg
