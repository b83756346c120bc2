#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tenseg/geometry.hpp"
#include "tenseg/perception.hpp"
#include "tenseg/robot_model.hpp"

namespace tenseg {

/// Sensor imperfections injected after geometric rendering. All draws are
/// seeded; probabilities in [0,1], sigmas >= 0.
struct SimNoise {
  double depth_sigma = 0.005;             // meters
  double color_misalignment_prob = 0.1;   // per pixel; shifts color by <= 2 px
  int color_misalignment_max_px = 2;
  double cable_sigma = 0.01;              // meters
  double slack_probability = 0.05;        // per cable per frame
  double slack_bias = 0.02;               // meters, slack sensors over-read
  double endcap_dropout_prob = 0.05;      // per endcap pixel

  void validate() const;
  static SimNoise none() {
    SimNoise n;
    n.depth_sigma = 0.0;
    n.color_misalignment_prob = 0.0;
    n.cable_sigma = 0.0;
    n.slack_probability = 0.0;
    n.endcap_dropout_prob = 0.0;
    return n;
  }
};

/// Overhead camera: height above the ground, pitch toward the scene.
struct SimCamera {
  double height = 1.2;    // meters
  double tilt_deg = 8.0;  // rotation of the view axis away from straight down

  RigidPose world_to_camera() const;
};

struct TrajectorySpec {
  int frames = 100;
  std::string gait = "roll";  // "static" | "roll" | "script"
  double step_size = 0.01;    // meters/frame of CoM travel for "roll"
  double roll_radius = 0.35;  // meters; tumble rate is step_size / roll_radius
  double displacement_cap = 0.02;  // per endcap per frame
  double shape_wobble = 0.002;     // amplitude of the seeded per-rod deformation
  double wobble_cycles_per_frame = 0.05;
  std::uint64_t seed = 0;
  // "script": per-frame, per-rod twist (omega_xyz [rad], v_xyz [m]) applied
  // about each rod's current center.
  std::vector<std::vector<std::array<double, 6>>> script;

  void validate() const;
};

struct GroundTruthFrame {
  int index = 0;
  std::vector<RigidPose> poses;        // world frame
  std::vector<Vec3> endcap_positions;  // world frame, 2N
  std::map<std::pair<int, int>, double> cable_distances;
};

struct OccluderSphere {
  Vec3 center = Vec3::Zero();  // world frame
  double radius = 0.0;
};

/// Kinematically feasible ground-truth sequence: exact rod lengths, ground
/// clearance >= d_rod/2 (z-lift projection), pairwise separation >= d_rod
/// (step shrinking). Throws InfeasibleTrajectoryError when a step cannot be
/// projected to feasibility in 100 bisections.
std::vector<GroundTruthFrame> generate_trajectory(const TrajectorySpec& spec,
                                                  const TensegrityTopology& topology);

/// Converts world-frame ground truth into the camera frame the tracker works in.
GroundTruthFrame to_camera_frame(const GroundTruthFrame& world,
                                 const RigidPose& world_to_camera,
                                 const TensegrityTopology& topology);

/// Pinhole depth+HSV render of the analytic scene (endcap spheres, rod
/// cylinders, ground plane, optional occluder spheres) with z-buffering,
/// followed by seeded noise injection. prim_ids_out, when non-null, receives
/// the pre-noise primitive id per pixel (endcap index for endcap hits).
ObservedFrame render_frame(const GroundTruthFrame& gt_world,
                           const TensegrityTopology& topology,
                           const CameraIntrinsics& intrinsics,
                           const RigidPose& world_to_camera,
                           const SimNoise& noise, std::uint64_t seed,
                           const std::vector<OccluderSphere>& occluders = {},
                           std::vector<std::int16_t>* prim_ids_out = nullptr);

/// Cable sensor model: gaussian noise, or a positive slack bias when the
/// seeded slack event fires.
std::map<std::pair<int, int>, double> simulate_cables(const GroundTruthFrame& gt,
                                                      const TensegrityTopology& topology,
                                                      const SimNoise& noise,
                                                      std::uint64_t seed);

/// Tight pixel boxes of each endcap's rendered pixels at the given frame,
/// padded by pad_px. Throws InvalidArgumentError if an endcap has no pixels.
std::vector<Roi> derive_rois(const std::vector<std::int16_t>& prim_ids,
                             int width, int height, int num_endcaps, int pad_px);

/// Home configuration used by the generator: the 3-bar prism resting on the
/// ground. Exposed for tests and crafted scenarios.
std::vector<RigidPose> prism_home_poses(const TensegrityTopology& topology);

}  // namespace tenseg
