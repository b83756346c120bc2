#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "tenseg/geometry.hpp"
#include "tenseg/kernels/kernels.hpp"
#include "tenseg/robot_model.hpp"

namespace tenseg {

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // pixels
  double cx = 0.0, cy = 0.0;  // pixels
  int width = 0, height = 0;

  void validate() const;
};

/// Quantize HSV (degrees, [0,1]) to the 8-bit space frames are stored in:
/// hue scaled 0-255 over 0-360 degrees.
std::uint8_t hue_to_u8(double hue_deg);
std::uint8_t unit_to_u8(double x);
kernels::HsvRangeU8 quantize_hsv_range(const HsvRange& range);

/// One synchronized observation: organized depth + HSV grid (depth 0 marks an
/// invalid pixel) and the cable length measurements for that timestep.
struct ObservedFrame {
  int width = 0, height = 0;
  std::vector<float> depth;       // row-major, meters
  std::vector<std::uint8_t> hue;  // quantized
  std::vector<std::uint8_t> sat;
  std::vector<std::uint8_t> val;
  std::map<std::pair<int, int>, double> cable_measurements;
  double timestamp = 0.0;

  std::size_t at(int u, int v) const {
    return static_cast<std::size_t>(v) * width + u;
  }
  bool in_bounds(int u, int v) const {
    return u >= 0 && v >= 0 && u < width && v < height;
  }
  void allocate(int w, int h);
};

/// Inclusive pixel bounding box.
struct Roi {
  int u_min = 0, v_min = 0, u_max = -1, v_max = -1;
  bool empty() const { return u_max < u_min || v_max < v_min; }
  bool contains(int u, int v) const {
    return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  }
};

/// Camera-to-world transform with the detected ground as z = 0 and +z toward
/// the camera.
struct GroundPlane {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();
  int inlier_count = 0;

  Vec3 to_world(const Vec3& p_camera) const { return rotation * p_camera + translation; }
  double height_of(const Vec3& p_camera) const { return to_world(p_camera).z(); }
};

struct RansacConfig {
  int iterations = 200;
  double inlier_threshold = 0.01;  // meters
  std::uint64_t seed = 0;
};

struct DmaxSchedule {
  double initial = 0.10;  // meters
  double decay = 0.7;
  double floor = 0.01;  // meters
};

/// Back-projects pixel (u, v): ((u-cx)d/fx, (v-cy)d/fy, d), or nullopt when
/// the depth is invalid. Throws InvalidArgumentError out of bounds.
std::optional<Vec3> project_to_3d(const ObservedFrame& frame,
                                  const CameraIntrinsics& intrinsics, int u,
                                  int v);

/// Pixels whose HSV falls inside the range (hue wraparound honored),
/// restricted to the ROI when given. Returned in row-major scan order.
std::vector<std::pair<int, int>> segment_endcap_pixels(
    const ObservedFrame& frame, const HsvRange& range, const Roi* roi = nullptr);

/// Depth-window rule: drops points whose z exceeds min z plus the endcap
/// radius. Order-preserving; empty input gives empty output.
std::vector<Vec3> filter_endcap_noise(const std::vector<Vec3>& points,
                                      double endcap_radius);

/// Camera-facing half of a (spherical) endcap model, in world frame:
/// dot(p - center, camera - center) > 0.
std::vector<Vec3> visible_model_points(const EndcapModel& model,
                                       const RigidPose& pose,
                                       const Vec3& camera_origin);

/// d_max(k) = max(floor, initial * decay^k).
double dmax_schedule(int iteration, const DmaxSchedule& config);

/// Nearest observed point per model point within d_max; weight from the
/// clipped quadratic falloff; ties to the lowest observed index. Uses a
/// spatial grid above `grid_threshold` points, brute force (the oracle path)
/// below; both produce identical output.
std::vector<Correspondence> find_correspondences(
    const std::vector<Vec3>& visible_model, const std::vector<Vec3>& observed,
    double d_max, std::size_t grid_threshold = 512);

/// Brute-force reference used by the equivalence test.
std::vector<Correspondence> find_correspondences_brute(
    const std::vector<Vec3>& visible_model, const std::vector<Vec3>& observed,
    double d_max);

/// Appends `count` seeded self-correspondences drawn from the previous step's
/// model and observed points, each weighted at half the mean real weight
/// (0.5 when there are no real correspondences).
std::vector<Correspondence> add_dummy_points(
    std::vector<Correspondence> correspondences,
    const std::vector<Vec3>& previous_model,
    const std::vector<Vec3>& previous_observed, int count, std::uint64_t seed);

/// Seeded RANSAC plane fit over all valid depth pixels, least-squares refined.
/// Throws PlaneNotFoundError with fewer than 3 valid points or an inlier
/// ratio under 10%.
GroundPlane detect_ground_plane(const ObservedFrame& frame,
                                const CameraIntrinsics& intrinsics,
                                const RansacConfig& config);

}  // namespace tenseg
