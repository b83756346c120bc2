#include "tenseg/perception.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "tenseg/errors.hpp"
#include "tenseg/rng.hpp"

namespace tenseg {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InvalidArgumentError("intrinsics: focal lengths must be > 0");
  }
  if (width <= 0 || height <= 0) {
    throw InvalidArgumentError("intrinsics: image size must be positive");
  }
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw InvalidArgumentError("intrinsics: principal point must lie inside the image");
  }
}

std::uint8_t hue_to_u8(double hue_deg) {
  double h = std::fmod(hue_deg, 360.0);
  if (h < 0.0) h += 360.0;
  const int q = static_cast<int>(std::lround(h / 360.0 * 255.0));
  return static_cast<std::uint8_t>(std::clamp(q, 0, 255));
}

std::uint8_t unit_to_u8(double x) {
  const int q = static_cast<int>(std::lround(x * 255.0));
  return static_cast<std::uint8_t>(std::clamp(q, 0, 255));
}

kernels::HsvRangeU8 quantize_hsv_range(const HsvRange& range) {
  kernels::HsvRangeU8 q;
  q.h_lo = hue_to_u8(range.h_min_deg);
  q.h_hi = hue_to_u8(range.h_max_deg);
  q.s_lo = unit_to_u8(range.s_min);
  q.s_hi = unit_to_u8(range.s_max);
  q.v_lo = unit_to_u8(range.v_min);
  q.v_hi = unit_to_u8(range.v_max);
  return q;
}

void ObservedFrame::allocate(int w, int h) {
  width = w;
  height = h;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  depth.assign(n, 0.0f);
  hue.assign(n, 0);
  sat.assign(n, 0);
  val.assign(n, 0);
}

std::optional<Vec3> project_to_3d(const ObservedFrame& frame,
                                  const CameraIntrinsics& intrinsics, int u,
                                  int v) {
  if (!frame.in_bounds(u, v)) {
    throw InvalidArgumentError("project_to_3d: pixel out of bounds");
  }
  const double d = frame.depth[frame.at(u, v)];
  if (!(d > 0.0)) return std::nullopt;
  return Vec3((u - intrinsics.cx) * d / intrinsics.fx,
              (v - intrinsics.cy) * d / intrinsics.fy, d);
}

std::vector<std::pair<int, int>> segment_endcap_pixels(const ObservedFrame& frame,
                                                       const HsvRange& range,
                                                       const Roi* roi) {
  const kernels::HsvRangeU8 qrange = quantize_hsv_range(range);
  const auto& k = kernels::active_kernels();

  int u0 = 0, v0 = 0, u1 = frame.width - 1, v1 = frame.height - 1;
  if (roi != nullptr) {
    u0 = std::max(u0, roi->u_min);
    v0 = std::max(v0, roi->v_min);
    u1 = std::min(u1, roi->u_max);
    v1 = std::min(v1, roi->v_max);
  }

  std::vector<std::pair<int, int>> pixels;
  if (u1 < u0 || v1 < v0) return pixels;

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(u1 - u0 + 1));
  for (int v = v0; v <= v1; ++v) {
    const std::size_t offset = frame.at(u0, v);
    k.hsv_mask(frame.hue.data() + offset, frame.sat.data() + offset,
               frame.val.data() + offset, mask.size(), qrange, mask.data());
    for (int u = u0; u <= u1; ++u) {
      if (mask[u - u0]) pixels.emplace_back(u, v);
    }
  }
  return pixels;
}

std::vector<Vec3> filter_endcap_noise(const std::vector<Vec3>& points,
                                      double endcap_radius) {
  if (points.empty()) return {};
  double min_z = std::numeric_limits<double>::infinity();
  for (const auto& p : points) min_z = std::min(min_z, p.z());
  std::vector<Vec3> kept;
  kept.reserve(points.size());
  for (const auto& p : points) {
    if (p.z() <= min_z + endcap_radius) kept.push_back(p);
  }
  return kept;
}

std::vector<Vec3> visible_model_points(const EndcapModel& model,
                                       const RigidPose& pose,
                                       const Vec3& camera_origin) {
  const Vec3 center = pose.apply(model.local_center);
  const Vec3 to_camera = camera_origin - center;
  std::vector<Vec3> visible;
  visible.reserve(model.points.size() / 2 + 1);
  for (const auto& local : model.points) {
    const Vec3 world = pose.apply(local);
    if ((world - center).dot(to_camera) > 0.0) visible.push_back(world);
  }
  return visible;
}

double dmax_schedule(int iteration, const DmaxSchedule& config) {
  if (iteration < 0) throw InvalidArgumentError("dmax_schedule: iteration must be >= 0");
  return std::max(config.floor, config.initial * std::pow(config.decay, iteration));
}

namespace {

struct PointSoa {
  std::vector<float> xs, ys, zs;

  explicit PointSoa(const std::vector<Vec3>& points) {
    xs.reserve(points.size());
    ys.reserve(points.size());
    zs.reserve(points.size());
    for (const auto& p : points) {
      xs.push_back(static_cast<float>(p.x()));
      ys.push_back(static_cast<float>(p.y()));
      zs.push_back(static_cast<float>(p.z()));
    }
  }

  std::size_t size() const { return xs.size(); }
};

// Must mirror the kernel's per-element expression so the grid path and the
// brute-force kernel path round identically.
inline float sqdist_f(float qx, float qy, float qz, float x, float y, float z) {
  const float dx = qx - x;
  const float dy = qy - y;
  const float dz = qz - z;
  return (dx * dx + dy * dy) + dz * dz;
}

std::optional<Correspondence> make_pair_checked(const Vec3& model_point,
                                                const std::vector<Vec3>& observed,
                                                std::size_t index, float d2f,
                                                float dmax2_f, double d_max) {
  if (index == kernels::npos || !(d2f <= dmax2_f)) return std::nullopt;
  const double dist = (model_point - observed[index]).norm();
  if (dist > d_max) return std::nullopt;
  return Correspondence{model_point, observed[index],
                        correspondence_weight(dist, d_max)};
}

}  // namespace

std::vector<Correspondence> find_correspondences_brute(
    const std::vector<Vec3>& visible_model, const std::vector<Vec3>& observed,
    double d_max) {
  std::vector<Correspondence> out;
  if (observed.empty() || visible_model.empty()) return out;
  const PointSoa soa(observed);
  const auto& k = kernels::active_kernels();
  const float dmax_f = static_cast<float>(d_max);
  const float dmax2_f = dmax_f * dmax_f;

  for (const auto& m : visible_model) {
    std::size_t idx = kernels::npos;
    float d2 = 0.0f;
    k.min_sqdist(static_cast<float>(m.x()), static_cast<float>(m.y()),
                 static_cast<float>(m.z()), soa.xs.data(), soa.ys.data(),
                 soa.zs.data(), soa.size(), &idx, &d2);
    if (auto c = make_pair_checked(m, observed, idx, d2, dmax2_f, d_max)) {
      out.push_back(*c);
    }
  }
  return out;
}

std::vector<Correspondence> find_correspondences(
    const std::vector<Vec3>& visible_model, const std::vector<Vec3>& observed,
    double d_max, std::size_t grid_threshold) {
  if (!(d_max > 0.0)) throw InvalidArgumentError("find_correspondences: d_max must be > 0");
  if (observed.size() <= grid_threshold) {
    return find_correspondences_brute(visible_model, observed, d_max);
  }

  // Spatial hash with cell size d_max; any pair within d_max lives in the
  // 27-cell neighborhood.
  auto cell_of = [d_max](const Vec3& p) {
    return std::array<std::int64_t, 3>{
        static_cast<std::int64_t>(std::floor(p.x() / d_max)),
        static_cast<std::int64_t>(std::floor(p.y() / d_max)),
        static_cast<std::int64_t>(std::floor(p.z() / d_max))};
  };
  auto hash_cell = [](const std::array<std::int64_t, 3>& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : c) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return h;
  };

  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
  grid.reserve(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    grid[hash_cell(cell_of(observed[i]))].push_back(static_cast<std::uint32_t>(i));
  }

  const PointSoa soa(observed);
  const float dmax_f = static_cast<float>(d_max);
  const float dmax2_f = dmax_f * dmax_f;

  std::vector<Correspondence> out;
  std::vector<std::uint32_t> candidates;
  for (const auto& m : visible_model) {
    const auto base = cell_of(m);
    candidates.clear();
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = grid.find(hash_cell({base[0] + dx, base[1] + dy, base[2] + dz}));
          if (it != grid.end()) {
            candidates.insert(candidates.end(), it->second.begin(), it->second.end());
          }
        }
      }
    }
    if (candidates.empty()) continue;
    // Ascending scan keeps the brute-force lowest-index tie-break.
    std::sort(candidates.begin(), candidates.end());

    const float qx = static_cast<float>(m.x());
    const float qy = static_cast<float>(m.y());
    const float qz = static_cast<float>(m.z());
    std::size_t best = kernels::npos;
    float best_d2 = std::numeric_limits<float>::infinity();
    for (std::uint32_t i : candidates) {
      const float d2 = sqdist_f(qx, qy, qz, soa.xs[i], soa.ys[i], soa.zs[i]);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    if (auto c = make_pair_checked(m, observed, best, best_d2, dmax2_f, d_max)) {
      out.push_back(*c);
    }
  }
  return out;
}

std::vector<Correspondence> add_dummy_points(
    std::vector<Correspondence> correspondences,
    const std::vector<Vec3>& previous_model,
    const std::vector<Vec3>& previous_observed, int count, std::uint64_t seed) {
  if (count < 0) throw InvalidArgumentError("add_dummy_points: count must be >= 0");
  if (count == 0) return correspondences;

  const std::size_t pool = previous_model.size() + previous_observed.size();
  if (pool == 0) return correspondences;

  double dummy_weight = 0.5;
  if (!correspondences.empty()) {
    double mean = 0.0;
    for (const auto& c : correspondences) mean += c.weight;
    mean /= static_cast<double>(correspondences.size());
    dummy_weight = 0.5 * mean;
  }

  Rng rng(seed);
  correspondences.reserve(correspondences.size() + count);
  for (int i = 0; i < count; ++i) {
    const std::size_t idx = rng.uniform_index(pool);
    const Vec3& p = idx < previous_model.size()
                        ? previous_model[idx]
                        : previous_observed[idx - previous_model.size()];
    correspondences.push_back(Correspondence{p, p, dummy_weight});
  }
  return correspondences;
}

GroundPlane detect_ground_plane(const ObservedFrame& frame,
                                const CameraIntrinsics& intrinsics,
                                const RansacConfig& config) {
  std::vector<Vec3> points;
  for (int v = 0; v < frame.height; ++v) {
    for (int u = 0; u < frame.width; ++u) {
      const double d = frame.depth[frame.at(u, v)];
      if (d > 0.0) {
        points.emplace_back((u - intrinsics.cx) * d / intrinsics.fx,
                            (v - intrinsics.cy) * d / intrinsics.fy, d);
      }
    }
  }
  if (points.size() < 3) {
    throw PlaneNotFoundError("detect_ground_plane: fewer than 3 valid depth points");
  }

  const PointSoa soa(points);
  const auto& k = kernels::active_kernels();
  const float thresh_f = static_cast<float>(config.inlier_threshold);

  Rng rng(config.seed);
  Vec3 best_normal = Vec3::UnitZ();
  double best_offset = 0.0;
  std::size_t best_count = 0;

  auto count_inliers = [&](const Vec3& n, double off) {
    return k.plane_inlier_count(soa.xs.data(), soa.ys.data(), soa.zs.data(),
                                soa.size(), static_cast<float>(n.x()),
                                static_cast<float>(n.y()),
                                static_cast<float>(n.z()),
                                static_cast<float>(off), thresh_f);
  };

  for (int it = 0; it < config.iterations; ++it) {
    const std::size_t a = rng.uniform_index(points.size());
    const std::size_t b = rng.uniform_index(points.size());
    const std::size_t c = rng.uniform_index(points.size());
    if (a == b || b == c || a == c) continue;
    Vec3 n = (points[b] - points[a]).cross(points[c] - points[a]);
    const double norm = n.norm();
    if (norm < 1e-12) continue;
    n /= norm;
    const double off = -n.dot(points[a]);
    const std::size_t count = count_inliers(n, off);
    if (count > best_count) {
      best_count = count;
      best_normal = n;
      best_offset = off;
    }
  }
  if (best_count < 3) {
    throw PlaneNotFoundError("detect_ground_plane: RANSAC found no plane support");
  }

  // Least-squares refinement on the consensus set.
  Vec3 centroid = Vec3::Zero();
  std::size_t n_in = 0;
  for (const auto& p : points) {
    if (std::abs(best_normal.dot(p) + best_offset) <= config.inlier_threshold) {
      centroid += p;
      ++n_in;
    }
  }
  if (n_in >= 3) {
    centroid /= static_cast<double>(n_in);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : points) {
      if (std::abs(best_normal.dot(p) + best_offset) <= config.inlier_threshold) {
        const Vec3 q = p - centroid;
        cov += q * q.transpose();
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 refined_n = eig.eigenvectors().col(0).normalized();
    const double refined_off = -refined_n.dot(centroid);
    const std::size_t refined_count = count_inliers(refined_n, refined_off);
    if (refined_count >= best_count) {
      best_count = refined_count;
      best_normal = refined_n;
      best_offset = refined_off;
    }
  }

  if (static_cast<double>(best_count) < 0.10 * static_cast<double>(points.size())) {
    throw PlaneNotFoundError("detect_ground_plane: inlier ratio below 10%");
  }

  // +z must point toward the camera side: origin height is the plane offset.
  if (best_offset < 0.0) {
    best_normal = -best_normal;
    best_offset = -best_offset;
  }

  GroundPlane plane;
  plane.rotation = minimal_rotation_between(best_normal, Vec3::UnitZ());
  plane.translation = Vec3(0.0, 0.0, best_offset);
  plane.inlier_count = static_cast<int>(best_count);
  return plane;
}

}  // namespace tenseg
