#include "tenseg/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "tenseg/errors.hpp"
#include "tenseg/kernels/kernels.hpp"
#include "tenseg/rng.hpp"

namespace tenseg {

void SimNoise::validate() const {
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(color_misalignment_prob) || !prob_ok(slack_probability) ||
      !prob_ok(endcap_dropout_prob)) {
    throw InvalidArgumentError("sim noise: probabilities must lie in [0,1]");
  }
  if (depth_sigma < 0.0 || cable_sigma < 0.0) {
    throw InvalidArgumentError("sim noise: sigmas must be >= 0");
  }
  if (color_misalignment_max_px < 0) {
    throw InvalidArgumentError("sim noise: misalignment radius must be >= 0");
  }
}

RigidPose SimCamera::world_to_camera() const {
  // Straight-down base: camera x = world x, y and z flipped; then pitch the
  // view axis by tilt_deg about the camera x axis.
  Mat3 base;
  base << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  const Quat tilt(Eigen::AngleAxisd(tilt_deg * std::numbers::pi / 180.0, Vec3::UnitX()));
  RigidPose pose;
  pose.rotation = (tilt * Quat(base)).normalized();
  pose.translation = pose.rotation * Vec3(0.0, 0.0, -height);
  return pose;
}

void TrajectorySpec::validate() const {
  if (frames < 1) throw InvalidArgumentError("trajectory: frames must be >= 1");
  if (gait != "static" && gait != "roll" && gait != "script") {
    throw InvalidArgumentError("trajectory: unknown gait '" + gait + "'");
  }
  if (gait == "roll" && (!(step_size >= 0.0) || !(roll_radius > 0.0))) {
    throw InvalidArgumentError("trajectory: roll needs step_size >= 0 and roll_radius > 0");
  }
  if (gait == "script" && static_cast<int>(script.size()) < frames - 1) {
    throw InvalidArgumentError("trajectory: script must cover frames-1 steps");
  }
  if (!(displacement_cap > 0.0)) {
    throw InvalidArgumentError("trajectory: displacement_cap must be > 0");
  }
  if (shape_wobble < 0.0) {
    throw InvalidArgumentError("trajectory: shape_wobble must be >= 0");
  }
}

std::vector<RigidPose> prism_home_poses(const TensegrityTopology& topology) {
  const int n = topology.n_rods;
  if (n < 3) throw InvalidArgumentError("prism_home_poses: need at least 3 rods");
  const double l = topology.rod_length;
  const double base_radius = l / 3.0;
  const double twist = std::numbers::pi / 2.0 - std::numbers::pi / n;
  const double z0 = 0.5 * topology.rod_diameter + 0.002;

  std::vector<Vec3> bottom(n), top(n);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n;
    bottom[k] = Vec3(base_radius * std::cos(a), base_radius * std::sin(a), z0);
  }
  // Height so that |B_k - T_{k+1}| = rod length.
  const double a0 = 2.0 * std::numbers::pi / n + twist;
  const Eigen::Vector2d t_xy(base_radius * std::cos(a0), base_radius * std::sin(a0));
  const double chord = (Eigen::Vector2d(base_radius, 0.0) - t_xy).norm();
  if (chord >= l) throw InvalidArgumentError("prism_home_poses: degenerate prism");
  const double height = std::sqrt(l * l - chord * chord);
  for (int k = 0; k < n; ++k) {
    const double a = 2.0 * std::numbers::pi * k / n + twist;
    top[k] = Vec3(base_radius * std::cos(a), base_radius * std::sin(a), z0 + height);
  }

  std::vector<RigidPose> poses(n);
  for (int k = 0; k < n; ++k) {
    poses[k] = pose_from_endcaps(top[(k + 1) % n], bottom[k], Quat::Identity(), topology);
  }
  return poses;
}

namespace {

std::vector<Vec3> endcaps_of(const std::vector<RigidPose>& poses,
                             const TensegrityTopology& topo) {
  std::vector<Vec3> q(topo.num_endcaps());
  for (int r = 0; r < topo.n_rods; ++r) {
    auto [a, b] = endcap_positions(poses[r], topo);
    q[2 * r] = a;
    q[2 * r + 1] = b;
  }
  return q;
}

double min_pair_separation(const std::vector<RigidPose>& poses,
                           const TensegrityTopology& topo) {
  const auto q = endcaps_of(poses, topo);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < topo.n_rods; ++i) {
    for (int j = i + 1; j < topo.n_rods; ++j) {
      const auto cp = closest_points_between_segments(
          {q[2 * i], q[2 * i + 1]}, {q[2 * j], q[2 * j + 1]});
      best = std::min(best, cp.distance);
    }
  }
  return best;
}

void lift_to_clearance(std::vector<RigidPose>& poses, const TensegrityTopology& topo) {
  const auto q = endcaps_of(poses, topo);
  double min_z = std::numeric_limits<double>::infinity();
  for (const auto& p : q) min_z = std::min(min_z, p.z());
  const double lift = 0.5 * topo.rod_diameter - min_z;
  if (lift > 0.0) {
    for (auto& pose : poses) pose.translation.z() += lift;
  }
}

struct WobbleParams {
  std::vector<Vec3> dir;
  std::vector<Vec3> axis;
  std::vector<double> phase;
};

WobbleParams make_wobble(const TensegrityTopology& topo, std::uint64_t seed) {
  WobbleParams w;
  Rng rng(seed_combine(seed, 0xb0b5ULL));
  for (int r = 0; r < topo.n_rods; ++r) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    Vec3 a(rng.normal(), rng.normal(), rng.normal());
    w.dir.push_back(d.norm() > 1e-9 ? d.normalized() : Vec3::UnitX());
    w.axis.push_back(a.norm() > 1e-9 ? a.normalized() : Vec3::UnitY());
    w.phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
  }
  return w;
}

std::vector<RigidPose> roll_path_poses(const std::vector<RigidPose>& home,
                                       const Vec3& home_com,
                                       const WobbleParams& wobble,
                                       const TrajectorySpec& spec, double tau) {
  std::vector<RigidPose> poses = home;
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t r = 0; r < poses.size(); ++r) {
    const double s = std::sin(two_pi * spec.wobble_cycles_per_frame * tau + wobble.phase[r]);
    const Quat rot(Eigen::AngleAxisd(spec.shape_wobble / 0.18 * s, wobble.axis[r]));
    const Vec3 center = poses[r].translation;
    poses[r].rotation = (rot * poses[r].rotation).normalized();
    poses[r].translation = center + spec.shape_wobble * s * wobble.dir[r];
  }
  if (spec.gait == "roll") {
    const double angle = -(spec.step_size * tau) / spec.roll_radius;
    const Quat body(Eigen::AngleAxisd(angle, Vec3::UnitY()));
    const Vec3 shift(spec.step_size * tau, 0.0, 0.0);
    for (auto& pose : poses) {
      pose.rotation = (body * pose.rotation).normalized();
      pose.translation = body * (pose.translation - home_com) + home_com + shift;
    }
  }
  return poses;
}

GroundTruthFrame make_frame(int index, std::vector<RigidPose> poses,
                            const TensegrityTopology& topo) {
  GroundTruthFrame f;
  f.index = index;
  f.endcap_positions = endcaps_of(poses, topo);
  f.poses = std::move(poses);
  for (const auto& [i, j] : topo.cables) {
    f.cable_distances[{i, j}] = (f.endcap_positions[i] - f.endcap_positions[j]).norm();
  }
  return f;
}

}  // namespace

std::vector<GroundTruthFrame> generate_trajectory(const TrajectorySpec& spec,
                                                  const TensegrityTopology& topology) {
  spec.validate();
  topology.validate();

  std::vector<RigidPose> home = prism_home_poses(topology);
  lift_to_clearance(home, topology);
  if (min_pair_separation(home, topology) < topology.rod_diameter) {
    throw InfeasibleTrajectoryError("generate_trajectory: home configuration is self-colliding");
  }
  Vec3 home_com = Vec3::Zero();
  for (const auto& p : home) home_com += p.translation;
  home_com /= static_cast<double>(home.size());

  const WobbleParams wobble = make_wobble(topology, spec.seed);

  auto feasible_step = [&](const std::vector<Vec3>& prev_endcaps,
                           std::vector<RigidPose>& candidate) {
    lift_to_clearance(candidate, topology);
    if (min_pair_separation(candidate, topology) < topology.rod_diameter) return false;
    const auto q = endcaps_of(candidate, topology);
    for (std::size_t e = 0; e < q.size(); ++e) {
      if ((q[e] - prev_endcaps[e]).norm() > spec.displacement_cap) return false;
    }
    return true;
  };

  std::vector<GroundTruthFrame> out;
  out.reserve(spec.frames);

  if (spec.gait == "script") {
    std::vector<RigidPose> current = home;
    out.push_back(make_frame(0, current, topology));
    for (int f = 1; f < spec.frames; ++f) {
      const auto& twists = spec.script[f - 1];
      if (static_cast<int>(twists.size()) != topology.n_rods) {
        throw InvalidArgumentError("trajectory script: per-rod twist count mismatch");
      }
      const auto prev_endcaps = endcaps_of(current, topology);
      double scale = 1.0;
      bool ok = false;
      std::vector<RigidPose> candidate;
      for (int attempt = 0; attempt < 100; ++attempt) {
        candidate = current;
        for (int r = 0; r < topology.n_rods; ++r) {
          const auto& t = twists[r];
          const Vec3 omega(t[0], t[1], t[2]);
          const Vec3 vel(t[3], t[4], t[5]);
          const double angle = omega.norm() * scale;
          if (angle > 1e-15) {
            const Quat rot(Eigen::AngleAxisd(angle, omega.normalized()));
            candidate[r].rotation = (rot * candidate[r].rotation).normalized();
          }
          candidate[r].translation += scale * vel;
        }
        if (feasible_step(prev_endcaps, candidate)) {
          ok = true;
          break;
        }
        scale *= 0.5;
      }
      if (!ok) {
        throw InfeasibleTrajectoryError("generate_trajectory: script step at frame " +
                                        std::to_string(f) + " cannot be made feasible");
      }
      current = candidate;
      out.push_back(make_frame(f, current, topology));
    }
    return out;
  }

  // "static" and "roll" follow a smooth path parametrized by progress tau.
  double tau = 0.0;
  std::vector<RigidPose> current = roll_path_poses(home, home_com, wobble, spec, tau);
  lift_to_clearance(current, topology);
  out.push_back(make_frame(0, current, topology));
  for (int f = 1; f < spec.frames; ++f) {
    if (spec.gait == "static") {
      out.push_back(make_frame(f, current, topology));
      continue;
    }
    const auto prev_endcaps = endcaps_of(current, topology);
    double inc = 1.0;
    bool ok = false;
    std::vector<RigidPose> candidate;
    for (int attempt = 0; attempt < 100; ++attempt) {
      candidate = roll_path_poses(home, home_com, wobble, spec, tau + inc);
      if (feasible_step(prev_endcaps, candidate)) {
        ok = true;
        break;
      }
      inc *= 0.5;
    }
    if (!ok) {
      throw InfeasibleTrajectoryError("generate_trajectory: roll step at frame " +
                                      std::to_string(f) + " cannot be made feasible");
    }
    tau += inc;
    current = candidate;
    out.push_back(make_frame(f, current, topology));
  }
  return out;
}

GroundTruthFrame to_camera_frame(const GroundTruthFrame& world,
                                 const RigidPose& world_to_camera,
                                 const TensegrityTopology& topology) {
  GroundTruthFrame cam;
  cam.index = world.index;
  cam.poses.reserve(world.poses.size());
  for (const auto& pose : world.poses) cam.poses.push_back(world_to_camera.compose(pose));
  cam.endcap_positions = endcaps_of(cam.poses, topology);
  cam.cable_distances = world.cable_distances;  // rigid, distances unchanged
  return cam;
}

namespace {

struct HsvU8 {
  std::uint8_t h, s, v;
};

HsvU8 range_center_color(const HsvRange& range) {
  double h;
  if (range.h_min_deg <= range.h_max_deg) {
    h = 0.5 * (range.h_min_deg + range.h_max_deg);
  } else {
    h = std::fmod(0.5 * (range.h_min_deg + range.h_max_deg + 360.0), 360.0);
  }
  return {hue_to_u8(h), unit_to_u8(0.5 * (range.s_min + range.s_max)),
          unit_to_u8(0.5 * (range.v_min + range.v_max))};
}

double hash01(std::uint64_t x) {
  return static_cast<double>(splitmix64(x) >> 11) * 0x1.0p-53;
}

}  // namespace

ObservedFrame render_frame(const GroundTruthFrame& gt_world,
                           const TensegrityTopology& topology,
                           const CameraIntrinsics& intrinsics,
                           const RigidPose& world_to_camera,
                           const SimNoise& noise, std::uint64_t seed,
                           const std::vector<OccluderSphere>& occluders,
                           std::vector<std::int16_t>* prim_ids_out) {
  noise.validate();
  intrinsics.validate();

  const int num_endcaps = topology.num_endcaps();
  const int num_occ = static_cast<int>(occluders.size());

  kernels::RenderScene scene;
  for (int e = 0; e < num_endcaps; ++e) {
    const Vec3 c = world_to_camera.apply(gt_world.endcap_positions[e]);
    scene.sph_x.push_back(static_cast<float>(c.x()));
    scene.sph_y.push_back(static_cast<float>(c.y()));
    scene.sph_z.push_back(static_cast<float>(c.z()));
    scene.sph_r.push_back(static_cast<float>(topology.endcap_radius));
  }
  for (const auto& occ : occluders) {
    const Vec3 c = world_to_camera.apply(occ.center);
    scene.sph_x.push_back(static_cast<float>(c.x()));
    scene.sph_y.push_back(static_cast<float>(c.y()));
    scene.sph_z.push_back(static_cast<float>(c.z()));
    scene.sph_r.push_back(static_cast<float>(occ.radius));
  }
  for (int r = 0; r < topology.n_rods; ++r) {
    const Vec3 a = world_to_camera.apply(gt_world.endcap_positions[2 * r + 1]);
    const Vec3 b = world_to_camera.apply(gt_world.endcap_positions[2 * r]);
    const Vec3 axis = (b - a).normalized();
    scene.cyl_px.push_back(static_cast<float>(a.x()));
    scene.cyl_py.push_back(static_cast<float>(a.y()));
    scene.cyl_pz.push_back(static_cast<float>(a.z()));
    scene.cyl_ux.push_back(static_cast<float>(axis.x()));
    scene.cyl_uy.push_back(static_cast<float>(axis.y()));
    scene.cyl_uz.push_back(static_cast<float>(axis.z()));
    scene.cyl_len.push_back(static_cast<float>(topology.rod_length));
    scene.cyl_r.push_back(static_cast<float>(0.5 * topology.rod_diameter));
  }
  const Vec3 plane_n = world_to_camera.rotation * Vec3::UnitZ();
  scene.has_plane = true;
  scene.plane_nx = static_cast<float>(plane_n.x());
  scene.plane_ny = static_cast<float>(plane_n.y());
  scene.plane_nz = static_cast<float>(plane_n.z());
  scene.plane_off = static_cast<float>(plane_n.dot(world_to_camera.translation));

  ObservedFrame frame;
  frame.allocate(intrinsics.width, intrinsics.height);
  std::vector<std::int16_t> ids(static_cast<std::size_t>(intrinsics.width) * intrinsics.height);

  const auto& kern = kernels::active_kernels();
  const float inv_fx = static_cast<float>(1.0 / intrinsics.fx);
  const float inv_fy = static_cast<float>(1.0 / intrinsics.fy);
  const float cx = static_cast<float>(intrinsics.cx);
  const float cy = static_cast<float>(intrinsics.cy);

  auto render_rows = [&](int v0, int v1) {
    for (int v = v0; v < v1; ++v) {
      const std::size_t off = static_cast<std::size_t>(v) * intrinsics.width;
      kern.render_row(scene, inv_fx, inv_fy, cx, cy, v, intrinsics.width,
                      frame.depth.data() + off, ids.data() + off);
    }
  };
  if (intrinsics.height >= 64) {
    const int mid = intrinsics.height / 2;
    std::thread worker(render_rows, 0, mid);
    render_rows(mid, intrinsics.height);
    worker.join();
  } else {
    render_rows(0, intrinsics.height);
  }

  // Colors by primitive id.
  std::vector<HsvU8> endcap_colors;
  endcap_colors.reserve(num_endcaps);
  for (int e = 0; e < num_endcaps; ++e) {
    endcap_colors.push_back(range_center_color(topology.endcap_hsv[e]));
  }
  const HsvU8 gray{0, unit_to_u8(0.12), unit_to_u8(0.6)};
  const int plane_id = scene.plane_id();
  const std::size_t total = ids.size();
  for (std::size_t i = 0; i < total; ++i) {
    const int id = ids[i];
    if (id < 0) continue;
    HsvU8 c;
    if (id < num_endcaps) {
      c = endcap_colors[id];
    } else if (id == plane_id) {
      const double texture = (hash01(seed_combine(seed, 3000, i)) - 0.5) * 0.16;
      c = {hue_to_u8(30.0), unit_to_u8(0.08), unit_to_u8(0.35 + texture)};
    } else {
      c = gray;  // rod bodies and occluders
    }
    frame.hue[i] = c.h;
    frame.sat[i] = c.s;
    frame.val[i] = c.v;
  }

  // Noise: independent streams so toggling one leaves the others unchanged.
  if (noise.depth_sigma > 0.0) {
    Rng rng(seed_combine(seed, 1));
    for (auto& d : frame.depth) {
      if (d > 0.0f) {
        d = static_cast<float>(std::max(1e-4, d + noise.depth_sigma * rng.normal()));
      }
    }
  }
  if (noise.color_misalignment_prob > 0.0 && noise.color_misalignment_max_px > 0) {
    Rng rng(seed_combine(seed, 2));
    const auto hue0 = frame.hue;
    const auto sat0 = frame.sat;
    const auto val0 = frame.val;
    const int m = noise.color_misalignment_max_px;
    for (int v = 0; v < intrinsics.height; ++v) {
      for (int u = 0; u < intrinsics.width; ++u) {
        if (rng.uniform() >= noise.color_misalignment_prob) continue;
        const int du = static_cast<int>(rng.uniform_index(2 * m + 1)) - m;
        const int dv = static_cast<int>(rng.uniform_index(2 * m + 1)) - m;
        const int su = std::clamp(u + du, 0, intrinsics.width - 1);
        const int sv = std::clamp(v + dv, 0, intrinsics.height - 1);
        const std::size_t dst = frame.at(u, v);
        const std::size_t src = frame.at(su, sv);
        frame.hue[dst] = hue0[src];
        frame.sat[dst] = sat0[src];
        frame.val[dst] = val0[src];
      }
    }
  }
  if (noise.endcap_dropout_prob > 0.0) {
    Rng rng(seed_combine(seed, 4));
    for (std::size_t i = 0; i < total; ++i) {
      if (ids[i] >= 0 && ids[i] < num_endcaps &&
          rng.uniform() < noise.endcap_dropout_prob) {
        frame.depth[i] = 0.0f;
      }
    }
  }

  if (prim_ids_out) *prim_ids_out = std::move(ids);
  return frame;
}

std::map<std::pair<int, int>, double> simulate_cables(const GroundTruthFrame& gt,
                                                      const TensegrityTopology& topology,
                                                      const SimNoise& noise,
                                                      std::uint64_t seed) {
  noise.validate();
  std::map<std::pair<int, int>, double> out;
  for (std::size_t k = 0; k < topology.cables.size(); ++k) {
    const auto& edge = topology.cables[k];
    const double truth = gt.cable_distances.at(edge);
    Rng rng(seed_combine(seed, 2000 + k));
    double measured;
    if (rng.uniform() < noise.slack_probability) {
      measured = truth + noise.slack_bias;
    } else {
      measured = truth + noise.cable_sigma * rng.normal();
    }
    out[edge] = std::max(measured, 1e-6);
  }
  return out;
}

std::vector<Roi> derive_rois(const std::vector<std::int16_t>& prim_ids,
                             int width, int height, int num_endcaps, int pad_px) {
  std::vector<Roi> rois(num_endcaps);
  std::vector<bool> seen(num_endcaps, false);
  for (auto& r : rois) r = Roi{width, height, -1, -1};
  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      const int id = prim_ids[static_cast<std::size_t>(v) * width + u];
      if (id < 0 || id >= num_endcaps) continue;
      auto& r = rois[id];
      r.u_min = std::min(r.u_min, u);
      r.v_min = std::min(r.v_min, v);
      r.u_max = std::max(r.u_max, u);
      r.v_max = std::max(r.v_max, v);
      seen[id] = true;
    }
  }
  for (int e = 0; e < num_endcaps; ++e) {
    if (!seen[e]) {
      throw InvalidArgumentError("derive_rois: endcap " + std::to_string(e) +
                                 " has no rendered pixels");
    }
    rois[e].u_min = std::max(0, rois[e].u_min - pad_px);
    rois[e].v_min = std::max(0, rois[e].v_min - pad_px);
    rois[e].u_max = std::min(width - 1, rois[e].u_max + pad_px);
    rois[e].v_max = std::min(height - 1, rois[e].v_max + pad_px);
  }
  return rois;
}

}  // namespace tenseg
