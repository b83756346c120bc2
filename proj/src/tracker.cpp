#include "tenseg/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "tenseg/errors.hpp"
#include "tenseg/rng.hpp"

namespace tenseg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<Vec3> endcaps_of_poses(const std::vector<RigidPose>& poses,
                                   const TensegrityTopology& topo) {
  std::vector<Vec3> q(topo.num_endcaps());
  for (int r = 0; r < topo.n_rods; ++r) {
    auto [a, b] = endcap_positions(poses[r], topo);
    q[2 * r] = a;
    q[2 * r + 1] = b;
  }
  return q;
}

double cable_measurement_for(const std::map<std::pair<int, int>, double>& m,
                             int i, int j) {
  auto it = m.find({i, j});
  if (it != m.end()) return it->second;
  it = m.find({j, i});
  if (it != m.end()) return it->second;
  throw InvalidArgumentError("correction_step: missing cable measurement for edge (" +
                             std::to_string(i) + "," + std::to_string(j) + ")");
}

}  // namespace

TrackerMode tracker_mode_from_name(const std::string& name) {
  if (name == "proposed") return TrackerMode::kProposed;
  if (name == "naive_icp") return TrackerMode::kNaiveIcp;
  if (name == "rigid_body") return TrackerMode::kRigidBody;
  if (name == "post_hoc_correction") return TrackerMode::kPostHocCorrection;
  if (name == "no_constraints") return TrackerMode::kNoConstraints;
  if (name == "no_rod_constraints") return TrackerMode::kNoRodConstraints;
  if (name == "static_weights") return TrackerMode::kStaticWeights;
  throw UsageError("unknown tracker mode '" + name + "'");
}

std::string tracker_mode_name(TrackerMode mode) {
  switch (mode) {
    case TrackerMode::kProposed: return "proposed";
    case TrackerMode::kNaiveIcp: return "naive_icp";
    case TrackerMode::kRigidBody: return "rigid_body";
    case TrackerMode::kPostHocCorrection: return "post_hoc_correction";
    case TrackerMode::kNoConstraints: return "no_constraints";
    case TrackerMode::kNoRodConstraints: return "no_rod_constraints";
    case TrackerMode::kStaticWeights: return "static_weights";
  }
  return "unknown";
}

TrackerConfig TrackerConfig::for_mode(TrackerMode mode) {
  TrackerConfig cfg;
  switch (mode) {
    case TrackerMode::kProposed:
      break;
    case TrackerMode::kNaiveIcp:
      cfg.enable_binary_loss = false;
      cfg.enable_rod_constraints = false;
      cfg.enable_ground_constraint = false;
      break;
    case TrackerMode::kRigidBody:
      cfg.rigid_body_mode = true;
      break;
    case TrackerMode::kPostHocCorrection:
      cfg.post_hoc_correction = true;
      break;
    case TrackerMode::kNoConstraints:
      cfg.enable_rod_constraints = false;
      cfg.enable_ground_constraint = false;
      break;
    case TrackerMode::kNoRodConstraints:
      cfg.enable_rod_constraints = false;
      break;
    case TrackerMode::kStaticWeights:
      cfg.static_binary_weights = true;
      break;
  }
  return cfg;
}

void TrackerConfig::validate() const {
  if (max_outer_iterations < 1) {
    throw InvalidArgumentError("tracker config: max_outer_iterations must be >= 1");
  }
  if (dummy_count < 0) throw InvalidArgumentError("tracker config: dummy_count must be >= 0");
  if (!(dmax.initial > 0.0) || !(dmax.floor > 0.0) || !(dmax.decay > 0.0) ||
      dmax.decay > 1.0) {
    throw InvalidArgumentError("tracker config: bad d_max schedule");
  }
  if (model_samples_per_endcap < 100) {
    throw InvalidArgumentError("tracker config: model_samples_per_endcap must be >= 100");
  }
}

FrameObservations collect_frame_observations(const ObservedFrame& frame,
                                             const CameraIntrinsics& intrinsics,
                                             const TensegrityTopology& topology) {
  FrameObservations out;
  out.endcap_points.resize(topology.num_endcaps());

  std::map<std::array<std::uint8_t, 6>, std::vector<Vec3>> by_range;
  for (int e = 0; e < topology.num_endcaps(); ++e) {
    const auto q = quantize_hsv_range(topology.endcap_hsv[e]);
    const std::array<std::uint8_t, 6> key{q.h_lo, q.h_hi, q.s_lo, q.s_hi, q.v_lo, q.v_hi};
    auto it = by_range.find(key);
    if (it == by_range.end()) {
      std::vector<Vec3> points;
      for (auto [u, v] : segment_endcap_pixels(frame, topology.endcap_hsv[e])) {
        if (auto p = project_to_3d(frame, intrinsics, u, v)) points.push_back(*p);
      }
      it = by_range.emplace(key, std::move(points)).first;
    }
    out.endcap_points[e] = it->second;
  }
  return out;
}

TrackerState initialize_from_rois(const ObservedFrame& frame,
                                  const std::vector<Roi>& rois,
                                  const CameraIntrinsics& intrinsics,
                                  const TensegrityTopology& topology) {
  if (static_cast<int>(rois.size()) != topology.num_endcaps()) {
    throw InvalidArgumentError("initialize_from_rois: need one RoI per endcap");
  }

  std::vector<Vec3> centroids(topology.num_endcaps());
  std::vector<std::vector<Vec3>> filtered_points(topology.num_endcaps());
  for (int e = 0; e < topology.num_endcaps(); ++e) {
    std::vector<Vec3> points;
    for (auto [u, v] : segment_endcap_pixels(frame, topology.endcap_hsv[e], &rois[e])) {
      if (auto p = project_to_3d(frame, intrinsics, u, v)) points.push_back(*p);
    }
    points = filter_endcap_noise(points, topology.endcap_radius);
    if (points.size() < 5) {
      throw InitializationFailureError(
          "initialize_from_rois: endcap " + std::to_string(e) + " has " +
              std::to_string(points.size()) + " usable points (need 5)",
          e);
    }
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    centroids[e] = c / static_cast<double>(points.size());
    filtered_points[e] = std::move(points);
  }

  TrackerState state;
  state.frame_index = -1;
  state.poses.resize(topology.n_rods);
  state.prev_model_points.assign(topology.n_rods, {});
  state.prev_observed_points.assign(topology.n_rods, {});
  for (int r = 0; r < topology.n_rods; ++r) {
    state.poses[r] = pose_from_endcaps(centroids[2 * r], centroids[2 * r + 1],
                                       Quat::Identity(), topology);
    auto& pool = state.prev_observed_points[r];
    pool = filtered_points[2 * r];
    pool.insert(pool.end(), filtered_points[2 * r + 1].begin(),
                filtered_points[2 * r + 1].end());
  }
  state.pair_cache = compute_pair_cache(state.poses, topology);
  state.body_shape = endcaps_of_poses(state.poses, topology);
  state.body_pose = RigidPose::identity();
  return state;
}

TransitionResult transition_step(const TrackerState& state,
                                 const std::vector<RigidPose>& current_poses,
                                 const FrameObservations& observations,
                                 const std::vector<EndcapModel>& models,
                                 const TensegrityTopology& topology,
                                 const TrackerConfig& config, int iteration) {
  const double d_max = dmax_schedule(iteration, config.dmax);
  const Vec3 camera = Vec3::Zero();
  const double gate = d_max + topology.endcap_radius;

  TransitionResult result;
  result.poses = current_poses;
  result.observations.resize(topology.num_endcaps());

  for (int r = 0; r < topology.n_rods; ++r) {
    std::vector<Correspondence> rod_correspondences;
    for (int e : {2 * r, 2 * r + 1}) {
      const auto visible = visible_model_points(models[e], current_poses[r], camera);
      const Vec3 center = current_poses[r].apply(models[e].local_center);

      std::vector<Vec3> gated;
      for (const auto& p : observations.endcap_points[e]) {
        if ((p - center).norm() <= gate) gated.push_back(p);
      }
      std::vector<Vec3> filtered = filter_endcap_noise(gated, topology.endcap_radius);
      auto cs = find_correspondences(visible, filtered, d_max);

      EndcapObservation& obs = result.observations[e];
      obs.endcap_index = e;
      obs.matched_count = static_cast<int>(cs.size());
      obs.visible_count = static_cast<int>(visible.size());
      obs.points = std::move(filtered);

      rod_correspondences.insert(rod_correspondences.end(), cs.begin(), cs.end());
    }

    const std::vector<Vec3> empty;
    const auto& prev_model = static_cast<int>(state.prev_model_points.size()) == topology.n_rods
                                 ? state.prev_model_points[r]
                                 : empty;
    const auto& prev_obs = static_cast<int>(state.prev_observed_points.size()) == topology.n_rods
                               ? state.prev_observed_points[r]
                               : empty;
    const std::uint64_t dummy_seed =
        seed_combine(config.seed, static_cast<std::uint64_t>(state.frame_index + 1),
                     static_cast<std::uint64_t>(r * 64 + iteration));
    rod_correspondences = add_dummy_points(std::move(rod_correspondences), prev_model,
                                           prev_obs, config.dummy_count, dummy_seed);

    if (rod_correspondences.size() >= 3) {
      try {
        const RigidPose local = kabsch_weighted(rod_correspondences);
        result.poses[r] = local.compose(current_poses[r]);
      } catch (const DegenerateGeometryError&) {
        // keep the previous pose
      }
    }
  }
  return result;
}

Weights compute_adaptive_weights(const std::vector<EndcapObservation>& observations,
                                 const TensegrityTopology& topology,
                                 const AdaptiveWeightParams& params) {
  Weights w;
  w.unary.resize(topology.num_endcaps());
  for (int e = 0; e < topology.num_endcaps(); ++e) {
    w.unary[e] = std::max(observations[e].visibility_ratio(), params.unary_floor);
  }
  w.binary.resize(topology.cables.size());
  for (std::size_t k = 0; k < topology.cables.size(); ++k) {
    const auto [i, j] = topology.cables[k];
    const double ri = observations[i].visibility_ratio();
    const double rj = observations[j].visibility_ratio();
    if (ri > params.ratio_high && rj > params.ratio_high) {
      w.binary[k] = 0.0;
    } else if (ri < params.ratio_low || rj < params.ratio_low) {
      w.binary[k] = params.binary_scale;
    } else {
      w.binary[k] = params.binary_scale * (1.0 - 0.5 * (ri + rj));
    }
  }
  return w;
}

std::vector<RodPairCache> compute_pair_cache(const std::vector<RigidPose>& poses,
                                             const TensegrityTopology& topology) {
  constexpr double kInteriorTol = 1e-9;
  std::vector<RodPairCache> cache;
  for (int i = 0; i < topology.n_rods; ++i) {
    auto [ai, bi] = endcap_positions(poses[i], topology);
    for (int j = i + 1; j < topology.n_rods; ++j) {
      auto [aj, bj] = endcap_positions(poses[j], topology);
      const auto cp = closest_points_between_segments({ai, bi}, {aj, bj});
      RodPairCache entry;
      entry.rod_i = i;
      entry.rod_j = j;
      entry.param_i = cp.param_first;
      entry.param_j = cp.param_second;
      entry.distance = cp.distance;
      entry.interior = cp.param_first > kInteriorTol &&
                       cp.param_first < 1.0 - kInteriorTol &&
                       cp.param_second > kInteriorTol &&
                       cp.param_second < 1.0 - kInteriorTol &&
                       cp.distance > 1e-12;
      if (entry.interior) {
        entry.direction = (cp.on_second - cp.on_first) / cp.distance;
      }
      cache.push_back(entry);
    }
  }
  return cache;
}

ConstraintSet build_constraints(const TrackerState& state,
                                const TensegrityTopology& topology,
                                const std::optional<GroundPlane>& ground,
                                const TrackerConfig& config) {
  ConstraintSet set;
  const int n = 3 * topology.num_endcaps();
  const double l_rod = topology.rod_length;
  const double d_rod = topology.rod_diameter;

  for (int r = 0; r < topology.n_rods; ++r) {
    const int ia = 3 * (2 * r);
    const int ib = 3 * (2 * r + 1);
    set.equalities.push_back([ia, ib, l_rod, n](const VecX& x, VecX* g) {
      const Vec3 d = x.segment<3>(ia) - x.segment<3>(ib);
      const double norm = std::max(d.norm(), 1e-12);
      if (g) {
        g->setZero(n);
        g->segment<3>(ia) = d / norm;
        g->segment<3>(ib) = -d / norm;
      }
      return norm - l_rod;
    });
    ++set.rod_length_count;
  }

  if (config.enable_rod_constraints) {
    for (const auto& pair : state.pair_cache) {
      if (!pair.interior) continue;
      const int ie = 3 * (2 * pair.rod_i);
      const int io = 3 * (2 * pair.rod_i + 1);
      const int je = 3 * (2 * pair.rod_j);
      const int jo = 3 * (2 * pair.rod_j + 1);
      const double ui = pair.param_i;
      const double uj = pair.param_j;
      const Vec3 dir = pair.direction;
      set.inequalities.push_back([ie, io, je, jo, ui, uj, dir, d_rod, n](const VecX& x, VecX* g) {
        const Vec3 ci = (1.0 - ui) * x.segment<3>(ie) + ui * x.segment<3>(io);
        const Vec3 cj = (1.0 - uj) * x.segment<3>(je) + uj * x.segment<3>(jo);
        if (g) {
          g->setZero(n);
          g->segment<3>(ie) = -(1.0 - ui) * dir;
          g->segment<3>(io) = -ui * dir;
          g->segment<3>(je) = (1.0 - uj) * dir;
          g->segment<3>(jo) = uj * dir;
        }
        return (cj - ci).dot(dir) - d_rod;
      });
      ++set.rod_pair_count;
    }
  }

  if (config.enable_ground_constraint && ground.has_value()) {
    const Mat3 rot = ground->rotation.toRotationMatrix();
    const Vec3 row_z = rot.row(2).transpose();
    const double tz = ground->translation.z();
    for (int e = 0; e < topology.num_endcaps(); ++e) {
      const int idx = 3 * e;
      set.inequalities.push_back([idx, row_z, tz, d_rod, n](const VecX& x, VecX* g) {
        if (g) {
          g->setZero(n);
          g->segment<3>(idx) = row_z;
        }
        return row_z.dot(x.segment<3>(idx)) + tz - 0.5 * d_rod;
      });
      ++set.ground_count;
    }
  }
  return set;
}

CorrectionResult correction_step(const std::vector<Vec3>& transition_endcaps,
                                 const std::map<std::pair<int, int>, double>& cable_measurements,
                                 const ConstraintSet& constraints,
                                 const Weights& weights,
                                 const TensegrityTopology& topology,
                                 const SolverConfig& solver_config) {
  const int num_endcaps = topology.num_endcaps();
  if (static_cast<int>(transition_endcaps.size()) != num_endcaps) {
    throw InvalidArgumentError("correction_step: endcap count mismatch");
  }
  const int n = 3 * num_endcaps;

  struct CableTerm {
    int i, j;
    double weight;
    double length;
  };
  std::vector<CableTerm> cable_terms;
  for (std::size_t k = 0; k < topology.cables.size(); ++k) {
    if (weights.binary[k] <= 0.0) continue;
    const auto [i, j] = topology.cables[k];
    cable_terms.push_back({i, j, weights.binary[k],
                           cable_measurement_for(cable_measurements, i, j)});
  }

  NlpProblem problem;
  problem.dimension = n;
  problem.initial_point.resize(n);
  for (int e = 0; e < num_endcaps; ++e) {
    problem.initial_point.segment<3>(3 * e) = transition_endcaps[e];
  }
  problem.objective = [&transition_endcaps, &weights, cable_terms, num_endcaps,
                       n](const VecX& x, VecX* g) {
    if (g) g->setZero(n);
    double f = 0.0;
    for (int e = 0; e < num_endcaps; ++e) {
      const Vec3 d = x.segment<3>(3 * e) - transition_endcaps[e];
      f += weights.unary[e] * d.squaredNorm();
      if (g) g->segment<3>(3 * e) += 2.0 * weights.unary[e] * d;
    }
    for (const auto& t : cable_terms) {
      const Vec3 d = x.segment<3>(3 * t.i) - x.segment<3>(3 * t.j);
      const double norm = std::max(d.norm(), 1e-12);
      const double resid = norm - t.length;
      f += t.weight * resid * resid;
      if (g) {
        const Vec3 dir = d / norm;
        g->segment<3>(3 * t.i) += 2.0 * t.weight * resid * dir;
        g->segment<3>(3 * t.j) -= 2.0 * t.weight * resid * dir;
      }
    }
    return f;
  };
  problem.equalities = constraints.equalities;
  problem.inequalities = constraints.inequalities;

  CorrectionResult out;
  out.solver = minimize_constrained(problem, solver_config);
  out.endcaps.resize(num_endcaps);
  for (int e = 0; e < num_endcaps; ++e) {
    out.endcaps[e] = out.solver.solution.segment<3>(3 * e);
  }
  return out;
}

namespace {

// Shared state refresh at the end of a tracked frame: final poses, the pools
// feeding next frame's dummy points, and the closest-pair cache.
void finalize_state(TrackerState& next, const TrackerState& prev,
                    const std::vector<RigidPose>& poses,
                    const FrameObservations& fobs,
                    const std::vector<EndcapModel>& models,
                    const TensegrityTopology& topology, double last_dmax) {
  next.frame_index = prev.frame_index + 1;
  next.poses = poses;
  next.ground = prev.ground;
  next.pair_cache = compute_pair_cache(poses, topology);
  next.prev_model_points.assign(topology.n_rods, {});
  next.prev_observed_points.assign(topology.n_rods, {});
  const Vec3 camera = Vec3::Zero();
  const double gate = last_dmax + topology.endcap_radius;
  for (int r = 0; r < topology.n_rods; ++r) {
    for (int e : {2 * r, 2 * r + 1}) {
      auto visible = visible_model_points(models[e], poses[r], camera);
      auto& mp = next.prev_model_points[r];
      mp.insert(mp.end(), visible.begin(), visible.end());

      const Vec3 center = poses[r].apply(models[e].local_center);
      std::vector<Vec3> gated;
      for (const auto& p : fobs.endcap_points[e]) {
        if ((p - center).norm() <= gate) gated.push_back(p);
      }
      auto filtered = filter_endcap_noise(gated, topology.endcap_radius);
      auto& op = next.prev_observed_points[r];
      op.insert(op.end(), filtered.begin(), filtered.end());
    }
  }
  next.body_shape = endcaps_of_poses(poses, topology);
  next.body_pose = prev.body_pose;
}

std::pair<TrackerState, FrameDiagnostics> track_frame_rigid_body(
    const TrackerState& state, const ObservedFrame& frame,
    const std::vector<EndcapModel>& models, const CameraIntrinsics& intrinsics,
    const TensegrityTopology& topology, const TrackerConfig& config) {
  const auto frame_start = Clock::now();
  FrameDiagnostics diag;
  diag.frame_index = state.frame_index + 1;

  const FrameObservations fobs = collect_frame_observations(frame, intrinsics, topology);

  // Shape pre-solve from the cable measurements, warm-started at the previous
  // shape, with rod lengths as hard equalities. A tiny anchor pins the rigid
  // gauge to the warm start.
  const auto t_shape = Clock::now();
  const int num_endcaps = topology.num_endcaps();
  const int n = 3 * num_endcaps;
  std::vector<Vec3> warm = state.body_shape;
  if (static_cast<int>(warm.size()) != num_endcaps) {
    warm = endcaps_of_poses(state.poses, topology);
  }

  struct CableTerm {
    int i, j;
    double length;
  };
  std::vector<CableTerm> cable_terms;
  for (const auto& [i, j] : topology.cables) {
    cable_terms.push_back({i, j, cable_measurement_for(frame.cable_measurements, i, j)});
  }

  NlpProblem shape_problem;
  shape_problem.dimension = n;
  shape_problem.initial_point.resize(n);
  for (int e = 0; e < num_endcaps; ++e) {
    shape_problem.initial_point.segment<3>(3 * e) = warm[e];
  }
  constexpr double kAnchor = 1e-6;
  shape_problem.objective = [cable_terms, warm, num_endcaps, n](const VecX& x, VecX* g) {
    if (g) g->setZero(n);
    double f = 0.0;
    for (const auto& t : cable_terms) {
      const Vec3 d = x.segment<3>(3 * t.i) - x.segment<3>(3 * t.j);
      const double norm = std::max(d.norm(), 1e-12);
      const double resid = norm - t.length;
      f += resid * resid;
      if (g) {
        const Vec3 dir = d / norm;
        g->segment<3>(3 * t.i) += 2.0 * resid * dir;
        g->segment<3>(3 * t.j) -= 2.0 * resid * dir;
      }
    }
    for (int e = 0; e < num_endcaps; ++e) {
      const Vec3 d = x.segment<3>(3 * e) - warm[e];
      f += kAnchor * d.squaredNorm();
      if (g) g->segment<3>(3 * e) += 2.0 * kAnchor * d;
    }
    return f;
  };
  TrackerConfig eq_only = config;
  eq_only.enable_rod_constraints = false;
  eq_only.enable_ground_constraint = false;
  shape_problem.equalities = build_constraints(state, topology, std::nullopt, eq_only).equalities;

  const SolverResult shape_solution = minimize_constrained(shape_problem, config.solver);
  std::vector<Vec3> shape(num_endcaps);
  for (int e = 0; e < num_endcaps; ++e) {
    shape[e] = shape_solution.solution.segment<3>(3 * e);
  }
  const double shape_ms = ms_since(t_shape);

  // Whole-robot ICP on the reconstructed rigid body.
  std::vector<RigidPose> shape_poses(topology.n_rods);
  for (int r = 0; r < topology.n_rods; ++r) {
    shape_poses[r] = pose_from_endcaps(shape[2 * r], shape[2 * r + 1],
                                       state.poses[r].rotation, topology);
  }

  std::vector<Vec3> dummy_model, dummy_observed;
  for (int r = 0; r < topology.n_rods && r < static_cast<int>(state.prev_model_points.size()); ++r) {
    dummy_model.insert(dummy_model.end(), state.prev_model_points[r].begin(),
                       state.prev_model_points[r].end());
    dummy_observed.insert(dummy_observed.end(), state.prev_observed_points[r].begin(),
                          state.prev_observed_points[r].end());
  }

  const Vec3 camera = Vec3::Zero();
  std::vector<Vec3> prev_endcaps = endcaps_of_poses(state.poses, topology);
  double last_dmax = config.dmax.initial;
  for (int k = 0; k < config.max_outer_iterations; ++k) {
    const auto t0 = Clock::now();
    const double d_max = dmax_schedule(k, config.dmax);
    last_dmax = d_max;
    const double gate = d_max + topology.endcap_radius;

    IterationDiagnostics it;
    it.d_max = d_max;
    it.visibility.resize(num_endcaps, 0.0);

    std::vector<Correspondence> body_correspondences;
    for (int r = 0; r < topology.n_rods; ++r) {
      for (int e : {2 * r, 2 * r + 1}) {
        const auto visible = visible_model_points(models[e], shape_poses[r], camera);
        const Vec3 center = shape_poses[r].apply(models[e].local_center);
        std::vector<Vec3> gated;
        for (const auto& p : fobs.endcap_points[e]) {
          if ((p - center).norm() <= gate) gated.push_back(p);
        }
        const auto filtered = filter_endcap_noise(gated, topology.endcap_radius);
        const auto cs = find_correspondences(visible, filtered, d_max);
        it.visibility[e] = visible.empty() ? 0.0
                                           : std::min(1.0, static_cast<double>(cs.size()) /
                                                               static_cast<double>(visible.size()));
        body_correspondences.insert(body_correspondences.end(), cs.begin(), cs.end());
      }
    }
    const std::uint64_t dummy_seed = seed_combine(
        config.seed, static_cast<std::uint64_t>(state.frame_index + 1),
        static_cast<std::uint64_t>(1000 + k));
    body_correspondences = add_dummy_points(std::move(body_correspondences), dummy_model,
                                            dummy_observed, config.dummy_count, dummy_seed);
    if (body_correspondences.size() >= 3) {
      try {
        const RigidPose delta = kabsch_weighted(body_correspondences);
        for (auto& pose : shape_poses) pose = delta.compose(pose);
      } catch (const DegenerateGeometryError&) {
      }
    }

    const auto q = endcaps_of_poses(shape_poses, topology);
    double displacement = 0.0;
    for (int e = 0; e < num_endcaps; ++e) displacement += (q[e] - prev_endcaps[e]).norm();
    prev_endcaps = q;

    it.displacement = displacement;
    it.transition_ms = ms_since(t0);
    it.correction_ms = k == 0 ? shape_ms : 0.0;
    it.solver_iterations = k == 0 ? shape_solution.iterations : 0;
    it.solver_converged = shape_solution.converged;
    diag.iterations.push_back(std::move(it));
    ++diag.iterations_used;
    if (displacement < config.convergence_displacement) break;
  }

  // Re-extract rod poses with continuous twist.
  std::vector<RigidPose> final_poses(topology.n_rods);
  const auto q = endcaps_of_poses(shape_poses, topology);
  for (int r = 0; r < topology.n_rods; ++r) {
    final_poses[r] = pose_from_endcaps(q[2 * r], q[2 * r + 1],
                                       state.poses[r].rotation, topology);
  }

  TrackerState next;
  finalize_state(next, state, final_poses, fobs, models, topology, last_dmax);
  diag.total_ms = ms_since(frame_start);
  return {std::move(next), std::move(diag)};
}

}  // namespace

std::pair<TrackerState, FrameDiagnostics> track_frame(
    const TrackerState& state, const ObservedFrame& frame,
    const std::vector<EndcapModel>& models, const CameraIntrinsics& intrinsics,
    const TensegrityTopology& topology, const TrackerConfig& config) {
  config.validate();
  if (static_cast<int>(state.poses.size()) != topology.n_rods) {
    throw InvalidArgumentError("track_frame: state has wrong rod count");
  }
  if (config.rigid_body_mode) {
    return track_frame_rigid_body(state, frame, models, intrinsics, topology, config);
  }

  const auto frame_start = Clock::now();
  FrameDiagnostics diag;
  diag.frame_index = state.frame_index + 1;

  const FrameObservations fobs = collect_frame_observations(frame, intrinsics, topology);
  const ConstraintSet constraints = build_constraints(state, topology, state.ground, config);
  const bool skip_correction = !config.enable_binary_loss &&
                               !config.enable_rod_constraints &&
                               !config.enable_ground_constraint;

  std::vector<RigidPose> current = state.poses;
  std::vector<Vec3> prev_endcaps = endcaps_of_poses(current, topology);
  std::vector<EndcapObservation> last_observations;
  double last_dmax = config.dmax.initial;

  for (int k = 0; k < config.max_outer_iterations; ++k) {
    IterationDiagnostics it;
    const auto t0 = Clock::now();
    TransitionResult trans =
        transition_step(state, current, fobs, models, topology, config, k);
    it.transition_ms = ms_since(t0);
    it.d_max = dmax_schedule(k, config.dmax);
    last_dmax = it.d_max;

    Weights weights = compute_adaptive_weights(trans.observations, topology, config.weights);
    if (config.static_binary_weights) {
      std::fill(weights.binary.begin(), weights.binary.end(), config.weights.binary_scale);
    }
    if (!config.enable_binary_loss) {
      std::fill(weights.binary.begin(), weights.binary.end(), 0.0);
    }
    it.visibility.resize(topology.num_endcaps());
    for (int e = 0; e < topology.num_endcaps(); ++e) {
      it.visibility[e] = trans.observations[e].visibility_ratio();
    }
    it.unary_weights = weights.unary;
    it.binary_weights = weights.binary;

    std::vector<Vec3> q = endcaps_of_poses(trans.poses, topology);
    std::vector<RigidPose> poses = trans.poses;
    if (!skip_correction && !config.post_hoc_correction) {
      const auto t1 = Clock::now();
      CorrectionResult corr = correction_step(q, frame.cable_measurements, constraints,
                                              weights, topology, config.solver);
      it.correction_ms = ms_since(t1);
      it.objective = corr.solver.objective_value;
      it.solver_iterations = corr.solver.iterations;
      it.solver_converged = corr.solver.converged;
      it.max_constraint_violation = corr.solver.max_constraint_violation;
      q = corr.endcaps;
      for (int r = 0; r < topology.n_rods; ++r) {
        try {
          poses[r] = pose_from_endcaps(q[2 * r], q[2 * r + 1],
                                       trans.poses[r].rotation, topology);
        } catch (const DegenerateGeometryError&) {
          poses[r] = trans.poses[r];
        }
      }
    }

    double displacement = 0.0;
    for (std::size_t e = 0; e < q.size(); ++e) displacement += (q[e] - prev_endcaps[e]).norm();
    it.displacement = displacement;
    prev_endcaps = q;
    current = poses;
    last_observations = std::move(trans.observations);

    diag.iterations.push_back(std::move(it));
    ++diag.iterations_used;
    if (displacement < config.convergence_displacement) break;
  }

  if (config.post_hoc_correction && !last_observations.empty()) {
    Weights weights = compute_adaptive_weights(last_observations, topology, config.weights);
    if (config.static_binary_weights) {
      std::fill(weights.binary.begin(), weights.binary.end(), config.weights.binary_scale);
    }
    if (!config.enable_binary_loss) {
      std::fill(weights.binary.begin(), weights.binary.end(), 0.0);
    }
    const auto t1 = Clock::now();
    const std::vector<Vec3> q_hat = endcaps_of_poses(current, topology);
    CorrectionResult corr = correction_step(q_hat, frame.cable_measurements, constraints,
                                            weights, topology, config.solver);
    auto& it = diag.iterations.back();
    it.correction_ms = ms_since(t1);
    it.objective = corr.solver.objective_value;
    it.solver_iterations = corr.solver.iterations;
    it.solver_converged = corr.solver.converged;
    it.max_constraint_violation = corr.solver.max_constraint_violation;
    for (int r = 0; r < topology.n_rods; ++r) {
      try {
        current[r] = pose_from_endcaps(corr.endcaps[2 * r], corr.endcaps[2 * r + 1],
                                       current[r].rotation, topology);
      } catch (const DegenerateGeometryError&) {
      }
    }
  }

  TrackerState next;
  finalize_state(next, state, current, fobs, models, topology, last_dmax);
  diag.total_ms = ms_since(frame_start);
  return {std::move(next), std::move(diag)};
}

}  // namespace tenseg
