#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tenseg/geometry.hpp"
#include "tenseg/perception.hpp"
#include "tenseg/robot_model.hpp"
#include "tenseg/solver.hpp"

namespace tenseg {

struct AdaptiveWeightParams {
  double unary_floor = 0.1;
  double binary_scale = 0.25;
  double ratio_high = 0.5;
  double ratio_low = 0.2;
};

/// Baseline and ablation presets (the proposed tracker plus the comparison
/// matrix: naive per-rod ICP, rigid-body reconstruction + ICP, post-hoc
/// correction, constraint and weight ablations).
enum class TrackerMode {
  kProposed,
  kNaiveIcp,
  kRigidBody,
  kPostHocCorrection,
  kNoConstraints,
  kNoRodConstraints,
  kStaticWeights,
};

TrackerMode tracker_mode_from_name(const std::string& name);
std::string tracker_mode_name(TrackerMode mode);

struct TrackerConfig {
  int max_outer_iterations = 6;
  DmaxSchedule dmax;
  int dummy_count = 50;
  AdaptiveWeightParams weights;
  bool enable_rod_constraints = true;
  bool enable_ground_constraint = true;
  bool enable_binary_loss = true;
  bool static_binary_weights = false;
  bool rigid_body_mode = false;
  bool post_hoc_correction = false;
  double convergence_displacement = 1e-4;  // meters, outer-loop early stop
  int model_samples_per_endcap = 300;
  std::uint64_t seed = 0;
  SolverConfig solver;

  static TrackerConfig for_mode(TrackerMode mode);
  void validate() const;
};

/// Per-endcap observation summary for one outer iteration.
struct EndcapObservation {
  int endcap_index = 0;
  std::vector<Vec3> points;  // filtered observed points, camera frame
  int matched_count = 0;     // model points with a real correspondence
  int visible_count = 0;     // rendered-visible model points at the estimate

  double visibility_ratio() const {
    if (visible_count <= 0) return 0.0;
    const double r = static_cast<double>(matched_count) / visible_count;
    return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
  }
};

/// Closest-pair geometry of one rod pair cached from the previous frame.
/// Params are interpolation factors from the even endcap toward the odd one,
/// so the cached points are linear in the current endcap variables.
struct RodPairCache {
  int rod_i = 0, rod_j = 0;
  double param_i = 0.0, param_j = 0.0;
  bool interior = false;    // both closest points strictly inside the axes
  Vec3 direction = Vec3::UnitX();  // unit c_i -> c_j at t-1, camera frame
  double distance = 0.0;
};

struct TrackerState {
  int frame_index = -1;
  std::vector<RigidPose> poses;
  std::vector<RodPairCache> pair_cache;
  std::optional<GroundPlane> ground;

  // Previous-step clouds feeding the dummy-point pools, per rod.
  std::vector<std::vector<Vec3>> prev_model_points;
  std::vector<std::vector<Vec3>> prev_observed_points;

  // Rigid-body baseline: last reconstructed shape (camera frame of the body)
  // and the body pose carrying it into the camera frame.
  std::vector<Vec3> body_shape;
  RigidPose body_pose;
};

struct Weights {
  std::vector<double> unary;   // per endcap
  std::vector<double> binary;  // per cable, topology order
};

struct ConstraintSet {
  std::vector<NlpFunction> equalities;
  std::vector<NlpFunction> inequalities;
  int rod_length_count = 0;
  int rod_pair_count = 0;
  int ground_count = 0;
};

struct IterationDiagnostics {
  double d_max = 0.0;
  std::vector<double> visibility;  // r per endcap
  std::vector<double> unary_weights;
  std::vector<double> binary_weights;
  double objective = 0.0;
  int solver_iterations = 0;
  bool solver_converged = true;
  double max_constraint_violation = 0.0;
  double displacement = 0.0;  // summed endcap movement vs previous iteration
  double transition_ms = 0.0;
  double correction_ms = 0.0;
};

struct FrameDiagnostics {
  int frame_index = 0;
  int iterations_used = 0;
  std::vector<IterationDiagnostics> iterations;
  double total_ms = 0.0;
};

/// Per-frame segmentation + back-projection, shared across outer iterations.
/// Endcaps with identical quantized HSV ranges share one segmentation pass.
struct FrameObservations {
  std::vector<std::vector<Vec3>> endcap_points;
};

FrameObservations collect_frame_observations(const ObservedFrame& frame,
                                             const CameraIntrinsics& intrinsics,
                                             const TensegrityTopology& topology);

/// Centroid-based start: segment each ROI, back-project, depth-filter, use
/// centroids as endcap positions and zero-twist axis rotations. Needs at
/// least 5 points per endcap; throws InitializationFailureError naming the
/// endcap otherwise.
TrackerState initialize_from_rois(const ObservedFrame& frame,
                                  const std::vector<Roi>& rois,
                                  const CameraIntrinsics& intrinsics,
                                  const TensegrityTopology& topology);

struct TransitionResult {
  std::vector<RigidPose> poses;                 // updated per-rod estimates
  std::vector<EndcapObservation> observations;  // 2N entries
};

/// One registration pass: per rod, visible model points of both endcaps are
/// matched against the observation at the scheduled d_max, dummy points are
/// appended, and the weighted Kabsch transform is left-composed. Rods whose
/// correspondence set is degenerate keep their pose.
TransitionResult transition_step(const TrackerState& state,
                                 const std::vector<RigidPose>& current_poses,
                                 const FrameObservations& observations,
                                 const std::vector<EndcapModel>& models,
                                 const TensegrityTopology& topology,
                                 const TrackerConfig& config, int iteration);

/// Unary w_i = max(r_i, floor); binary w_ij from the piecewise occlusion rule.
Weights compute_adaptive_weights(const std::vector<EndcapObservation>& observations,
                                 const TensegrityTopology& topology,
                                 const AdaptiveWeightParams& params);

/// Rod-length equalities, linearized rod-pair separation inequalities from
/// the cached closest pairs (interior pairs only), and per-endcap ground
/// clearances when a ground plane is present.
ConstraintSet build_constraints(const TrackerState& state,
                                const TensegrityTopology& topology,
                                const std::optional<GroundPlane>& ground,
                                const TrackerConfig& config);

struct CorrectionResult {
  std::vector<Vec3> endcaps;
  SolverResult solver;
};

/// Joint constrained optimization over all endcap positions, warm-started at
/// the transition estimates.
CorrectionResult correction_step(const std::vector<Vec3>& transition_endcaps,
                                 const std::map<std::pair<int, int>, double>& cable_measurements,
                                 const ConstraintSet& constraints,
                                 const Weights& weights,
                                 const TensegrityTopology& topology,
                                 const SolverConfig& solver_config);

/// Recomputes the closest-pair cache from the given poses.
std::vector<RodPairCache> compute_pair_cache(const std::vector<RigidPose>& poses,
                                             const TensegrityTopology& topology);

/// The full per-frame loop: alternating transition/correction with early
/// stopping, pose re-extraction with minimal twist, and cache refresh.
std::pair<TrackerState, FrameDiagnostics> track_frame(
    const TrackerState& state, const ObservedFrame& frame,
    const std::vector<EndcapModel>& models, const CameraIntrinsics& intrinsics,
    const TensegrityTopology& topology, const TrackerConfig& config);

}  // namespace tenseg
