#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <vector>

namespace tenseg {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform of one rod in the camera frame.
struct RigidPose {
  Quat rotation{Quat::Identity()};
  Vec3 translation{Vec3::Zero()};

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidPose compose(const RigidPose& rhs) const {
    return {(rotation * rhs.rotation).normalized(),
            rotation * rhs.translation + translation};
  }

  RigidPose inverse() const {
    const Quat ri = rotation.conjugate();
    return {ri, ri * (-translation)};
  }

  static RigidPose identity() { return {}; }
};

/// One model/observed point pair with its registration weight in [0, 1].
struct Correspondence {
  Vec3 model_point;
  Vec3 observed_point;
  double weight = 1.0;
};

/// Finite segment on a rod's main axis. |b - a| must be > 0.
struct Segment {
  Vec3 a;
  Vec3 b;
};

struct SegmentClosestPoints {
  Vec3 on_first;
  Vec3 on_second;
  double distance = 0.0;
  double param_first = 0.0;   // c1 = a1 + s*(b1-a1), s in [0,1]
  double param_second = 0.0;  // c2 = a2 + t*(b2-a2), t in [0,1]
};

/// Registration weight w(d) = 1 - (d/d_max)^2 for d <= d_max, else 0.
/// Throws InvalidArgumentError for d_max <= 0.
double correspondence_weight(double distance, double d_max);

/// Weighted rigid alignment (Kabsch, cross-covariance + 3x3 SVD with
/// reflection fix). Returns the transform T minimizing
/// sum_i w_i ||T(model_i) - observed_i||^2 with det(R) = +1.
/// Throws DegenerateGeometryError (carrying the rank found) when the
/// weighted model points are coincident or collinear.
RigidPose kabsch_weighted(const std::vector<Correspondence>& correspondences);

/// Closest points between two non-degenerate segments. When the pair is
/// non-unique (parallel overlap) the smallest (s, t) in lexicographic order
/// is returned so constraint caching stays deterministic.
SegmentClosestPoints closest_points_between_segments(const Segment& s1,
                                                     const Segment& s2);

/// Smallest-angle rotation carrying direction v_from to direction v_to.
/// Antiparallel inputs rotate 180 degrees about the axis obtained by
/// crossing v_from with its smallest-magnitude canonical basis vector.
/// Throws InvalidArgumentError on a zero vector.
Quat minimal_rotation_between(const Vec3& v_from, const Vec3& v_to);

/// Angle of r1^-1 * r2 in [0, pi].
double geodesic_distance(const Quat& r1, const Quat& r2);

}  // namespace tenseg
