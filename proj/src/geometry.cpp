#include "tenseg/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "tenseg/errors.hpp"

namespace tenseg {

double correspondence_weight(double distance, double d_max) {
  if (!(d_max > 0.0)) {
    throw InvalidArgumentError("correspondence_weight: d_max must be > 0");
  }
  if (distance > d_max) return 0.0;
  const double ratio = distance / d_max;
  return 1.0 - ratio * ratio;
}

RigidPose kabsch_weighted(const std::vector<Correspondence>& correspondences) {
  double weight_sum = 0.0;
  for (const auto& c : correspondences) weight_sum += c.weight;
  if (correspondences.size() < 3 || weight_sum <= 0.0) {
    throw DegenerateGeometryError("kabsch_weighted: need >= 3 correspondences with positive total weight", 0);
  }

  Vec3 centroid_model = Vec3::Zero();
  Vec3 centroid_observed = Vec3::Zero();
  for (const auto& c : correspondences) {
    centroid_model += c.weight * c.model_point;
    centroid_observed += c.weight * c.observed_point;
  }
  centroid_model /= weight_sum;
  centroid_observed /= weight_sum;

  Mat3 cross_cov = Mat3::Zero();
  for (const auto& c : correspondences) {
    cross_cov += c.weight * (c.model_point - centroid_model) *
                 (c.observed_point - centroid_observed).transpose();
  }

  Eigen::JacobiSVD<Mat3> svd(cross_cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();

  // Rank of the cross-covariance decides whether the rotation is unique:
  // rank 2 is fine (the reflection fix resolves the last axis), rank < 2 is not.
  const double sigma_tol = std::max(sigma(0) * 1e-9, 1e-300);
  int rank = 0;
  for (int i = 0; i < 3; ++i) {
    if (sigma(i) > sigma_tol) ++rank;
  }
  if (rank < 2) {
    throw DegenerateGeometryError("kabsch_weighted: degenerate point configuration (coincident or collinear)", rank);
  }

  Mat3 rotation = svd.matrixV() * svd.matrixU().transpose();
  if (rotation.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    rotation = svd.matrixV() * flip * svd.matrixU().transpose();
  }

  RigidPose pose;
  pose.rotation = Quat(rotation).normalized();
  pose.translation = centroid_observed - rotation * centroid_model;
  return pose;
}

SegmentClosestPoints closest_points_between_segments(const Segment& s1,
                                                     const Segment& s2) {
  const Vec3 d1 = s1.b - s1.a;
  const Vec3 d2 = s2.b - s2.a;
  const Vec3 r = s1.a - s2.a;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  const double c = d1.dot(r);
  const double b = d1.dot(d2);
  const double denom = a * e - b * b;

  auto clamp01 = [](double x) { return std::clamp(x, 0.0, 1.0); };

  double s;
  if (denom > 1e-12 * a * e) {
    s = clamp01((b * f - c * e) / denom);
  } else {
    // Parallel. The minimizing set in s is the projection overlap; take its
    // low end so (s, t) is lexicographically minimal.
    const double s_at_t0 = -c / a;
    const double s_at_t1 = (-c + b) / a;
    const double lo = std::max(0.0, std::min(s_at_t0, s_at_t1));
    const double hi = std::min(1.0, std::max(s_at_t0, s_at_t1));
    if (lo <= hi) {
      s = lo;
    } else {
      s = clamp01(s_at_t0 < 0.0 ? 0.0 : 1.0);
    }
  }

  double t = (b * s + f) / e;
  if (t < 0.0 || t > 1.0) {
    t = clamp01(t);
    s = clamp01((b * t - c) / a);
  }

  SegmentClosestPoints out;
  out.param_first = s;
  out.param_second = t;
  out.on_first = s1.a + s * d1;
  out.on_second = s2.a + t * d2;
  out.distance = (out.on_first - out.on_second).norm();
  return out;
}

Quat minimal_rotation_between(const Vec3& v_from, const Vec3& v_to) {
  const double nf = v_from.norm();
  const double nt = v_to.norm();
  if (nf <= 0.0 || nt <= 0.0) {
    throw InvalidArgumentError("minimal_rotation_between: zero direction vector");
  }
  const Vec3 from = v_from / nf;
  const Vec3 to = v_to / nt;
  const double d = from.dot(to);

  if (d >= 1.0 - 1e-14) return Quat::Identity();

  if (d <= -1.0 + 1e-12) {
    // Antiparallel: rotate pi about a perpendicular axis picked by crossing
    // with the smallest-magnitude canonical basis vector of v_from.
    int axis_index = 0;
    double best = std::abs(from.x());
    if (std::abs(from.y()) < best) {
      best = std::abs(from.y());
      axis_index = 1;
    }
    if (std::abs(from.z()) < best) axis_index = 2;
    const Vec3 basis = Vec3::Unit(axis_index);
    const Vec3 axis = from.cross(basis).normalized();
    return Quat(Eigen::AngleAxisd(std::numbers::pi, axis));
  }

  // Half-angle construction: (1 + dot, cross) normalized.
  const Vec3 cr = from.cross(to);
  Quat q(1.0 + d, cr.x(), cr.y(), cr.z());
  q.normalize();
  return q;
}

double geodesic_distance(const Quat& r1, const Quat& r2) {
  const Quat q = (r1.conjugate() * r2).normalized();
  return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
}

}  // namespace tenseg
