#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tenseg/errors.hpp"
#include "tenseg/robot_model.hpp"
#include "tenseg/rng.hpp"

using namespace tenseg;

namespace {

Quat random_rotation(Rng& rng) {
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q;
}

}  // namespace

TEST_CASE("default topology is valid and matches the experiment dimensions") {
  const auto topo = TensegrityTopology::three_bar_default();
  CHECK(topo.n_rods == 3);
  CHECK(topo.rod_length == doctest::Approx(0.36));
  CHECK(topo.endcap_radius == doctest::Approx(0.0175));
  CHECK(topo.cables.size() == 9);
  CHECK(topo.endcap_hsv.size() == 6);
  CHECK_NOTHROW(topo.validate());

  auto broken = topo;
  broken.cables.push_back({0, 1});  // same rod
  CHECK_THROWS_AS(broken.validate(), InvalidArgumentError);

  auto bad_dims = topo;
  bad_dims.rod_diameter = 0.5;  // > rod_length
  CHECK_THROWS_AS(bad_dims.validate(), InvalidArgumentError);
}

TEST_CASE("endcap_positions for canonical poses") {
  const auto topo = TensegrityTopology::three_bar_default();

  auto [ei, ej] = endcap_positions(RigidPose::identity(), topo);
  CHECK((ei - Vec3(0, 0, 0.18)).norm() < 1e-15);
  CHECK((ej - Vec3(0, 0, -0.18)).norm() < 1e-15);

  RigidPose shifted;
  shifted.translation = Vec3(1, 0, 0);
  auto [si, sj] = endcap_positions(shifted, topo);
  CHECK((si - Vec3(1, 0, 0.18)).norm() < 1e-15);
  CHECK((sj - Vec3(1, 0, -0.18)).norm() < 1e-15);

  RigidPose rx90;
  rx90.rotation = Quat(Eigen::AngleAxisd(std::numbers::pi / 2.0, Vec3::UnitX()));
  auto [ri, rj] = endcap_positions(rx90, topo);
  CHECK((ri - Vec3(0, -0.18, 0)).norm() < 1e-12);
  CHECK((rj - Vec3(0, 0.18, 0)).norm() < 1e-12);
}

TEST_CASE("pose_from_endcaps basics") {
  const auto topo = TensegrityTopology::three_bar_default();

  const RigidPose p = pose_from_endcaps({0, 0, 0.18}, {0, 0, -0.18},
                                        Quat::Identity(), topo);
  CHECK(p.translation.norm() < 1e-15);
  CHECK(geodesic_distance(p.rotation, Quat::Identity()) < 1e-12);

  // Axis moved into +y from a previous identity: minimal twist-free rotation
  // is -90 degrees about x.
  const RigidPose q = pose_from_endcaps({0, 0.18, 0}, {0, -0.18, 0},
                                        Quat::Identity(), topo);
  const Quat expect(Eigen::AngleAxisd(-std::numbers::pi / 2.0, Vec3::UnitX()));
  CHECK(geodesic_distance(q.rotation, expect) < 1e-12);
  CHECK((q.translation - Vec3(0, 0, 0)).norm() < 1e-15);

  CHECK_THROWS_AS(pose_from_endcaps({1, 2, 3}, {1, 2, 3}, Quat::Identity(), topo),
                  DegenerateGeometryError);
}

TEST_CASE("pose_from_endcaps twist minimality against brute force") {
  const auto topo = TensegrityTopology::three_bar_default();
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const Quat previous = random_rotation(rng);
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    if (axis.norm() < 1e-6) continue;
    axis.normalize();
    const Vec3 mid(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Vec3 qi = mid + 0.18 * axis;
    const Vec3 qj = mid - 0.18 * axis;

    const RigidPose pose = pose_from_endcaps(qi, qj, previous, topo);
    CHECK((pose.rotation * Vec3::UnitZ() - axis).norm() < 1e-9);

    const double achieved = geodesic_distance(pose.rotation, previous);
    double best_sampled = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 360; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / 360.0;
      const Quat twisted =
          (Quat(Eigen::AngleAxisd(theta, axis)) * pose.rotation).normalized();
      best_sampled = std::min(best_sampled, geodesic_distance(twisted, previous));
    }
    CHECK(achieved <= best_sampled + 1e-3);
  }
}

TEST_CASE("endcap roundtrip and exact rod length") {
  const auto topo = TensegrityTopology::three_bar_default();
  Rng rng(37);
  for (int trial = 0; trial < 500; ++trial) {
    const Quat rot = random_rotation(rng);
    const Vec3 mid(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0, 2));
    Vec3 axis = rot * Vec3::UnitZ();
    const Vec3 qi = mid + 0.18 * axis;
    const Vec3 qj = mid - 0.18 * axis;

    const RigidPose pose = pose_from_endcaps(qi, qj, rot, topo);
    auto [ei, ej] = endcap_positions(pose, topo);
    CHECK((ei - qi).norm() < 1e-9);
    CHECK((ej - qj).norm() < 1e-9);
    CHECK(std::abs((ei - ej).norm() - topo.rod_length) < 1e-12);
  }
}

TEST_CASE("sample_endcap_model sampling properties") {
  const auto topo = TensegrityTopology::three_bar_default();

  CHECK_THROWS_AS(sample_endcap_model(topo, 99, 1), InvalidArgumentError);

  const auto models = sample_endcap_model(topo, 200, 42);
  REQUIRE(models.size() == 6);
  for (const auto& m : models) {
    CHECK(static_cast<int>(m.points.size()) == 200);
    CHECK((m.local_center - topo.local_endcap_center(m.endcap_index)).norm() < 1e-15);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : m.points) {
      CHECK(std::abs((p - m.local_center).norm() - 0.0175) < 1e-9);
      mean += p;
    }
    mean /= static_cast<double>(m.points.size());
    CHECK((mean - m.local_center).norm() < 0.002);
  }

  const auto again = sample_endcap_model(topo, 200, 42);
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < models[i].points.size(); ++j) {
      CHECK((models[i].points[j] - again[i].points[j]).norm() == 0.0);
    }
  }

  const auto other_seed = sample_endcap_model(topo, 200, 43);
  CHECK((models[0].points[0] - other_seed[0].points[0]).norm() > 0.0);
}
