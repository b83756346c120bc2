#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tenseg/errors.hpp"
#include "tenseg/geometry.hpp"
#include "tenseg/perception.hpp"
#include "tenseg/rng.hpp"

using namespace tenseg;

namespace {

ObservedFrame blank_frame(int w, int h) {
  ObservedFrame f;
  f.allocate(w, h);
  return f;
}

void paint(ObservedFrame& f, int u, int v, double hue_deg, double s, double val,
           float depth) {
  const auto i = f.at(u, v);
  f.hue[i] = hue_to_u8(hue_deg);
  f.sat[i] = unit_to_u8(s);
  f.val[i] = unit_to_u8(val);
  f.depth[i] = depth;
}

}  // namespace

TEST_CASE("project_to_3d") {
  CameraIntrinsics intr{600, 600, 640, 360, 1280, 720};
  intr.validate();
  auto f = blank_frame(1280, 720);
  f.depth[f.at(640, 360)] = 1.0f;
  f.depth[f.at(1240, 360)] = 0.5f;

  auto p = project_to_3d(f, intr, 640, 360);
  REQUIRE(p.has_value());
  CHECK((*p - Vec3(0, 0, 1)).norm() < 1e-12);

  auto q = project_to_3d(f, intr, 1240, 360);
  REQUIRE(q.has_value());
  CHECK((*q - Vec3(0.5, 0, 0.5)).norm() < 1e-12);

  CHECK(!project_to_3d(f, intr, 0, 0).has_value());
  CHECK_THROWS_AS(project_to_3d(f, intr, -1, 10), InvalidArgumentError);
  CHECK_THROWS_AS(project_to_3d(f, intr, 1280, 10), InvalidArgumentError);
}

TEST_CASE("segment_endcap_pixels finds exactly the painted pixels") {
  auto f = blank_frame(64, 32);
  HsvRange range{100, 140, 0.5, 1.0, 0.5, 1.0};
  // 40 in-range pixels, everything else far out of range.
  for (int i = 0; i < 64 * 32; ++i) {
    f.hue[i] = hue_to_u8(200);
    f.sat[i] = unit_to_u8(0.2);
    f.val[i] = unit_to_u8(0.2);
  }
  int painted = 0;
  for (int v = 4; v < 8; ++v) {
    for (int u = 10; u < 20; ++u) {
      paint(f, u, v, 120, 0.8, 0.8, 1.0f);
      ++painted;
    }
  }
  REQUIRE(painted == 40);
  auto pixels = segment_endcap_pixels(f, range);
  CHECK(pixels.size() == 40);
  for (auto [u, v] : pixels) {
    CHECK(u >= 10);
    CHECK(u < 20);
    CHECK(v >= 4);
    CHECK(v < 8);
  }

  Roi half{10, 4, 14, 7};
  auto in_roi = segment_endcap_pixels(f, range, &half);
  CHECK(in_roi.size() == 20);
}

TEST_CASE("segment_endcap_pixels hue wraparound") {
  auto f = blank_frame(4, 1);
  paint(f, 0, 0, 5, 0.8, 0.8, 1.0f);
  paint(f, 1, 0, 355, 0.8, 0.8, 1.0f);
  paint(f, 2, 0, 180, 0.8, 0.8, 1.0f);
  paint(f, 3, 0, 12, 0.8, 0.8, 1.0f);
  HsvRange wrap{350, 10, 0.5, 1.0, 0.5, 1.0};
  auto pixels = segment_endcap_pixels(f, wrap);
  REQUIRE(pixels.size() == 2);
  CHECK(pixels[0].first == 0);
  CHECK(pixels[1].first == 1);
}

TEST_CASE("filter_endcap_noise depth window") {
  const std::vector<Vec3> pts = {{0, 0, 0.50}, {0, 0, 0.505}, {0, 0, 0.53}};
  auto kept = filter_endcap_noise(pts, 0.0175);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].z() == doctest::Approx(0.50));
  CHECK(kept[1].z() == doctest::Approx(0.505));

  auto all = filter_endcap_noise({{0, 0, 0.5}, {0, 0, 0.51}}, 0.0175);
  CHECK(all.size() == 2);

  auto single = filter_endcap_noise({{1, 2, 3}}, 0.0175);
  CHECK(single.size() == 1);

  CHECK(filter_endcap_noise({}, 0.0175).empty());

  // Min depth preserved; output is a subset in order.
  Rng rng(5);
  std::vector<Vec3> cloud;
  for (int i = 0; i < 200; ++i) {
    cloud.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 0.6));
  }
  auto filtered = filter_endcap_noise(cloud, 0.0175);
  REQUIRE(!filtered.empty());
  double min_in = 1e9, min_out = 1e9;
  for (const auto& p : cloud) min_in = std::min(min_in, p.z());
  for (const auto& p : filtered) min_out = std::min(min_out, p.z());
  CHECK(min_in == doctest::Approx(min_out));
  std::size_t cursor = 0;
  for (const auto& p : filtered) {
    while (cursor < cloud.size() && (cloud[cursor] - p).norm() > 0) ++cursor;
    CHECK(cursor < cloud.size());
  }
}

TEST_CASE("visible_model_points keeps the camera-facing hemisphere") {
  auto topo = TensegrityTopology::three_bar_default();
  const auto models = sample_endcap_model(topo, 300, 9);
  Rng rng(41);

  RigidPose pose;  // endcap 0 center lands at (0,0,1)
  pose.translation = Vec3(0, 0, 1.0 - 0.18);
  const Vec3 cam(0, 0, 0);
  const auto visible = visible_model_points(models[0], pose, cam);
  CHECK(!visible.empty());
  for (const auto& p : visible) CHECK(p.z() < 1.0);

  for (int trial = 0; trial < 100; ++trial) {
    Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    RigidPose rp{q, Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                         rng.uniform(0.8, 1.5))};
    const auto vis = visible_model_points(models[0], rp, cam);
    const double frac = static_cast<double>(vis.size()) / models[0].points.size();
    CHECK(frac >= 0.4);
    CHECK(frac <= 0.6);

    // Visible and hidden partition the model.
    const Vec3 center = rp.apply(models[0].local_center);
    std::size_t hidden = 0;
    for (const auto& lp : models[0].points) {
      const Vec3 wp = rp.apply(lp);
      if ((wp - center).dot(cam - center) <= 0.0) ++hidden;
    }
    CHECK(hidden + vis.size() == models[0].points.size());
  }

  // Degenerate: camera at the endcap center sees nothing (strict inequality).
  RigidPose at_cam;
  at_cam.translation = Vec3(0, 0, -0.18);
  CHECK(visible_model_points(models[0], at_cam, cam).empty());
}

TEST_CASE("dmax_schedule geometric decay with a floor") {
  DmaxSchedule cfg;  // defaults 0.10, 0.7, 0.01
  CHECK(dmax_schedule(0, cfg) == doctest::Approx(0.10));
  CHECK(dmax_schedule(2, cfg) == doctest::Approx(0.049));
  CHECK(dmax_schedule(20, cfg) == doctest::Approx(0.01));
  for (int k = 0; k < 30; ++k) {
    CHECK(dmax_schedule(k + 1, cfg) <= dmax_schedule(k, cfg) + 1e-15);
  }
  CHECK_THROWS_AS(dmax_schedule(-1, cfg), InvalidArgumentError);
}

TEST_CASE("find_correspondences basics") {
  Rng rng(43);
  std::vector<Vec3> model;
  for (int i = 0; i < 60; ++i) {
    model.emplace_back(rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02),
                       rng.uniform(0.48, 0.52));
  }

  SUBCASE("identical clouds match with weight 1") {
    auto cs = find_correspondences(model, model, 0.05);
    REQUIRE(cs.size() == model.size());
    for (const auto& c : cs) {
      CHECK(c.weight == doctest::Approx(1.0));
      CHECK((c.model_point - c.observed_point).norm() == 0.0);
    }
  }

  SUBCASE("observation shifted beyond 2*d_max matches nothing") {
    std::vector<Vec3> shifted;
    for (const auto& p : model) shifted.push_back(p + Vec3(0.1, 0, 0));
    CHECK(find_correspondences(model, shifted, 0.05).empty());
  }

  SUBCASE("equidistant tie goes to the lower observed index") {
    const std::vector<Vec3> m = {{0, 0, 0}};
    const std::vector<Vec3> obs = {{0.01, 0, 0}, {-0.01, 0, 0}};
    auto cs = find_correspondences(m, obs, 0.05);
    REQUIRE(cs.size() == 1);
    CHECK((cs[0].observed_point - obs[0]).norm() == 0.0);
  }
}

TEST_CASE("grid path equals the brute-force oracle") {
  Rng rng(47);
  for (int trial = 0; trial < 40; ++trial) {
    const double d_max = rng.uniform(0.01, 0.2);
    std::vector<Vec3> model, observed;
    const int nm = 1 + static_cast<int>(rng.uniform_index(150));
    const int no = 1 + static_cast<int>(rng.uniform_index(400));
    for (int i = 0; i < nm; ++i) {
      model.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                         rng.uniform(0.3, 0.9));
    }
    for (int i = 0; i < no; ++i) {
      observed.emplace_back(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                            rng.uniform(0.3, 0.9));
    }
    const auto brute = find_correspondences_brute(model, observed, d_max);
    const auto grid = find_correspondences(model, observed, d_max, 0);
    REQUIRE(brute.size() == grid.size());
    for (std::size_t i = 0; i < brute.size(); ++i) {
      CHECK((brute[i].model_point - grid[i].model_point).norm() == 0.0);
      CHECK((brute[i].observed_point - grid[i].observed_point).norm() == 0.0);
      CHECK(brute[i].weight == grid[i].weight);
    }
    for (const auto& c : brute) {
      const double d = (c.model_point - c.observed_point).norm();
      CHECK(d <= d_max);
      CHECK(c.weight == doctest::Approx(correspondence_weight(d, d_max)));
    }
  }
}

TEST_CASE("add_dummy_points") {
  std::vector<Vec3> prev_model = {{0, 0, 0.5}, {0.01, 0, 0.5}, {0, 0.01, 0.5}};
  std::vector<Vec3> prev_obs = {{0.02, 0, 0.5}, {0, 0.02, 0.5}};

  SUBCASE("count zero leaves input unchanged") {
    std::vector<Correspondence> cs = {{{0, 0, 0}, {0, 0, 0}, 1.0}};
    auto out = add_dummy_points(cs, prev_model, prev_obs, 0, 1);
    CHECK(out.size() == 1);
  }

  SUBCASE("real weights 1.0 give dummies of 0.5") {
    std::vector<Correspondence> cs(4, Correspondence{{0, 0, 0.5}, {0, 0, 0.5}, 1.0});
    auto out = add_dummy_points(cs, prev_model, prev_obs, 50, 1);
    REQUIRE(out.size() == 54);
    for (std::size_t i = 4; i < out.size(); ++i) {
      CHECK(out[i].weight == doctest::Approx(0.5));
      CHECK((out[i].model_point - out[i].observed_point).norm() == 0.0);
    }
  }

  SUBCASE("no real correspondences: dummies weigh 0.5 and anchor identity") {
    auto out = add_dummy_points({}, prev_model, prev_obs, 50, 7);
    REQUIRE(out.size() == 50);
    for (const auto& c : out) CHECK(c.weight == doctest::Approx(0.5));
    const RigidPose local = kabsch_weighted(out);
    CHECK(local.translation.norm() < 1e-6);
    CHECK(geodesic_distance(local.rotation, Quat::Identity()) < 1e-6);
  }

  SUBCASE("deterministic per seed") {
    auto a = add_dummy_points({}, prev_model, prev_obs, 20, 99);
    auto b = add_dummy_points({}, prev_model, prev_obs, 20, 99);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK((a[i].model_point - b[i].model_point).norm() == 0.0);
    }
  }
}

TEST_CASE("detect_ground_plane on a synthetic plane") {
  CameraIntrinsics intr{600, 600, 50, 25, 100, 50};
  auto f = blank_frame(100, 50);
  for (int v = 0; v < 50; ++v) {
    for (int u = 0; u < 100; ++u) {
      f.depth[f.at(u, v)] = 0.8f;
    }
  }
  RansacConfig cfg{200, 0.01, 12345};

  SUBCASE("noise-free") {
    const auto plane = detect_ground_plane(f, intr, cfg);
    CHECK(plane.inlier_count == 5000);
    const Vec3 n = plane.rotation.conjugate() * Vec3::UnitZ();
    const double angle_deg =
        std::acos(std::clamp(n.dot(Vec3(0, 0, -1)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
    CHECK(angle_deg < 0.5);
    CHECK(std::abs(plane.height_of(Vec3(0.1, 0.1, 0.8))) < 1e-4);
    CHECK(plane.height_of(Vec3(0, 0, 0)) > 0.0);  // +z toward the camera
  }

  SUBCASE("20% added outliers") {
    CameraIntrinsics intr2{600, 600, 50, 30, 100, 60};
    auto g = blank_frame(100, 60);
    for (int v = 0; v < 50; ++v) {
      for (int u = 0; u < 100; ++u) g.depth[g.at(u, v)] = 0.8f;
    }
    Rng rng(31337);
    for (int v = 50; v < 60; ++v) {
      for (int u = 0; u < 100; ++u) {
        g.depth[g.at(u, v)] = static_cast<float>(rng.uniform(0.3, 0.75));
      }
    }
    const auto plane = detect_ground_plane(g, intr2, cfg);
    CHECK(plane.inlier_count >= 4900);
    const Vec3 n = plane.rotation.conjugate() * Vec3::UnitZ();
    const double angle_deg =
        std::acos(std::clamp(n.dot(Vec3(0, 0, -1)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
    CHECK(angle_deg < 1.0);
  }

  SUBCASE("determinism") {
    const auto a = detect_ground_plane(f, intr, cfg);
    const auto b = detect_ground_plane(f, intr, cfg);
    CHECK(a.inlier_count == b.inlier_count);
    CHECK((a.translation - b.translation).norm() == 0.0);
    CHECK(geodesic_distance(a.rotation, b.rotation) == 0.0);
  }

  SUBCASE("too few points") {
    auto tiny = blank_frame(4, 1);
    tiny.depth[0] = 1.0f;
    tiny.depth[1] = 1.0f;
    CHECK_THROWS_AS(detect_ground_plane(tiny, CameraIntrinsics{600, 600, 2, 0, 4, 1}, cfg),
                    PlaneNotFoundError);
  }
}
