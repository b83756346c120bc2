#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cstring>
#include <string>
#include <vector>

#include "tenseg/kernels/kernels.hpp"
#include "tenseg/rng.hpp"

using namespace tenseg;
using namespace tenseg::kernels;

namespace {

RenderScene random_scene(Rng& rng, bool with_plane) {
  RenderScene sc;
  const int ns = 1 + static_cast<int>(rng.uniform_index(6));
  for (int i = 0; i < ns; ++i) {
    sc.sph_x.push_back(static_cast<float>(rng.uniform(-0.5, 0.5)));
    sc.sph_y.push_back(static_cast<float>(rng.uniform(-0.5, 0.5)));
    sc.sph_z.push_back(static_cast<float>(rng.uniform(0.5, 2.0)));
    sc.sph_r.push_back(static_cast<float>(rng.uniform(0.01, 0.2)));
  }
  const int ncyl = static_cast<int>(rng.uniform_index(4));
  for (int i = 0; i < ncyl; ++i) {
    Eigen::Vector3f axis(static_cast<float>(rng.normal()),
                         static_cast<float>(rng.normal()),
                         static_cast<float>(rng.normal()));
    if (axis.norm() < 1e-3f) axis = Eigen::Vector3f(0, 0, 1);
    axis.normalize();
    sc.cyl_px.push_back(static_cast<float>(rng.uniform(-0.5, 0.5)));
    sc.cyl_py.push_back(static_cast<float>(rng.uniform(-0.5, 0.5)));
    sc.cyl_pz.push_back(static_cast<float>(rng.uniform(0.5, 2.0)));
    sc.cyl_ux.push_back(axis.x());
    sc.cyl_uy.push_back(axis.y());
    sc.cyl_uz.push_back(axis.z());
    sc.cyl_len.push_back(static_cast<float>(rng.uniform(0.1, 0.5)));
    sc.cyl_r.push_back(static_cast<float>(rng.uniform(0.01, 0.1)));
  }
  if (with_plane) {
    Eigen::Vector3f n(static_cast<float>(rng.uniform(-0.2, 0.2)),
                      static_cast<float>(rng.uniform(-0.2, 0.2)), -1.0f);
    n.normalize();
    sc.has_plane = true;
    sc.plane_nx = n.x();
    sc.plane_ny = n.y();
    sc.plane_nz = n.z();
    sc.plane_off = static_cast<float>(-rng.uniform(1.0, 2.0));
  }
  return sc;
}

}  // namespace

TEST_CASE("hsv mask honors plain and wraparound ranges") {
  const auto& k = scalar_kernels();
  std::vector<std::uint8_t> h = {0, 4, 128, 250, 255};
  std::vector<std::uint8_t> s(h.size(), 200);
  std::vector<std::uint8_t> v(h.size(), 200);
  std::vector<std::uint8_t> mask(h.size(), 9);

  HsvRangeU8 plain{2, 130, 100, 255, 100, 255};
  k.hsv_mask(h.data(), s.data(), v.data(), h.size(), plain, mask.data());
  CHECK(mask == std::vector<std::uint8_t>({0, 1, 1, 0, 0}));

  HsvRangeU8 wrap{248, 7, 100, 255, 100, 255};
  k.hsv_mask(h.data(), s.data(), v.data(), h.size(), wrap, mask.data());
  CHECK(mask == std::vector<std::uint8_t>({1, 1, 0, 1, 1}));

  HsvRangeU8 sat_gate{0, 255, 210, 255, 0, 255};
  k.hsv_mask(h.data(), s.data(), v.data(), h.size(), sat_gate, mask.data());
  CHECK(mask == std::vector<std::uint8_t>({0, 0, 0, 0, 0}));
}

TEST_CASE("min_sqdist breaks ties toward the lowest index") {
  const auto& k = scalar_kernels();
  std::vector<float> xs = {1.f, 2.f, 1.f, 1.f};
  std::vector<float> ys = {0.f, 0.f, 0.f, 0.f};
  std::vector<float> zs = {0.f, 0.f, 0.f, 0.f};
  std::size_t idx = npos;
  float d2 = -1.f;
  k.min_sqdist(1.f, 0.f, 0.f, xs.data(), ys.data(), zs.data(), xs.size(), &idx, &d2);
  CHECK(idx == 0);
  CHECK(d2 == 0.f);

  k.min_sqdist(0.f, 0.f, 0.f, xs.data(), ys.data(), zs.data(), 0, &idx, &d2);
  CHECK(idx == npos);
}

TEST_CASE("render kernel sees a sphere's front surface at the principal point") {
  RenderScene sc;
  sc.sph_x = {0.f};
  sc.sph_y = {0.f};
  sc.sph_z = {1.f};
  sc.sph_r = {0.0175f};
  std::vector<float> depth(1280, -1.f);
  std::vector<std::int16_t> id(1280, -7);
  scalar_kernels().render_row(sc, 1.0f / 600.f, 1.0f / 600.f, 640.f, 360.f, 360,
                              1280, depth.data(), id.data());
  CHECK(depth[640] == doctest::Approx(0.9825).epsilon(1e-6));
  CHECK(id[640] == 0);
  CHECK(id[0] == -1);
  CHECK(depth[0] == 0.f);
}

TEST_CASE("render kernel clips cylinders to their axial extent") {
  RenderScene sc;
  // Axis along +x starting at the optical axis, length 0.3.
  sc.cyl_px = {0.f};
  sc.cyl_py = {0.f};
  sc.cyl_pz = {1.f};
  sc.cyl_ux = {1.f};
  sc.cyl_uy = {0.f};
  sc.cyl_uz = {0.f};
  sc.cyl_len = {0.3f};
  sc.cyl_r = {0.02f};
  std::vector<float> depth(1280, 0.f);
  std::vector<std::int16_t> id(1280, -1);
  scalar_kernels().render_row(sc, 1.0f / 600.f, 1.0f / 600.f, 640.f, 360.f, 360,
                              1280, depth.data(), id.data());
  CHECK(id[640] == 0);                   // on-axis start of the rod
  CHECK(depth[640] == doctest::Approx(0.98).epsilon(1e-5));
  CHECK(id[639] == -1);                  // just behind the base cap plane
  // Pixel at x = 0.3 * 600 / 1 = 180 to the right still hits; +25px has fallen off.
  CHECK(id[640 + 178] == 0);
  CHECK(id[640 + 205] == -1);
}

#define REQUIRE_AVX2_OR_SKIP()                                  \
  const KernelTable* avx2 = avx2_kernels();                     \
  if (avx2 == nullptr) {                                        \
    MESSAGE("AVX2 unavailable on this CPU; equivalence skipped"); \
    return;                                                     \
  }

TEST_CASE("avx2 hsv mask is bit-identical to scalar") {
  REQUIRE_AVX2_OR_SKIP();
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(200);
    std::vector<std::uint8_t> h(n), s(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = static_cast<std::uint8_t>(rng.uniform_index(256));
      s[i] = static_cast<std::uint8_t>(rng.uniform_index(256));
      v[i] = static_cast<std::uint8_t>(rng.uniform_index(256));
    }
    HsvRangeU8 range{static_cast<std::uint8_t>(rng.uniform_index(256)),
                     static_cast<std::uint8_t>(rng.uniform_index(256)),
                     static_cast<std::uint8_t>(rng.uniform_index(200)),
                     static_cast<std::uint8_t>(55 + rng.uniform_index(200)),
                     static_cast<std::uint8_t>(rng.uniform_index(200)),
                     static_cast<std::uint8_t>(55 + rng.uniform_index(200))};
    std::vector<std::uint8_t> m_scalar(n, 7), m_avx2(n, 8);
    scalar_kernels().hsv_mask(h.data(), s.data(), v.data(), n, range, m_scalar.data());
    avx2->hsv_mask(h.data(), s.data(), v.data(), n, range, m_avx2.data());
    CHECK(m_scalar == m_avx2);
  }
}

TEST_CASE("avx2 min_sqdist is bit-identical to scalar") {
  REQUIRE_AVX2_OR_SKIP();
  Rng rng(103);
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t n = rng.uniform_index(80);
    std::vector<float> xs(n), ys(n), zs(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<float>(rng.uniform(-1, 1));
      ys[i] = static_cast<float>(rng.uniform(-1, 1));
      zs[i] = static_cast<float>(rng.uniform(-1, 1));
    }
    if (n >= 10 && trial % 3 == 0) {
      xs[7] = xs[2]; ys[7] = ys[2]; zs[7] = zs[2];  // engineered tie
    }
    const float qx = static_cast<float>(rng.uniform(-1, 1));
    const float qy = static_cast<float>(rng.uniform(-1, 1));
    const float qz = static_cast<float>(rng.uniform(-1, 1));
    std::size_t i1 = 1, i2 = 2;
    float d1 = 0.f, d2 = 0.f;
    scalar_kernels().min_sqdist(qx, qy, qz, xs.data(), ys.data(), zs.data(), n, &i1, &d1);
    avx2->min_sqdist(qx, qy, qz, xs.data(), ys.data(), zs.data(), n, &i2, &d2);
    CHECK(i1 == i2);
    CHECK(std::memcmp(&d1, &d2, sizeof(float)) == 0);
  }
}

TEST_CASE("avx2 plane inlier count is identical to scalar") {
  REQUIRE_AVX2_OR_SKIP();
  Rng rng(107);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = rng.uniform_index(500);
    std::vector<float> xs(n), ys(n), zs(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<float>(rng.uniform(-1, 1));
      ys[i] = static_cast<float>(rng.uniform(-1, 1));
      zs[i] = static_cast<float>(rng.uniform(0, 2));
    }
    const float nx = static_cast<float>(rng.uniform(-1, 1));
    const float ny = static_cast<float>(rng.uniform(-1, 1));
    const float nz = static_cast<float>(rng.uniform(-1, 1));
    const float d = static_cast<float>(rng.uniform(-1, 1));
    const float thresh = static_cast<float>(rng.uniform(0.0, 0.3));
    CHECK(scalar_kernels().plane_inlier_count(xs.data(), ys.data(), zs.data(), n,
                                              nx, ny, nz, d, thresh) ==
          avx2->plane_inlier_count(xs.data(), ys.data(), zs.data(), n, nx, ny,
                                   nz, d, thresh));
  }
}

TEST_CASE("avx2 render row is bit-identical to scalar") {
  REQUIRE_AVX2_OR_SKIP();
  Rng rng(109);
  for (int trial = 0; trial < 30; ++trial) {
    RenderScene sc = random_scene(rng, trial % 2 == 0);
    const int width = 3 + static_cast<int>(rng.uniform_index(300));
    const int row = static_cast<int>(rng.uniform_index(480));
    std::vector<float> d_scalar(width), d_avx2(width);
    std::vector<std::int16_t> i_scalar(width), i_avx2(width);
    const float inv_f = 1.0f / 580.f;
    scalar_kernels().render_row(sc, inv_f, inv_f, width / 2.0f, 240.f, row,
                                width, d_scalar.data(), i_scalar.data());
    avx2->render_row(sc, inv_f, inv_f, width / 2.0f, 240.f, row, width,
                     d_avx2.data(), i_avx2.data());
    CHECK(i_scalar == i_avx2);
    CHECK(std::memcmp(d_scalar.data(), d_avx2.data(), width * sizeof(float)) == 0);
  }
}

TEST_CASE("kernel dispatch honors forcing") {
  CHECK(std::string(active_kernels().name).size() > 0);
  force_kernels("scalar");
  CHECK(std::string(active_kernels().name) == "scalar");
  force_kernels("auto");
  if (cpu_supports_avx2()) {
    force_kernels("avx2");
    CHECK(std::string(active_kernels().name) == "avx2");
    force_kernels("auto");
  }
}
