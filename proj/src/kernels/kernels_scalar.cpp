#include <limits>

#include "scalar_core.hpp"
#include "tenseg/kernels/kernels.hpp"

namespace tenseg::kernels {
namespace {

void hsv_mask_scalar(const std::uint8_t* h, const std::uint8_t* s,
                     const std::uint8_t* v, std::size_t n, HsvRangeU8 range,
                     std::uint8_t* mask) {
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = detail::hsv_in_range(h[i], s[i], v[i], range) ? 1 : 0;
  }
}

void min_sqdist_scalar(float qx, float qy, float qz, const float* xs,
                       const float* ys, const float* zs, std::size_t n,
                       std::size_t* best_index, float* best_sqdist) {
  std::size_t best_i = npos;
  float best_d2 = std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const float d2 = detail::sqdist(qx, qy, qz, xs[i], ys[i], zs[i]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_i = i;
    }
  }
  *best_index = best_i;
  *best_sqdist = best_d2;
}

std::size_t plane_inlier_count_scalar(const float* xs, const float* ys,
                                      const float* zs, std::size_t n, float nx,
                                      float ny, float nz, float d,
                                      float thresh) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::plane_abs_dist(xs[i], ys[i], zs[i], nx, ny, nz, d) <= thresh) {
      ++count;
    }
  }
  return count;
}

void render_row_scalar(const RenderScene& scene, float inv_fx, float inv_fy,
                       float cx, float cy, int row_v, int width,
                       float* depth_out, std::int16_t* id_out) {
  const float dy = (static_cast<float>(row_v) - cy) * inv_fy;
  for (int u = 0; u < width; ++u) {
    const float dx = (static_cast<float>(u) - cx) * inv_fx;
    detail::render_pixel(scene, dx, dy, &depth_out[u], &id_out[u]);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", hsv_mask_scalar, min_sqdist_scalar,
                                 plane_inlier_count_scalar, render_row_scalar};
  return table;
}

}  // namespace tenseg::kernels
