#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "tenseg/kernels/kernels.hpp"

// Per-element reference cores shared by the scalar kernels and the SIMD
// variants' tail loops. Both translation units are built with FP contraction
// off, so every path through these expressions rounds identically.

namespace tenseg::kernels::detail {

inline bool hsv_in_range(std::uint8_t h, std::uint8_t s, std::uint8_t v,
                         const HsvRangeU8& r) {
  const bool hue_ok = (r.h_lo <= r.h_hi) ? (h >= r.h_lo && h <= r.h_hi)
                                         : (h >= r.h_lo || h <= r.h_hi);
  return hue_ok && s >= r.s_lo && s <= r.s_hi && v >= r.v_lo && v <= r.v_hi;
}

inline float sqdist(float qx, float qy, float qz, float x, float y, float z) {
  const float dx = qx - x;
  const float dy = qy - y;
  const float dz = qz - z;
  return (dx * dx + dy * dy) + dz * dz;
}

inline float plane_abs_dist(float x, float y, float z, float nx, float ny,
                            float nz, float d) {
  return std::fabs(((nx * x + ny * y) + nz * z) + d);
}

/// Ray (0,0,0) + t * (dx, dy, 1) against the scene; nearest positive hit.
inline void render_pixel(const RenderScene& sc, float dx, float dy,
                         float* depth, std::int16_t* id) {
  float best_t = std::numeric_limits<float>::infinity();
  int best_id = -1;

  const float ray_a = (dx * dx + dy * dy) + 1.0f;  // |d|^2

  const std::size_t ns = sc.num_spheres();
  for (std::size_t k = 0; k < ns; ++k) {
    const float cx = sc.sph_x[k], cy = sc.sph_y[k], cz = sc.sph_z[k];
    const float b = (dx * cx + dy * cy) + cz;  // d . c
    const float c = ((cx * cx + cy * cy) + cz * cz) - sc.sph_r[k] * sc.sph_r[k];
    const float disc = b * b - ray_a * c;
    if (disc >= 0.0f) {
      const float t = (b - std::sqrt(disc)) / ray_a;
      if (t > 0.0f && t < best_t) {
        best_t = t;
        best_id = static_cast<int>(k);
      }
    }
  }

  const std::size_t nc = sc.num_cylinders();
  for (std::size_t k = 0; k < nc; ++k) {
    const float px = sc.cyl_px[k], py = sc.cyl_py[k], pz = sc.cyl_pz[k];
    const float ux = sc.cyl_ux[k], uy = sc.cyl_uy[k], uz = sc.cyl_uz[k];
    const float du = (dx * ux + dy * uy) + uz;        // d . u
    const float pu = (px * ux + py * uy) + pz * uz;   // p . u
    const float ddx = dx - du * ux;
    const float ddy = dy - du * uy;
    const float ddz = 1.0f - du * uz;
    const float mx = pu * ux - px;
    const float my = pu * uy - py;
    const float mz = pu * uz - pz;
    const float a2 = (ddx * ddx + ddy * ddy) + ddz * ddz;
    const float b2 = (mx * ddx + my * ddy) + mz * ddz;
    const float c2 = ((mx * mx + my * my) + mz * mz) - sc.cyl_r[k] * sc.cyl_r[k];
    const float disc = b2 * b2 - a2 * c2;
    if (disc >= 0.0f && a2 > 0.0f) {
      const float sq = std::sqrt(disc);
      float t = (-b2 - sq) / a2;
      float axial = t * du - pu;
      bool ok = t > 0.0f && axial >= 0.0f && axial <= sc.cyl_len[k];
      if (!ok) {
        t = (-b2 + sq) / a2;
        axial = t * du - pu;
        ok = t > 0.0f && axial >= 0.0f && axial <= sc.cyl_len[k];
      }
      if (ok && t < best_t) {
        best_t = t;
        best_id = static_cast<int>(ns + k);
      }
    }
  }

  if (sc.has_plane) {
    const float nd = (sc.plane_nx * dx + sc.plane_ny * dy) + sc.plane_nz;
    if (nd != 0.0f) {
      const float t = sc.plane_off / nd;
      if (t > 0.0f && t < best_t) {
        best_t = t;
        best_id = sc.plane_id();
      }
    }
  }

  *depth = best_id >= 0 ? best_t : 0.0f;
  *id = static_cast<std::int16_t>(best_id);
}

}  // namespace tenseg::kernels::detail
