#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

// Data-parallel inner loops (pixel grids, point sets) as runtime-dispatched
// kernels: a scalar reference implementation plus an AVX2 variant that must
// produce bit-identical outputs (both are compiled without FP contraction).

namespace tenseg::kernels {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// HSV box in the 8-bit quantized space used by frame storage.
/// Hue wraps when h_lo > h_hi.
struct HsvRangeU8 {
  std::uint8_t h_lo = 0, h_hi = 255;
  std::uint8_t s_lo = 0, s_hi = 255;
  std::uint8_t v_lo = 0, v_hi = 255;
};

/// Analytic primitives for one rendered frame, all in the camera frame.
/// Sphere k has id k; cylinder k has id num_spheres + k; the plane (when
/// enabled) has id num_spheres + num_cylinders.
struct RenderScene {
  std::vector<float> sph_x, sph_y, sph_z, sph_r;
  std::vector<float> cyl_px, cyl_py, cyl_pz;  // base point (one endcap center)
  std::vector<float> cyl_ux, cyl_uy, cyl_uz;  // unit axis toward the other end
  std::vector<float> cyl_len, cyl_r;
  bool has_plane = false;
  float plane_nx = 0.f, plane_ny = 0.f, plane_nz = 0.f;
  float plane_off = 0.f;  // plane is n . x = off

  std::size_t num_spheres() const { return sph_x.size(); }
  std::size_t num_cylinders() const { return cyl_px.size(); }
  int plane_id() const { return static_cast<int>(num_spheres() + num_cylinders()); }
};

using HsvMaskFn = void (*)(const std::uint8_t* h, const std::uint8_t* s,
                           const std::uint8_t* v, std::size_t n,
                           HsvRangeU8 range, std::uint8_t* mask);

using MinSqDistFn = void (*)(float qx, float qy, float qz, const float* xs,
                             const float* ys, const float* zs, std::size_t n,
                             std::size_t* best_index, float* best_sqdist);

using PlaneInlierCountFn = std::size_t (*)(const float* xs, const float* ys,
                                           const float* zs, std::size_t n,
                                           float nx, float ny, float nz,
                                           float d, float thresh);

/// Casts the ray through every pixel of image row v and records the nearest
/// positive hit: depth_out gets the z-depth (0 when nothing is hit),
/// id_out the primitive id (-1 when nothing is hit).
using RenderRowFn = void (*)(const RenderScene& scene, float inv_fx,
                             float inv_fy, float cx, float cy, int row_v,
                             int width, float* depth_out,
                             std::int16_t* id_out);

struct KernelTable {
  const char* name;
  HsvMaskFn hsv_mask;
  MinSqDistFn min_sqdist;
  PlaneInlierCountFn plane_inlier_count;
  RenderRowFn render_row;
};

const KernelTable& scalar_kernels();

/// nullptr when this build or CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table picked at first use: AVX2 when the CPU supports it, else scalar.
/// The TENSEG_KERNELS env var ("scalar" or "avx2") overrides the choice.
const KernelTable& active_kernels();

/// Test hook. name is "scalar", "avx2" or "auto"; throws InvalidArgumentError
/// for anything else or when the variant is unavailable.
void force_kernels(const char* name);

bool cpu_supports_avx2();

}  // namespace tenseg::kernels
