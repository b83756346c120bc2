#include "tenseg/kernels/kernels.hpp"

// AVX2 variants. Built with -mavx2 and FP contraction off, and written
// without FMA so every lane rounds exactly like the scalar reference.

#if defined(__AVX2__)

#include <immintrin.h>

#include <limits>

#include "scalar_core.hpp"

namespace tenseg::kernels {
namespace {

inline __m256i cmp_ge_epu8(__m256i x, __m256i lo) {
  return _mm256_cmpeq_epi8(_mm256_max_epu8(x, lo), x);
}

inline __m256i cmp_le_epu8(__m256i x, __m256i hi) {
  return _mm256_cmpeq_epi8(_mm256_min_epu8(x, hi), x);
}

void hsv_mask_avx2(const std::uint8_t* h, const std::uint8_t* s,
                   const std::uint8_t* v, std::size_t n, HsvRangeU8 range,
                   std::uint8_t* mask) {
  const __m256i h_lo = _mm256_set1_epi8(static_cast<char>(range.h_lo));
  const __m256i h_hi = _mm256_set1_epi8(static_cast<char>(range.h_hi));
  const __m256i s_lo = _mm256_set1_epi8(static_cast<char>(range.s_lo));
  const __m256i s_hi = _mm256_set1_epi8(static_cast<char>(range.s_hi));
  const __m256i v_lo = _mm256_set1_epi8(static_cast<char>(range.v_lo));
  const __m256i v_hi = _mm256_set1_epi8(static_cast<char>(range.v_hi));
  const __m256i ones = _mm256_set1_epi8(1);
  const bool hue_wraps = range.h_lo > range.h_hi;

  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i hv = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(h + i));
    const __m256i sv = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(s + i));
    const __m256i vv = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(v + i));
    __m256i hue_ok;
    if (hue_wraps) {
      hue_ok = _mm256_or_si256(cmp_ge_epu8(hv, h_lo), cmp_le_epu8(hv, h_hi));
    } else {
      hue_ok = _mm256_and_si256(cmp_ge_epu8(hv, h_lo), cmp_le_epu8(hv, h_hi));
    }
    __m256i ok = hue_ok;
    ok = _mm256_and_si256(ok, cmp_ge_epu8(sv, s_lo));
    ok = _mm256_and_si256(ok, cmp_le_epu8(sv, s_hi));
    ok = _mm256_and_si256(ok, cmp_ge_epu8(vv, v_lo));
    ok = _mm256_and_si256(ok, cmp_le_epu8(vv, v_hi));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(mask + i),
                        _mm256_and_si256(ok, ones));
  }
  for (; i < n; ++i) {
    mask[i] = detail::hsv_in_range(h[i], s[i], v[i], range) ? 1 : 0;
  }
}

void min_sqdist_avx2(float qx, float qy, float qz, const float* xs,
                     const float* ys, const float* zs, std::size_t n,
                     std::size_t* best_index, float* best_sqdist) {
  std::size_t best_i = npos;
  float best_d2 = std::numeric_limits<float>::infinity();

  std::size_t i = 0;
  if (n >= 8) {
    const __m256 qxv = _mm256_set1_ps(qx);
    const __m256 qyv = _mm256_set1_ps(qy);
    const __m256 qzv = _mm256_set1_ps(qz);
    __m256 lane_best = _mm256_set1_ps(std::numeric_limits<float>::infinity());
    __m256i lane_idx = _mm256_set1_epi32(-1);
    __m256i idx = _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7);
    const __m256i step = _mm256_set1_epi32(8);

    for (; i + 8 <= n; i += 8) {
      const __m256 dx = _mm256_sub_ps(qxv, _mm256_loadu_ps(xs + i));
      const __m256 dy = _mm256_sub_ps(qyv, _mm256_loadu_ps(ys + i));
      const __m256 dz = _mm256_sub_ps(qzv, _mm256_loadu_ps(zs + i));
      const __m256 d2 = _mm256_add_ps(
          _mm256_add_ps(_mm256_mul_ps(dx, dx), _mm256_mul_ps(dy, dy)),
          _mm256_mul_ps(dz, dz));
      const __m256 lt = _mm256_cmp_ps(d2, lane_best, _CMP_LT_OQ);
      lane_best = _mm256_blendv_ps(lane_best, d2, lt);
      lane_idx = _mm256_blendv_epi8(lane_idx, idx, _mm256_castps_si256(lt));
      idx = _mm256_add_epi32(idx, step);
    }

    alignas(32) float d2s[8];
    alignas(32) std::int32_t idxs[8];
    _mm256_store_ps(d2s, lane_best);
    _mm256_store_si256(reinterpret_cast<__m256i*>(idxs), lane_idx);
    for (int lane = 0; lane < 8; ++lane) {
      if (idxs[lane] < 0) continue;
      const auto cand = static_cast<std::size_t>(idxs[lane]);
      // Lexicographic (d2, index) min reproduces the scalar first-win rule.
      if (d2s[lane] < best_d2 || (d2s[lane] == best_d2 && cand < best_i)) {
        best_d2 = d2s[lane];
        best_i = cand;
      }
    }
  }
  for (; i < n; ++i) {
    const float d2 = detail::sqdist(qx, qy, qz, xs[i], ys[i], zs[i]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best_i = i;
    }
  }
  *best_index = best_i;
  *best_sqdist = best_d2;
}

std::size_t plane_inlier_count_avx2(const float* xs, const float* ys,
                                    const float* zs, std::size_t n, float nx,
                                    float ny, float nz, float d, float thresh) {
  std::size_t count = 0;
  std::size_t i = 0;
  const __m256 nxv = _mm256_set1_ps(nx);
  const __m256 nyv = _mm256_set1_ps(ny);
  const __m256 nzv = _mm256_set1_ps(nz);
  const __m256 dv = _mm256_set1_ps(d);
  const __m256 tv = _mm256_set1_ps(thresh);
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));

  for (; i + 8 <= n; i += 8) {
    const __m256 x = _mm256_loadu_ps(xs + i);
    const __m256 y = _mm256_loadu_ps(ys + i);
    const __m256 z = _mm256_loadu_ps(zs + i);
    const __m256 dist = _mm256_add_ps(
        _mm256_add_ps(
            _mm256_add_ps(_mm256_mul_ps(nxv, x), _mm256_mul_ps(nyv, y)),
            _mm256_mul_ps(nzv, z)),
        dv);
    const __m256 ok = _mm256_cmp_ps(_mm256_and_ps(dist, abs_mask), tv, _CMP_LE_OQ);
    count += static_cast<std::size_t>(_mm_popcnt_u32(
        static_cast<unsigned>(_mm256_movemask_ps(ok))));
  }
  for (; i < n; ++i) {
    if (detail::plane_abs_dist(xs[i], ys[i], zs[i], nx, ny, nz, d) <= thresh) {
      ++count;
    }
  }
  return count;
}

void render_row_avx2(const RenderScene& scene, float inv_fx, float inv_fy,
                     float cx, float cy, int row_v, int width, float* depth_out,
                     std::int16_t* id_out) {
  const float dy_s = (static_cast<float>(row_v) - cy) * inv_fy;
  const __m256 dy = _mm256_set1_ps(dy_s);
  const __m256 inf = _mm256_set1_ps(std::numeric_limits<float>::infinity());
  const __m256 zero = _mm256_setzero_ps();
  const __m256 cxv = _mm256_set1_ps(cx);
  const __m256 ifx = _mm256_set1_ps(inv_fx);
  const __m256i none = _mm256_set1_epi32(-1);

  const std::size_t ns = scene.num_spheres();
  const std::size_t nc = scene.num_cylinders();

  int u = 0;
  for (; u + 8 <= width; u += 8) {
    const __m256 uf = _mm256_cvtepi32_ps(
        _mm256_add_epi32(_mm256_set1_epi32(u), _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7)));
    const __m256 dx = _mm256_mul_ps(_mm256_sub_ps(uf, cxv), ifx);

    __m256 best_t = inf;
    __m256i best_id = none;

    const __m256 ray_a = _mm256_add_ps(
        _mm256_add_ps(_mm256_mul_ps(dx, dx), _mm256_mul_ps(dy, dy)),
        _mm256_set1_ps(1.0f));

    for (std::size_t k = 0; k < ns; ++k) {
      const __m256 scx = _mm256_set1_ps(scene.sph_x[k]);
      const __m256 scy = _mm256_set1_ps(scene.sph_y[k]);
      const __m256 scz = _mm256_set1_ps(scene.sph_z[k]);
      const float cr = scene.sph_r[k];
      const float c_s = ((scene.sph_x[k] * scene.sph_x[k] +
                          scene.sph_y[k] * scene.sph_y[k]) +
                         scene.sph_z[k] * scene.sph_z[k]) -
                        cr * cr;
      const __m256 b = _mm256_add_ps(
          _mm256_add_ps(_mm256_mul_ps(dx, scx), _mm256_mul_ps(dy, scy)), scz);
      const __m256 disc = _mm256_sub_ps(_mm256_mul_ps(b, b),
                                        _mm256_mul_ps(ray_a, _mm256_set1_ps(c_s)));
      const __m256 disc_ok = _mm256_cmp_ps(disc, zero, _CMP_GE_OQ);
      const __m256 t = _mm256_div_ps(_mm256_sub_ps(b, _mm256_sqrt_ps(disc)), ray_a);
      __m256 upd = _mm256_and_ps(disc_ok, _mm256_cmp_ps(t, zero, _CMP_GT_OQ));
      upd = _mm256_and_ps(upd, _mm256_cmp_ps(t, best_t, _CMP_LT_OQ));
      best_t = _mm256_blendv_ps(best_t, t, upd);
      best_id = _mm256_blendv_epi8(best_id, _mm256_set1_epi32(static_cast<int>(k)),
                                   _mm256_castps_si256(upd));
    }

    for (std::size_t k = 0; k < nc; ++k) {
      const float ux = scene.cyl_ux[k], uy = scene.cyl_uy[k], uz = scene.cyl_uz[k];
      const float px = scene.cyl_px[k], py = scene.cyl_py[k], pz = scene.cyl_pz[k];
      const float pu_s = (px * ux + py * uy) + pz * uz;
      const __m256 du = _mm256_add_ps(
          _mm256_add_ps(_mm256_mul_ps(dx, _mm256_set1_ps(ux)),
                        _mm256_mul_ps(dy, _mm256_set1_ps(uy))),
          _mm256_set1_ps(uz));
      const __m256 pu = _mm256_set1_ps(pu_s);
      const __m256 ddx = _mm256_sub_ps(dx, _mm256_mul_ps(du, _mm256_set1_ps(ux)));
      const __m256 ddy = _mm256_sub_ps(dy, _mm256_mul_ps(du, _mm256_set1_ps(uy)));
      const __m256 ddz = _mm256_sub_ps(_mm256_set1_ps(1.0f),
                                       _mm256_mul_ps(du, _mm256_set1_ps(uz)));
      const float mx_s = pu_s * ux - px;
      const float my_s = pu_s * uy - py;
      const float mz_s = pu_s * uz - pz;
      const __m256 mx = _mm256_set1_ps(mx_s);
      const __m256 my = _mm256_set1_ps(my_s);
      const __m256 mz = _mm256_set1_ps(mz_s);
      const __m256 a2 = _mm256_add_ps(
          _mm256_add_ps(_mm256_mul_ps(ddx, ddx), _mm256_mul_ps(ddy, ddy)),
          _mm256_mul_ps(ddz, ddz));
      const __m256 b2 = _mm256_add_ps(
          _mm256_add_ps(_mm256_mul_ps(mx, ddx), _mm256_mul_ps(my, ddy)),
          _mm256_mul_ps(mz, ddz));
      const float c2_base = ((mx_s * mx_s + my_s * my_s) + mz_s * mz_s) -
                            scene.cyl_r[k] * scene.cyl_r[k];
      const __m256 c2 = _mm256_set1_ps(c2_base);
      const __m256 disc = _mm256_sub_ps(_mm256_mul_ps(b2, b2), _mm256_mul_ps(a2, c2));
      const __m256 base_ok = _mm256_and_ps(
          _mm256_cmp_ps(disc, zero, _CMP_GE_OQ),
          _mm256_cmp_ps(a2, zero, _CMP_GT_OQ));
      const __m256 sq = _mm256_sqrt_ps(disc);
      const __m256 neg_b2 = _mm256_sub_ps(zero, b2);
      const __m256 len = _mm256_set1_ps(scene.cyl_len[k]);

      const __m256 t1 = _mm256_div_ps(_mm256_sub_ps(neg_b2, sq), a2);
      const __m256 ax1 = _mm256_sub_ps(_mm256_mul_ps(t1, du), pu);
      __m256 ok1 = _mm256_and_ps(base_ok, _mm256_cmp_ps(t1, zero, _CMP_GT_OQ));
      ok1 = _mm256_and_ps(ok1, _mm256_cmp_ps(ax1, zero, _CMP_GE_OQ));
      ok1 = _mm256_and_ps(ok1, _mm256_cmp_ps(ax1, len, _CMP_LE_OQ));

      const __m256 t2 = _mm256_div_ps(_mm256_add_ps(neg_b2, sq), a2);
      const __m256 ax2 = _mm256_sub_ps(_mm256_mul_ps(t2, du), pu);
      __m256 ok2 = _mm256_and_ps(base_ok, _mm256_cmp_ps(t2, zero, _CMP_GT_OQ));
      ok2 = _mm256_and_ps(ok2, _mm256_cmp_ps(ax2, zero, _CMP_GE_OQ));
      ok2 = _mm256_and_ps(ok2, _mm256_cmp_ps(ax2, len, _CMP_LE_OQ));

      const __m256 t = _mm256_blendv_ps(t2, t1, ok1);
      __m256 upd = _mm256_or_ps(ok1, ok2);
      upd = _mm256_and_ps(upd, _mm256_cmp_ps(t, best_t, _CMP_LT_OQ));
      best_t = _mm256_blendv_ps(best_t, t, upd);
      best_id = _mm256_blendv_epi8(
          best_id, _mm256_set1_epi32(static_cast<int>(ns + k)),
          _mm256_castps_si256(upd));
    }

    if (scene.has_plane) {
      const __m256 nd = _mm256_add_ps(
          _mm256_add_ps(_mm256_mul_ps(_mm256_set1_ps(scene.plane_nx), dx),
                        _mm256_mul_ps(_mm256_set1_ps(scene.plane_ny), dy)),
          _mm256_set1_ps(scene.plane_nz));
      const __m256 t = _mm256_div_ps(_mm256_set1_ps(scene.plane_off), nd);
      __m256 upd = _mm256_cmp_ps(nd, zero, _CMP_NEQ_OQ);
      upd = _mm256_and_ps(upd, _mm256_cmp_ps(t, zero, _CMP_GT_OQ));
      upd = _mm256_and_ps(upd, _mm256_cmp_ps(t, best_t, _CMP_LT_OQ));
      best_t = _mm256_blendv_ps(best_t, t, upd);
      best_id = _mm256_blendv_epi8(best_id, _mm256_set1_epi32(scene.plane_id()),
                                   _mm256_castps_si256(upd));
    }

    const __m256 miss = _mm256_castsi256_ps(_mm256_cmpeq_epi32(best_id, none));
    _mm256_storeu_ps(depth_out + u, _mm256_blendv_ps(best_t, zero, miss));
    const __m128i lo = _mm256_castsi256_si128(best_id);
    const __m128i hi = _mm256_extracti128_si256(best_id, 1);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(id_out + u), _mm_packs_epi32(lo, hi));
  }

  for (; u < width; ++u) {
    const float dx = (static_cast<float>(u) - cx) * inv_fx;
    detail::render_pixel(scene, dx, dy_s, &depth_out[u], &id_out[u]);
  }
}

}  // namespace

const KernelTable* avx2_kernels_impl() {
  static const KernelTable table{"avx2", hsv_mask_avx2, min_sqdist_avx2,
                                 plane_inlier_count_avx2, render_row_avx2};
  return &table;
}

}  // namespace tenseg::kernels

#else  // !__AVX2__

namespace tenseg::kernels {
const KernelTable* avx2_kernels_impl() { return nullptr; }
}  // namespace tenseg::kernels

#endif
