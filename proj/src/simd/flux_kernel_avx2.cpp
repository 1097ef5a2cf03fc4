#include <immintrin.h>

#include <cfloat>
#include <cmath>

#include "hbfill/simd/flux_kernel.hpp"
#include "vec_math_avx2.hpp"

namespace hbfill::simd {

namespace {

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return std::max(_mm_cvtsd_f64(m), _mm_cvtsd_f64(_mm_unpackhi_pd(m, m)));
}

}  // namespace

NodeBounds flux_terms_avx2(const double* h, const double* hx, std::size_t count,
                           const FluxConstants& c, double* q) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d vS = _mm256_set1_pd(c.S);
  const __m256d vB = _mm256_set1_pd(c.B);
  const __m256d vn = _mm256_set1_pd(c.n);
  const __m256d vinv_n = _mm256_set1_pd(c.inv_n);
  const __m256d vtwo_n_p1 = _mm256_set1_pd(c.two_n_p1);
  const __m256d vshape = _mm256_set1_pd(c.shape);
  const __m256d vdiff = _mm256_set1_pd(c.diff_scale);
  const __m256d vtwo_n = _mm256_set1_pd(c.two_n);
  const __m256d vn_p1 = _mm256_set1_pd(c.n_p1);
  const __m256d vtwo_n_sq = _mm256_set1_pd(c.two_n_sq);
  const __m256d tiny = _mm256_set1_pd(DBL_MIN);
  const bool linear = c.inv_n == 1.0;

  __m256d max_v = zero;
  __m256d max_d = zero;
  NodeBounds tail_bounds;

  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    const __m256d hv = _mm256_loadu_pd(h + i);
    const __m256d d = _mm256_sub_pd(vS, _mm256_loadu_pd(hx + i));
    const __m256d a = _mm256_andnot_pd(sign_mask, d);
    const __m256d a_pos = _mm256_cmp_pd(a, zero, _CMP_GT_OQ);
    const __m256d a_safe = _mm256_blendv_pd(one, a, a_pos);
    const __m256d b = _mm256_div_pd(vB, a_safe);
    const __m256d Y = _mm256_sub_pd(hv, b);
    const __m256d live = _mm256_and_pd(a_pos, _mm256_cmp_pd(Y, zero, _CMP_GT_OQ));
    const int live_bits = _mm256_movemask_pd(live);
    if (live_bits == 0) {
      _mm256_storeu_pd(q + i, zero);
      continue;
    }

    const __m256d x = _mm256_blendv_pd(one, _mm256_mul_pd(a_safe, Y), live);
    if (!linear && _mm256_movemask_pd(_mm256_and_pd(live, _mm256_cmp_pd(x, tiny, _CMP_LT_OQ))) != 0) {
      // Subnormal base: the vector log is only valid for normal inputs.
      const NodeBounds nb = flux_terms_scalar(h + i, hx + i, 4, c, q + i);
      tail_bounds.max_v = std::max(tail_bounds.max_v, nb.max_v);
      tail_bounds.max_d = std::max(tail_bounds.max_d, nb.max_d);
      continue;
    }
    const __m256d w = linear ? x : avx2::pow_pd(x, vinv_n);

    const __m256d G = _mm256_sub_pd(_mm256_mul_pd(vtwo_n_p1, hv), _mm256_mul_pd(vn, Y));
    const __m256d qa = _mm256_mul_pd(_mm256_mul_pd(_mm256_mul_pd(w, vshape), Y), G);
    // Copy the sign of d onto |q|.
    const __m256d qs = _mm256_or_pd(qa, _mm256_and_pd(sign_mask, d));
    _mm256_storeu_pd(q + i, _mm256_and_pd(live, qs));

    const __m256d v = _mm256_and_pd(live, _mm256_mul_pd(w, hv));
    const __m256d poly = _mm256_add_pd(
        _mm256_add_pd(_mm256_mul_pd(_mm256_mul_pd(vtwo_n, hv), b), _mm256_mul_pd(_mm256_mul_pd(vn_p1, hv), hv)),
        _mm256_mul_pd(_mm256_mul_pd(vtwo_n_sq, b), b));
    const __m256d dd = _mm256_and_pd(live, _mm256_mul_pd(_mm256_mul_pd(_mm256_div_pd(w, a_safe), poly), vdiff));
    max_v = _mm256_max_pd(max_v, v);
    max_d = _mm256_max_pd(max_d, dd);
  }

  NodeBounds out;
  out.max_v = std::max(hmax(max_v), tail_bounds.max_v);
  out.max_d = std::max(hmax(max_d), tail_bounds.max_d);
  if (i < count) {
    const NodeBounds nb = flux_terms_scalar(h + i, hx + i, count - i, c, q + i);
    out.max_v = std::max(out.max_v, nb.max_v);
    out.max_d = std::max(out.max_d, nb.max_d);
  }
  return out;
}

void pow_batch_avx2(const double* x, double y, double* out, std::size_t count) {
  const __m256d vy = _mm256_set1_pd(y);
  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    _mm256_storeu_pd(out + i, avx2::pow_pd(_mm256_loadu_pd(x + i), vy));
  }
  if (i < count) {
    alignas(32) double buf[4] = {1.0, 1.0, 1.0, 1.0};
    alignas(32) double res[4];
    for (std::size_t j = i; j < count; ++j) buf[j - i] = x[j];
    _mm256_store_pd(res, avx2::pow_pd(_mm256_load_pd(buf), vy));
    for (std::size_t j = i; j < count; ++j) out[j] = res[j - i];
  }
}

}  // namespace hbfill::simd
