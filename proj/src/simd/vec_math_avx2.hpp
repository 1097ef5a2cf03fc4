#pragma once

// Double-precision exp/log/pow on __m256d. Cephes-style range reduction and
// rational approximations; about 1 ulp on exp and log over normal inputs.
// Only included from translation units compiled with -mavx2 -mfma.

#include <immintrin.h>

namespace hbfill::simd::avx2 {

inline __m256d polevl(__m256d x, const double* coef, int degree) {
  __m256d acc = _mm256_set1_pd(coef[0]);
  for (int i = 1; i <= degree; ++i) {
    acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(coef[i]));
  }
  return acc;
}

// Same as polevl with an implicit leading coefficient of 1.
inline __m256d p1evl(__m256d x, const double* coef, int degree) {
  __m256d acc = _mm256_add_pd(x, _mm256_set1_pd(coef[0]));
  for (int i = 1; i < degree; ++i) {
    acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(coef[i]));
  }
  return acc;
}

/// exp(x) for x in [-708, 709]; inputs are clamped to that range.
inline __m256d exp_pd(__m256d x) {
  static constexpr double P[] = {1.26177193074810590878e-4, 3.02994407707441961300e-2,
                                 9.99999999999999999910e-1};
  static constexpr double Q[] = {3.00198505138664455042e-6, 2.52448340349684104192e-3,
                                 2.27265548208155028766e-1, 2.00000000000000000009e0};
  const __m256d C1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d C2 = _mm256_set1_pd(1.42860682030941723212e-6);

  x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
  const __m256d k = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(k, C1, x);
  r = _mm256_fnmadd_pd(k, C2, r);

  const __m256d rr = _mm256_mul_pd(r, r);
  const __m256d px = _mm256_mul_pd(r, polevl(rr, P, 2));
  const __m256d qx = polevl(rr, Q, 3);
  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // 2^k assembled in the exponent field.
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  __m256i bits = _mm256_cvtepi32_epi64(k32);
  bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
}

/// Natural log for positive normal x.
inline __m256d log_pd(__m256d x) {
  static constexpr double P[] = {1.01875663804580931796e-4, 4.97494994976747001425e-1,
                                 4.70579119878881725854e0,  1.44989225341610930846e1,
                                 1.79368678507819816313e1,  7.70838733755885391666e0};
  static constexpr double Q[] = {1.12873587189167450590e1, 4.52279145837532221105e1,
                                 8.29875266912776603211e1, 7.11544750618563894466e1,
                                 2.31251620126765340583e1};

  // frexp: x = m * 2^e with m in [0.5, 1).
  const __m256i xi = _mm256_castpd_si256(x);
  const __m256i exp_bits = _mm256_srli_epi64(xi, 52);
  const __m256i pack = _mm256_permutevar8x32_epi32(exp_bits, _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6));
  __m256d e = _mm256_cvtepi32_pd(_mm256_castsi256_si128(pack));
  e = _mm256_sub_pd(e, _mm256_set1_pd(1022.0));
  const __m256i mant_bits = _mm256_or_si256(
      _mm256_and_si256(xi, _mm256_set1_epi64x(0x000fffffffffffffLL)),
      _mm256_set1_epi64x(0x3fe0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mant_bits);

  // Shift m into [sqrt(1/2), sqrt(2)) and form m - 1.
  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, _mm256_set1_pd(1.0)));
  m = _mm256_add_pd(m, _mm256_and_pd(small, m));
  m = _mm256_sub_pd(m, _mm256_set1_pd(1.0));

  const __m256d z = _mm256_mul_pd(m, m);
  __m256d y = _mm256_div_pd(_mm256_mul_pd(z, polevl(m, P, 5)), p1evl(m, Q, 5));
  y = _mm256_mul_pd(m, y);
  y = _mm256_fmadd_pd(e, _mm256_set1_pd(-2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, y);
  __m256d res = _mm256_add_pd(m, y);
  return _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), res);
}

inline __m256d pow_pd(__m256d x, __m256d y) { return exp_pd(_mm256_mul_pd(y, log_pd(x))); }

}  // namespace hbfill::simd::avx2
