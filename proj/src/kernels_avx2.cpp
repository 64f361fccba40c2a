#include "nrs/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define NRS_X86 1
#include <immintrin.h>
#else
#define NRS_X86 0
#endif

#include <stdexcept>

namespace nrs::kernels {

#if NRS_X86

namespace {

void dot3_avx2(const double *xs, const double *ys, const double *zs, size_t n, double dx,
               double dy, double dz, double *out) {
    const __m256d vdx = _mm256_set1_pd(dx);
    const __m256d vdy = _mm256_set1_pd(dy);
    const __m256d vdz = _mm256_set1_pd(dz);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_mul_pd(_mm256_loadu_pd(xs + i), vdx);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(ys + i), vdy, acc);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(zs + i), vdz, acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) out[i] = xs[i] * dx + ys[i] * dy + zs[i] * dz;
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void dot3_grad_avx2(const double *xs, const double *ys, const double *zs, const double *g,
                    size_t n, double dx, double dy, double dz, double *dxs, double *dys,
                    double *dzs, double ddir[3]) {
    const __m256d vdx = _mm256_set1_pd(dx);
    const __m256d vdy = _mm256_set1_pd(dy);
    const __m256d vdz = _mm256_set1_pd(dz);
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd(), a2 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vg = _mm256_loadu_pd(g + i);
        _mm256_storeu_pd(dxs + i, _mm256_fmadd_pd(vg, vdx, _mm256_loadu_pd(dxs + i)));
        _mm256_storeu_pd(dys + i, _mm256_fmadd_pd(vg, vdy, _mm256_loadu_pd(dys + i)));
        _mm256_storeu_pd(dzs + i, _mm256_fmadd_pd(vg, vdz, _mm256_loadu_pd(dzs + i)));
        a0 = _mm256_fmadd_pd(vg, _mm256_loadu_pd(xs + i), a0);
        a1 = _mm256_fmadd_pd(vg, _mm256_loadu_pd(ys + i), a1);
        a2 = _mm256_fmadd_pd(vg, _mm256_loadu_pd(zs + i), a2);
    }
    double t0 = hsum(a0), t1 = hsum(a1), t2 = hsum(a2);
    for (; i < n; ++i) {
        const double gi = g[i];
        dxs[i] += gi * dx;
        dys[i] += gi * dy;
        dzs[i] += gi * dz;
        t0 += gi * xs[i];
        t1 += gi * ys[i];
        t2 += gi * zs[i];
    }
    ddir[0] += t0;
    ddir[1] += t1;
    ddir[2] += t2;
}

void axpy_avx2(double a, const double *x, size_t n, double *y) {
    const __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(const double *a, const double *b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

const Backend kAvx2 = {"avx2", dot3_avx2, dot3_grad_avx2, axpy_avx2, dot_avx2};

} // namespace

bool avx2_supported() { return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"); }

const Backend &avx2_backend() {
    if (!avx2_supported()) throw std::runtime_error("AVX2 backend unavailable");
    return kAvx2;
}

#else

bool avx2_supported() { return false; }

const Backend &avx2_backend() { throw std::runtime_error("AVX2 backend unavailable"); }

#endif

} // namespace nrs::kernels
