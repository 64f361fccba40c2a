#pragma once

#include <cstddef>
#include <string>

namespace nrs::kernels {

// Hot inner loops of the projection search, on SoA ray planes. Scalar
// reference implementations plus an AVX2/FMA variant selected at runtime;
// both sides are equivalence-tested against each other.
struct Backend {
    const char *name;

    // out[i] = xs[i]*dx + ys[i]*dy + zs[i]*dz
    void (*dot3)(const double *xs, const double *ys, const double *zs, size_t n, double dx,
                 double dy, double dz, double *out);

    // Adjoint of dot3. Accumulates dxs[i] += g[i]*dx (etc) and
    // ddir[k] += sum_i g[i]*plane_k[i].
    void (*dot3_grad)(const double *xs, const double *ys, const double *zs, const double *g,
                      size_t n, double dx, double dy, double dz, double *dxs, double *dys,
                      double *dzs, double ddir[3]);

    // y[i] += a * x[i]
    void (*axpy)(double a, const double *x, size_t n, double *y);

    double (*dot)(const double *a, const double *b, size_t n);
};

const Backend &scalar_backend();
bool avx2_supported();
const Backend &avx2_backend(); // valid only when avx2_supported()

// Runtime-selected backend (AVX2 when the CPU has it, else scalar).
const Backend &active();

// Force "scalar", "avx2", or "auto". Throws on unsupported request.
void select_backend(const std::string &name);

} // namespace nrs::kernels
