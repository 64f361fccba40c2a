#include "nrs/kernels.hpp"

#include <stdexcept>

namespace nrs::kernels {

namespace {

void dot3_scalar(const double *xs, const double *ys, const double *zs, size_t n, double dx,
                 double dy, double dz, double *out) {
    for (size_t i = 0; i < n; ++i) out[i] = xs[i] * dx + ys[i] * dy + zs[i] * dz;
}

void dot3_grad_scalar(const double *xs, const double *ys, const double *zs, const double *g,
                      size_t n, double dx, double dy, double dz, double *dxs, double *dys,
                      double *dzs, double ddir[3]) {
    double a0 = 0, a1 = 0, a2 = 0;
    for (size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        dxs[i] += gi * dx;
        dys[i] += gi * dy;
        dzs[i] += gi * dz;
        a0 += gi * xs[i];
        a1 += gi * ys[i];
        a2 += gi * zs[i];
    }
    ddir[0] += a0;
    ddir[1] += a1;
    ddir[2] += a2;
}

void axpy_scalar(double a, const double *x, size_t n, double *y) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double *a, const double *b, size_t n) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

const Backend kScalar = {"scalar", dot3_scalar, dot3_grad_scalar, axpy_scalar, dot_scalar};

const Backend *g_active = nullptr;

const Backend *pick_auto() {
    if (avx2_supported()) return &avx2_backend();
    return &kScalar;
}

} // namespace

const Backend &scalar_backend() { return kScalar; }

const Backend &active() {
    if (!g_active) g_active = pick_auto();
    return *g_active;
}

void select_backend(const std::string &name) {
    if (name == "auto") {
        g_active = pick_auto();
    } else if (name == "scalar") {
        g_active = &kScalar;
    } else if (name == "avx2") {
        if (!avx2_supported()) throw std::runtime_error("AVX2 not supported on this CPU");
        g_active = &avx2_backend();
    } else {
        throw std::invalid_argument("unknown kernel backend: " + name);
    }
}

} // namespace nrs::kernels
