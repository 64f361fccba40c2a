#pragma once

#include <vector>

#include "nrs/grid.hpp"
#include "nrs/types.hpp"

namespace nrs {

struct Intrinsics {
    double fx = 1, fy = 1, cx = 0, cy = 0;

    // Template defaults: fx = cx = W/2, fy = cy = H/2.
    static Intrinsics default_for(int height, int width) {
        Intrinsics k;
        k.fx = k.cx = width / 2.0;
        k.fy = k.cy = height / 2.0;
        return k;
    }
};

// Generic central camera: one unit ray per pixel, shared center S = 0.
// Rays are stored as a 3-channel ImageGrid (x,y,z interleaved).
struct RaySurface {
    ImageGrid rays; // H x W x 3, each unit norm
    Vec3 center{};  // fixed at the origin for central cameras

    int height() const { return rays.height; }
    int width() const { return rays.width; }
    Vec3 ray(int y, int x) const {
        return {rays.at(y, x, 0), rays.at(y, x, 1), rays.at(y, x, 2)};
    }
    double max_norm_deviation() const;
};

// Learnable correction added on top of a fixed template, weighted by
// lambda_r in [0,1].
struct ResidualSurface {
    ImageGrid residuals; // H x W x 3, unconstrained
    double weight = 0.0; // lambda_r
};

Vec3 pinhole_unproject(const Intrinsics &k, const Vec2 &pixel, double depth);
// Throws if P.z <= 0 (behind camera); callers mask beforehand.
Vec2 pinhole_project(const Intrinsics &k, const Vec3 &point);
bool pinhole_in_front(const Vec3 &point);

// Normalized unprojection of a fronto-parallel plane; the plane depth
// cancels under normalization.
RaySurface pinhole_template(int height, int width, const Intrinsics &k, double plane_depth = 1.0);

// Per-pixel normalize(Q0 + lambda_r * Qr). Throws on a zero-norm sum, naming
// the offending pixel.
RaySurface compose_surface(const RaySurface &tmpl, const ResidualSurface &residual);

// Adjoint of compose_surface: given gradients w.r.t. the composed unit rays,
// accumulates gradients w.r.t. the raw residual entries.
void compose_surface_backward(const RaySurface &tmpl, const ResidualSurface &residual,
                              const ImageGrid &d_rays, ImageGrid *d_residuals);

// P(u,v) = depth(u,v) * Q(u,v); depth must be positive everywhere.
std::vector<Vec3> ray_unproject(const RaySurface &surface, const ImageGrid &depth);

// Angular error map (radians) between two surfaces; used by evaluation.
ImageGrid surface_angular_error(const RaySurface &a, const RaySurface &b);

} // namespace nrs
