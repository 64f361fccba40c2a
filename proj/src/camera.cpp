#include "nrs/camera.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nrs {

double RaySurface::max_norm_deviation() const {
    double worst = 0;
    for (int y = 0; y < height(); ++y)
        for (int x = 0; x < width(); ++x)
            worst = std::max(worst, std::abs(ray(y, x).norm() - 1.0));
    return worst;
}

Vec3 pinhole_unproject(const Intrinsics &k, const Vec2 &pixel, double depth) {
    if (depth <= 0) throw std::invalid_argument("pinhole_unproject: depth must be positive");
    return {depth * (pixel.x - k.cx) / k.fx, depth * (pixel.y - k.cy) / k.fy, depth};
}

bool pinhole_in_front(const Vec3 &point) { return point.z > 0; }

Vec2 pinhole_project(const Intrinsics &k, const Vec3 &point) {
    if (point.z <= 0) throw std::domain_error("pinhole_project: point behind camera");
    return {k.fx * point.x / point.z + k.cx, k.fy * point.y / point.z + k.cy};
}

RaySurface pinhole_template(int height, int width, const Intrinsics &k, double plane_depth) {
    if (plane_depth <= 0) throw std::invalid_argument("pinhole_template: plane_depth must be positive");
    RaySurface s;
    s.rays = ImageGrid(height, width, 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec3 q = pinhole_unproject(k, {static_cast<double>(x), static_cast<double>(y)},
                                             plane_depth)
                               .normalized();
            s.rays.at(y, x, 0) = q.x;
            s.rays.at(y, x, 1) = q.y;
            s.rays.at(y, x, 2) = q.z;
        }
    }
    return s;
}

RaySurface compose_surface(const RaySurface &tmpl, const ResidualSurface &residual) {
    if (!tmpl.rays.same_shape(residual.residuals))
        throw std::invalid_argument("compose_surface: dimension mismatch");
    RaySurface out;
    out.rays = ImageGrid(tmpl.height(), tmpl.width(), 3);
    out.center = tmpl.center;
    const double lr = residual.weight;
    for (int y = 0; y < tmpl.height(); ++y) {
        for (int x = 0; x < tmpl.width(); ++x) {
            Vec3 s = tmpl.ray(y, x);
            s.x += lr * residual.residuals.at(y, x, 0);
            s.y += lr * residual.residuals.at(y, x, 1);
            s.z += lr * residual.residuals.at(y, x, 2);
            const double n = s.norm();
            if (n < 1e-12)
                throw std::runtime_error("compose_surface: zero-norm ray at pixel (" +
                                         std::to_string(x) + "," + std::to_string(y) + ")");
            out.rays.at(y, x, 0) = s.x / n;
            out.rays.at(y, x, 1) = s.y / n;
            out.rays.at(y, x, 2) = s.z / n;
        }
    }
    return out;
}

void compose_surface_backward(const RaySurface &tmpl, const ResidualSurface &residual,
                              const ImageGrid &d_rays, ImageGrid *d_residuals) {
    const double lr = residual.weight;
    for (int y = 0; y < tmpl.height(); ++y) {
        for (int x = 0; x < tmpl.width(); ++x) {
            Vec3 s = tmpl.ray(y, x);
            s.x += lr * residual.residuals.at(y, x, 0);
            s.y += lr * residual.residuals.at(y, x, 1);
            s.z += lr * residual.residuals.at(y, x, 2);
            const double n = s.norm();
            const Vec3 q = s * (1.0 / n);
            const Vec3 g{d_rays.at(y, x, 0), d_rays.at(y, x, 1), d_rays.at(y, x, 2)};
            // d(s/|s|)/ds = (I - q q^T) / |s|
            const Vec3 ds = (g - q * q.dot(g)) * (1.0 / n);
            d_residuals->at(y, x, 0) += lr * ds.x;
            d_residuals->at(y, x, 1) += lr * ds.y;
            d_residuals->at(y, x, 2) += lr * ds.z;
        }
    }
}

std::vector<Vec3> ray_unproject(const RaySurface &surface, const ImageGrid &depth) {
    if (depth.height != surface.height() || depth.width != surface.width() || depth.channels != 1)
        throw std::invalid_argument("ray_unproject: dimension mismatch");
    std::vector<Vec3> out;
    out.reserve(static_cast<size_t>(depth.height) * depth.width);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const double d = depth.at(y, x);
            if (!(d > 0))
                throw std::domain_error("ray_unproject: non-positive depth at pixel (" +
                                        std::to_string(x) + "," + std::to_string(y) + ")");
            out.push_back(surface.center + d * surface.ray(y, x));
        }
    }
    return out;
}

ImageGrid surface_angular_error(const RaySurface &a, const RaySurface &b) {
    if (!a.rays.same_shape(b.rays))
        throw std::invalid_argument("surface_angular_error: dimension mismatch");
    ImageGrid out(a.height(), a.width(), 1);
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            double c = a.ray(y, x).dot(b.ray(y, x));
            c = std::clamp(c, -1.0, 1.0);
            out.at(y, x) = std::acos(c);
        }
    return out;
}

} // namespace nrs
