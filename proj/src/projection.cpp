#include "nrs/projection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nrs/kernels.hpp"

namespace nrs {

void PatchSpec::validate(int max_h, int max_w) const {
    if (h < 1 || w < 1 || h % 2 == 0 || w % 2 == 0)
        throw std::invalid_argument("PatchSpec: dimensions must be odd and >= 1");
    if (h > max_h || w > max_w)
        throw std::invalid_argument("PatchSpec: patch larger than search image");
}

namespace {

struct SoaPlanes {
    int h = 0, w = 0;
    std::vector<double> x, y, z;

    static SoaPlanes from(const ImageGrid &rays) {
        SoaPlanes p;
        p.h = rays.height;
        p.w = rays.width;
        const size_t n = static_cast<size_t>(p.h) * p.w;
        p.x.resize(n);
        p.y.resize(n);
        p.z.resize(n);
        for (size_t i = 0; i < n; ++i) {
            p.x[i] = rays.data[3 * i + 0];
            p.y[i] = rays.data[3 * i + 1];
            p.z[i] = rays.data[3 * i + 2];
        }
        return p;
    }
};

} // namespace

SimilarityPatch similarity_patch(const RaySurface &surface_c, const Vec3 &point,
                                 const Vec2 &anchor, const PatchSpec &patch) {
    patch.validate(surface_c.height(), surface_c.width());
    const Vec3 r = point - surface_c.center;
    const double n = r.norm();
    if (n < 1e-12)
        throw std::domain_error("similarity_patch: point coincident with camera center");
    const Vec3 dir = r * (1.0 / n);

    SimilarityPatch out;
    out.anchor_x = static_cast<int>(std::lround(anchor.x));
    out.anchor_y = static_cast<int>(std::lround(anchor.y));
    out.h = patch.h;
    out.w = patch.w;
    out.x0 = out.anchor_x - patch.w / 2;
    out.y0 = out.anchor_y - patch.h / 2;
    out.scores.assign(static_cast<size_t>(patch.h) * patch.w, kPatchSentinel);
    out.in_bounds.assign(out.scores.size(), 0);
    for (int row = 0; row < patch.h; ++row) {
        const int py = out.y0 + row;
        if (py < 0 || py >= surface_c.height()) continue;
        for (int col = 0; col < patch.w; ++col) {
            const int px = out.x0 + col;
            if (px < 0 || px >= surface_c.width()) continue;
            const size_t i = static_cast<size_t>(row) * patch.w + col;
            out.scores[i] = surface_c.ray(py, px).dot(dir);
            out.in_bounds[i] = 1;
        }
    }
    return out;
}

Vec2 soft_project(const SimilarityPatch &patch, double tau) {
    if (tau <= 0) throw std::invalid_argument("soft_project: tau must be positive");
    double m = kPatchSentinel;
    for (size_t i = 0; i < patch.scores.size(); ++i)
        if (patch.in_bounds[i] && patch.scores[i] > m) m = patch.scores[i];
    if (m == kPatchSentinel) throw std::runtime_error("soft_project: all cells clamped");
    double wsum = 0, usum = 0, vsum = 0;
    for (int row = 0; row < patch.h; ++row) {
        for (int col = 0; col < patch.w; ++col) {
            const size_t i = static_cast<size_t>(row) * patch.w + col;
            if (!patch.in_bounds[i]) continue;
            const double w = std::exp((patch.scores[i] - m) / tau);
            wsum += w;
            usum += w * (patch.x0 + col);
            vsum += w * (patch.y0 + row);
        }
    }
    return {usum / wsum, vsum / wsum};
}

std::vector<double> soft_project_backward(const SimilarityPatch &patch, double tau,
                                          const Vec2 &d_coords) {
    double m = kPatchSentinel;
    for (size_t i = 0; i < patch.scores.size(); ++i)
        if (patch.in_bounds[i] && patch.scores[i] > m) m = patch.scores[i];
    std::vector<double> weights(patch.scores.size(), 0.0);
    double wsum = 0;
    for (size_t i = 0; i < patch.scores.size(); ++i) {
        if (!patch.in_bounds[i]) continue;
        weights[i] = std::exp((patch.scores[i] - m) / tau);
        wsum += weights[i];
    }
    double abar = 0;
    std::vector<double> a(patch.scores.size(), 0.0);
    for (int row = 0; row < patch.h; ++row)
        for (int col = 0; col < patch.w; ++col) {
            const size_t i = static_cast<size_t>(row) * patch.w + col;
            if (!patch.in_bounds[i]) continue;
            weights[i] /= wsum;
            a[i] = d_coords.x * (patch.x0 + col) + d_coords.y * (patch.y0 + row);
            abar += weights[i] * a[i];
        }
    std::vector<double> d_scores(patch.scores.size(), 0.0);
    for (size_t i = 0; i < patch.scores.size(); ++i)
        if (patch.in_bounds[i]) d_scores[i] = weights[i] * (a[i] - abar) / tau;
    return d_scores;
}

size_t hard_project(const RaySurface &surface_c, const Vec3 &point) {
    const Vec3 r = point - surface_c.center;
    const double n = r.norm();
    if (n < 1e-12) throw std::domain_error("hard_project: point coincident with camera center");
    const Vec3 dir = r * (1.0 / n);
    double best = -2.0;
    size_t best_i = 0;
    const size_t total = static_cast<size_t>(surface_c.height()) * surface_c.width();
    for (size_t i = 0; i < total; ++i) {
        const double s = surface_c.rays.data[3 * i + 0] * dir.x +
                         surface_c.rays.data[3 * i + 1] * dir.y +
                         surface_c.rays.data[3 * i + 2] * dir.z;
        if (s > best) {
            best = s;
            best_i = i;
        }
    }
    return best_i;
}

double anneal_tau(int step, int total, double tau_start, double tau_end) {
    if (step < 0 || step > total) throw std::invalid_argument("anneal_tau: step out of range");
    if (!(tau_start >= tau_end && tau_end > 0))
        throw std::invalid_argument("anneal_tau: need tau_start >= tau_end > 0");
    if (total <= 0) return tau_end;
    const double t = static_cast<double>(step) / total;
    return tau_start * std::pow(tau_end / tau_start, t);
}

RaySurface half_res_surface(const RaySurface &surface) {
    RaySurface out;
    out.center = surface.center;
    out.rays = downsample_half(surface.rays);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            const Vec3 q = out.ray(y, x).normalized();
            out.rays.at(y, x, 0) = q.x;
            out.rays.at(y, x, 1) = q.y;
            out.rays.at(y, x, 2) = q.z;
        }
    return out;
}

void half_res_surface_backward(const RaySurface &surface, const ImageGrid &d_half_rays,
                               ImageGrid *d_full_rays) {
    ImageGrid mean = downsample_half(surface.rays);
    ImageGrid d_mean(mean.height, mean.width, 3);
    for (int y = 0; y < mean.height; ++y)
        for (int x = 0; x < mean.width; ++x) {
            const Vec3 s{mean.at(y, x, 0), mean.at(y, x, 1), mean.at(y, x, 2)};
            const double n = s.norm();
            const Vec3 q = s * (1.0 / n);
            const Vec3 g{d_half_rays.at(y, x, 0), d_half_rays.at(y, x, 1), d_half_rays.at(y, x, 2)};
            const Vec3 ds = (g - q * q.dot(g)) * (1.0 / n);
            d_mean.at(y, x, 0) = ds.x;
            d_mean.at(y, x, 1) = ds.y;
            d_mean.at(y, x, 2) = ds.z;
        }
    downsample_half_backward(surface.rays, d_mean, d_full_rays);
}

WarpGrid project_cloud(const RaySurface &surface_c, std::span<const Vec3> points, int target_h,
                       int target_w, const PatchSpec &patch, double tau, bool half_res,
                       ProjectCloudCache *cache) {
    if (points.size() != static_cast<size_t>(target_h) * target_w)
        throw std::invalid_argument("project_cloud: points/size mismatch");
    if (tau <= 0) throw std::invalid_argument("project_cloud: tau must be positive");

    const RaySurface search = half_res ? half_res_surface(surface_c) : surface_c;
    patch.validate(search.height(), search.width());
    const double scale = half_res ? 2.0 : 1.0;
    const double offset = half_res ? 0.5 : 0.0;
    const SoaPlanes soa = SoaPlanes::from(search.rays);
    const auto &k = kernels::active();

    const size_t n_px = points.size();
    const size_t cells = static_cast<size_t>(patch.h) * patch.w;

    WarpGrid warp;
    warp.coords = ImageGrid(target_h, target_w, 2);
    warp.valid.assign(n_px, 0);

    if (cache) {
        cache->ph = patch.h;
        cache->pw = patch.w;
        cache->half_res = half_res;
        cache->search_h = search.height();
        cache->search_w = search.width();
        cache->coord_scale = scale;
        cache->coord_offset = offset;
        cache->sx = soa.x;
        cache->sy = soa.y;
        cache->sz = soa.z;
        cache->x0.assign(n_px, 0);
        cache->y0.assign(n_px, 0);
        cache->weights.assign(n_px * cells, 0.0);
        cache->dir.assign(n_px * 3, 0.0);
        cache->dist.assign(n_px, 0.0);
        cache->computed.assign(n_px, 0);
        cache->tau = tau;
    }

    std::vector<double> scores(cells);
    const int hh = patch.h / 2, hw = patch.w / 2;

    for (int ty = 0; ty < target_h; ++ty) {
        for (int tx = 0; tx < target_w; ++tx) {
            const size_t j = static_cast<size_t>(ty) * target_w + tx;
            const Vec3 r = points[j] - surface_c.center;
            const double dist = r.norm();
            if (!(dist > 1e-12)) continue;
            const Vec3 dir = r * (1.0 / dist);

            const int ax = half_res ? std::min(tx / 2, search.width() - 1) : tx;
            const int ay = half_res ? std::min(ty / 2, search.height() - 1) : ty;
            const int x0 = ax - hw, y0 = ay - hh;

            std::fill(scores.begin(), scores.end(), kPatchSentinel);
            const int r0 = std::max(0, y0), r1 = std::min(search.height() - 1, y0 + patch.h - 1);
            const int c0 = std::max(0, x0), c1 = std::min(search.width() - 1, x0 + patch.w - 1);
            double best = kPatchSentinel;
            int best_row = 0, best_col = 0;
            for (int py = r0; py <= r1; ++py) {
                const size_t base = static_cast<size_t>(py) * search.width() + c0;
                const int seg = c1 - c0 + 1;
                double *dst = scores.data() + static_cast<size_t>(py - y0) * patch.w + (c0 - x0);
                k.dot3(soa.x.data() + base, soa.y.data() + base, soa.z.data() + base,
                       static_cast<size_t>(seg), dir.x, dir.y, dir.z, dst);
                for (int c = 0; c < seg; ++c) {
                    if (dst[c] > best) {
                        best = dst[c];
                        best_row = py - y0;
                        best_col = c0 - x0 + c;
                    }
                }
            }

            double wsum = 0, usum = 0, vsum = 0;
            double *wrow = cache ? cache->weights.data() + j * cells : nullptr;
            for (int row = r0 - y0; row <= r1 - y0; ++row) {
                for (int col = c0 - x0; col <= c1 - x0; ++col) {
                    const size_t i = static_cast<size_t>(row) * patch.w + col;
                    const double w = std::exp((scores[i] - best) / tau);
                    if (wrow) wrow[i] = w;
                    wsum += w;
                    usum += w * (x0 + col);
                    vsum += w * (y0 + row);
                }
            }
            const double u = scale * (usum / wsum) + offset;
            const double v = scale * (vsum / wsum) + offset;
            warp.coords.at(ty, tx, 0) = u;
            warp.coords.at(ty, tx, 1) = v;

            const bool saturated = best_row == 0 || best_row == patch.h - 1 || best_col == 0 ||
                                   best_col == patch.w - 1;
            const bool inside = u >= 0 && v >= 0 && u <= target_w - 1 && v <= target_h - 1;
            warp.valid[j] = (!saturated && inside) ? 1 : 0;

            if (cache) {
                cache->x0[j] = x0;
                cache->y0[j] = y0;
                cache->dir[3 * j + 0] = dir.x;
                cache->dir[3 * j + 1] = dir.y;
                cache->dir[3 * j + 2] = dir.z;
                cache->dist[j] = dist;
                cache->computed[j] = 1;
                const double inv = 1.0 / wsum;
                for (size_t i = 0; i < cells; ++i) wrow[i] *= inv;
            }
        }
    }
    return warp;
}

void project_cloud_backward(const RaySurface &surface_c, std::span<const Vec3> points,
                            const WarpGrid &warp, const ProjectCloudCache &cache,
                            std::span<const Vec2> d_coords, ImageGrid *d_rays,
                            std::vector<Vec3> *d_points) {
    const size_t n_px = points.size();
    if (d_coords.size() != n_px)
        throw std::invalid_argument("project_cloud_backward: d_coords size mismatch");
    const size_t cells = static_cast<size_t>(cache.ph) * cache.pw;
    const auto &k = kernels::active();

    const size_t n_search = static_cast<size_t>(cache.search_h) * cache.search_w;
    std::vector<double> dx(n_search, 0.0), dy(n_search, 0.0), dz(n_search, 0.0);
    std::vector<double> ds(cells);

    for (size_t j = 0; j < n_px; ++j) {
        if (!cache.computed[j]) continue;
        const Vec2 g = d_coords[j];
        if (g.x == 0 && g.y == 0) continue;
        const double *w = cache.weights.data() + j * cells;
        const int x0 = cache.x0[j], y0 = cache.y0[j];

        // a_i = g . (scale * cell coords); the constant offset drops out
        // because softmax weights sum to one.
        double abar = 0;
        for (int row = 0; row < cache.ph; ++row)
            for (int col = 0; col < cache.pw; ++col) {
                const size_t i = static_cast<size_t>(row) * cache.pw + col;
                if (w[i] == 0) {
                    ds[i] = 0;
                    continue;
                }
                ds[i] = cache.coord_scale * (g.x * (x0 + col) + g.y * (y0 + row));
                abar += w[i] * ds[i];
            }
        for (size_t i = 0; i < cells; ++i)
            ds[i] = w[i] == 0 ? 0.0 : w[i] * (ds[i] - abar) / cache.tau;

        const Vec3 dir{cache.dir[3 * j + 0], cache.dir[3 * j + 1], cache.dir[3 * j + 2]};
        double ddir[3] = {0, 0, 0};
        const int r0 = std::max(0, y0), r1 = std::min(cache.search_h - 1, y0 + cache.ph - 1);
        const int c0 = std::max(0, x0), c1 = std::min(cache.search_w - 1, x0 + cache.pw - 1);
        for (int py = r0; py <= r1; ++py) {
            const size_t base = static_cast<size_t>(py) * cache.search_w + c0;
            const size_t seg = static_cast<size_t>(c1 - c0 + 1);
            const double *dsr = ds.data() + static_cast<size_t>(py - y0) * cache.pw + (c0 - x0);
            k.dot3_grad(cache.sx.data() + base, cache.sy.data() + base, cache.sz.data() + base,
                        dsr, seg, dir.x, dir.y, dir.z, dx.data() + base, dy.data() + base,
                        dz.data() + base, ddir);
        }

        if (d_points) {
            const Vec3 gd{ddir[0], ddir[1], ddir[2]};
            const Vec3 dp = (gd - dir * dir.dot(gd)) * (1.0 / cache.dist[j]);
            (*d_points)[j] += dp;
        }
    }

    if (d_rays) {
        ImageGrid d_search(cache.search_h, cache.search_w, 3);
        for (size_t i = 0; i < n_search; ++i) {
            d_search.data[3 * i + 0] = dx[i];
            d_search.data[3 * i + 1] = dy[i];
            d_search.data[3 * i + 2] = dz[i];
        }
        if (cache.half_res) {
            half_res_surface_backward(surface_c, d_search, d_rays);
        } else {
            for (size_t i = 0; i < d_search.data.size(); ++i) d_rays->data[i] += d_search.data[i];
        }
    }
    (void)warp;
}

} // namespace nrs
