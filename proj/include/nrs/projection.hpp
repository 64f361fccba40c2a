#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nrs/camera.hpp"
#include "nrs/grid.hpp"
#include "nrs/types.hpp"

namespace nrs {

struct PatchSpec {
    int h = 41;
    int w = 41;

    void validate(int max_h, int max_w) const;
};

// Cosine-similarity window around an anchor pixel. Cells clamped away at the
// image border keep a -inf-equivalent sentinel score and in_bounds = false.
struct SimilarityPatch {
    int anchor_x = 0, anchor_y = 0;
    int h = 0, w = 0;
    int x0 = 0, y0 = 0; // pixel coordinates of cell (0,0)
    std::vector<double> scores;
    std::vector<uint8_t> in_bounds;

    double score(int row, int col) const { return scores[static_cast<size_t>(row) * w + col]; }
};

// Continuous source coordinates for every target pixel plus validity.
struct WarpGrid {
    ImageGrid coords; // H x W x 2 (u,v)
    std::vector<uint8_t> valid;

    Vec2 at(int y, int x) const { return {coords.at(y, x, 0), coords.at(y, x, 1)}; }
    bool is_valid(int y, int x) const {
        return valid[static_cast<size_t>(y) * coords.width + x] != 0;
    }
};

constexpr double kPatchSentinel = -1e30;

SimilarityPatch similarity_patch(const RaySurface &surface_c, const Vec3 &point,
                                 const Vec2 &anchor, const PatchSpec &patch);

// Soft-argmax over the unclamped cells: softmax(scores/tau) weighted sum of
// absolute cell coordinates.
Vec2 soft_project(const SimilarityPatch &patch, double tau);

// d(loss)/d(scores) given d(loss)/d(output coords).
std::vector<double> soft_project_backward(const SimilarityPatch &patch, double tau,
                                          const Vec2 &d_coords);

// Exhaustive full-image argmax of the ray/direction similarity. Ties break
// toward the smallest row-major index. Non-differentiable; test oracle only.
size_t hard_project(const RaySurface &surface_c, const Vec3 &point);

// Geometric interpolation from tau_start down to tau_end.
double anneal_tau(int step, int total, double tau_start, double tau_end);

// Retained intermediates for project_cloud_backward.
struct ProjectCloudCache {
    int ph = 0, pw = 0;
    bool half_res = false;
    int search_h = 0, search_w = 0;
    double coord_scale = 1.0, coord_offset = 0.0; // full = scale*search + offset
    std::vector<double> sx, sy, sz;               // search surface, SoA planes
    std::vector<int> x0, y0;                      // per-pixel window origin
    std::vector<double> weights;                  // per-pixel ph*pw softmax weights
    std::vector<double> dir;                      // per-pixel unit direction (3)
    std::vector<double> dist;                     // per-pixel |P - S|
    std::vector<uint8_t> computed;
    double tau = 0.0;
};

// Patch-restricted soft projection of one 3D point per target pixel. The
// anchor for each target pixel is its own (u,v). When half_res is set the
// search runs on the surface downsampled 2x (block mean + renormalize) and
// results map back to full-resolution coordinates. Invalid where the soft
// output leaves bounds or the patch argmax saturates at the window border.
WarpGrid project_cloud(const RaySurface &surface_c, std::span<const Vec3> points, int target_h,
                       int target_w, const PatchSpec &patch, double tau, bool half_res = false,
                       ProjectCloudCache *cache = nullptr);

// Accumulates gradients w.r.t. the full-resolution context rays and the 3D
// points from gradients w.r.t. the warp coordinates. Invalid pixels (and
// pixels with d_coords zero) contribute nothing.
void project_cloud_backward(const RaySurface &surface_c, std::span<const Vec3> points,
                            const WarpGrid &warp, const ProjectCloudCache &cache,
                            std::span<const Vec2> d_coords, ImageGrid *d_rays,
                            std::vector<Vec3> *d_points);

// Half-resolution search surface: 2x2 block mean of unit rays, renormalized.
RaySurface half_res_surface(const RaySurface &surface);
void half_res_surface_backward(const RaySurface &surface, const ImageGrid &d_half_rays,
                               ImageGrid *d_full_rays);

} // namespace nrs
