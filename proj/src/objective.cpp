#include "nrs/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace nrs {

namespace {

struct ContextForward {
    std::vector<Vec3> moved; // points in the context frame
    WarpGrid warp;
    ProjectCloudCache cache;
    SynthesisResult synth;
    ImageGrid warped_loss;
    ImageGrid unwarped_loss;
    Pose pose; // as parameterized (before optional inversion)
};

} // namespace

TargetObjective evaluate_target(const ImageGrid &target, const ImageGrid &depth,
                                const RaySurface &surface_t,
                                const std::vector<ContextObs> &contexts,
                                const ObjectiveOptions &opt, bool with_grads) {
    if (contexts.empty()) throw std::invalid_argument("evaluate_target: no contexts");
    const int h = target.height, w = target.width;
    const size_t n_px = static_cast<size_t>(h) * w;

    const std::vector<Vec3> points = ray_unproject(surface_t, depth);

    std::vector<ContextForward> fwd(contexts.size());
    std::vector<ImageGrid> warped_maps;
    std::vector<ImageGrid> unwarped_maps;
    std::vector<PixelMask> warp_masks;
    std::vector<PixelMask> full_masks;
    for (size_t c = 0; c < contexts.size(); ++c) {
        const ContextObs &obs = contexts[c];
        ContextForward &f = fwd[c];
        f.pose = euler_to_pose(obs.pose);
        f.moved.resize(n_px);
        if (obs.inverted) {
            for (size_t i = 0; i < n_px; ++i)
                f.moved[i] = f.pose.rotation.tmul(points[i] - f.pose.translation);
        } else {
            for (size_t i = 0; i < n_px; ++i) f.moved[i] = f.pose.apply(points[i]);
        }
        f.warp = project_cloud(*obs.surface, f.moved, h, w, opt.patch, opt.tau, opt.half_res,
                               with_grads ? &f.cache : nullptr);
        f.synth = synthesize(*obs.image, f.warp);
        f.warped_loss = photometric_loss(target, f.synth.image, opt.weights);
        f.unwarped_loss = photometric_loss(target, *obs.image, opt.weights);
        warped_maps.push_back(f.warped_loss);
        unwarped_maps.push_back(f.unwarped_loss);
        warp_masks.push_back(f.synth.mask);
        full_masks.emplace_back();
    }

    const MinContextResult min_warped = min_over_context(warped_maps, warp_masks);
    const MinContextResult min_unwarped = min_over_context(unwarped_maps, full_masks);
    const PixelMask keep = auto_mask(min_warped.loss, min_unwarped.loss);

    TargetObjective out;
    PixelMask final_mask(n_px, 0);
    size_t n_valid = 0;
    for (size_t i = 0; i < n_px; ++i) {
        final_mask[i] = min_warped.valid[i] && keep[i];
        n_valid += final_mask[i];
    }
    out.valid_fraction = static_cast<double>(n_valid) / static_cast<double>(n_px);
    out.smooth = smoothness_loss(depth, target);
    if (n_valid == 0) {
        out.degenerate = true;
        out.photo = 0;
        out.loss = opt.weights.lambda_d * out.smooth;
        return out;
    }
    out.photo = masked_mean(min_warped.loss, final_mask);
    out.loss = out.photo + opt.weights.lambda_d * out.smooth;

    if (!with_grads) return out;

    out.d_depth = ImageGrid(h, w, 1);
    out.d_rays_t = ImageGrid(h, w, 3);
    out.contexts.resize(contexts.size());
    for (size_t c = 0; c < contexts.size(); ++c)
        out.contexts[c].d_rays = ImageGrid(contexts[c].surface->height(),
                                           contexts[c].surface->width(), 3);

    smoothness_loss_backward(depth, target, opt.weights.lambda_d, &out.d_depth);

    // Route the masked-mean gradient to the winning context of each pixel.
    // The auto-mask and the min selection are treated as fixed at the
    // current iterate.
    const double inv_count = 1.0 / static_cast<double>(n_valid);
    std::vector<Vec3> d_points(n_px, Vec3{});
    for (size_t c = 0; c < contexts.size(); ++c) {
        const ContextObs &obs = contexts[c];
        ContextForward &f = fwd[c];
        ImageGrid d_map(h, w, 1);
        bool any = false;
        for (size_t i = 0; i < n_px; ++i) {
            if (final_mask[i] && min_warped.argmin[i] == static_cast<int>(c)) {
                d_map.data[i] = inv_count;
                any = true;
            }
        }
        if (!any) continue;

        ImageGrid d_synth(h, w, target.channels);
        photometric_loss_backward(target, f.synth.image, opt.weights, d_map, &d_synth);

        std::vector<Vec2> coords(n_px);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) coords[static_cast<size_t>(y) * w + x] = f.warp.at(y, x);
        std::vector<Vec2> d_coords;
        bilinear_sample_backward(*obs.image, coords, d_synth.data, nullptr, &d_coords);

        std::vector<Vec3> d_moved(n_px, Vec3{});
        project_cloud_backward(*obs.surface, f.moved, f.warp, f.cache, d_coords,
                               &out.contexts[c].d_rays, &d_moved);

        const auto d_rot = euler_rotation_jacobian(obs.pose.euler);
        Vec3 d_t{}, d_e{};
        if (obs.inverted) {
            // P' = R^T (P - t)
            for (size_t i = 0; i < n_px; ++i) {
                const Vec3 &g = d_moved[i];
                if (g.x == 0 && g.y == 0 && g.z == 0) continue;
                const Vec3 rel = points[i] - f.pose.translation;
                d_points[i] += f.pose.rotation * g;
                d_t += -(f.pose.rotation * g);
                d_e.x += g.dot(d_rot[0].tmul(rel));
                d_e.y += g.dot(d_rot[1].tmul(rel));
                d_e.z += g.dot(d_rot[2].tmul(rel));
            }
        } else {
            // P' = R P + t
            for (size_t i = 0; i < n_px; ++i) {
                const Vec3 &g = d_moved[i];
                if (g.x == 0 && g.y == 0 && g.z == 0) continue;
                d_points[i] += f.pose.rotation.tmul(g);
                d_t += g;
                d_e.x += g.dot(d_rot[0] * points[i]);
                d_e.y += g.dot(d_rot[1] * points[i]);
                d_e.z += g.dot(d_rot[2] * points[i]);
            }
        }
        out.contexts[c].d_translation = d_t;
        out.contexts[c].d_euler = d_e;
    }

    // P = d * Q_t
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const Vec3 &g = d_points[i];
            const Vec3 q = surface_t.ray(y, x);
            out.d_depth.at(y, x) += q.dot(g);
            const double d = depth.at(y, x);
            out.d_rays_t.at(y, x, 0) += d * g.x;
            out.d_rays_t.at(y, x, 1) += d * g.y;
            out.d_rays_t.at(y, x, 2) += d * g.z;
        }

    return out;
}

} // namespace nrs
