#include "nrs/synthesis.hpp"

#include <stdexcept>

namespace nrs {

WarpGrid warp_coords(const ImageGrid &depth, const RaySurface &surface_t, const Pose &pose,
                     const RaySurface &surface_c, const PatchSpec &patch, double tau,
                     bool half_res) {
    const std::vector<Vec3> points = ray_unproject(surface_t, depth);
    const std::vector<Vec3> moved = transform_points(pose, points);
    return project_cloud(surface_c, moved, depth.height, depth.width, patch, tau, half_res);
}

SynthesisResult synthesize(const ImageGrid &context, const WarpGrid &warp) {
    const int h = warp.coords.height, w = warp.coords.width;
    if (context.height != h || context.width != w)
        throw std::invalid_argument("synthesize: dimension mismatch");
    std::vector<Vec2> coords;
    coords.reserve(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) coords.push_back(warp.at(y, x));
    const SampleResult s = bilinear_sample(context, coords);

    SynthesisResult out;
    out.image = ImageGrid(h, w, context.channels);
    out.image.data = s.values;
    out.mask.assign(coords.size(), 0);
    for (size_t i = 0; i < coords.size(); ++i) out.mask[i] = warp.valid[i] && s.valid[i];
    return out;
}

} // namespace nrs
