#pragma once

#include <utility>

#include "nrs/camera.hpp"
#include "nrs/geometry.hpp"
#include "nrs/losses.hpp"
#include "nrs/projection.hpp"

namespace nrs {

struct FramePair {
    ImageGrid target;
    ImageGrid context;
    PoseParams pose_params; // target -> context
};

// Full warping chain: unproject target pixels along its ray surface, move
// them into the context frame, and soft-project onto the context surface.
WarpGrid warp_coords(const ImageGrid &depth, const RaySurface &surface_t, const Pose &pose,
                     const RaySurface &surface_c, const PatchSpec &patch, double tau,
                     bool half_res = false);

struct SynthesisResult {
    ImageGrid image;
    PixelMask mask; // warp-valid AND sample-valid
};

// Sample the context image at the warp coordinates. Pixels whose coordinates
// fall outside the context raster come back zero with mask=false; pixels with
// in-bounds coordinates keep their sampled value even if the warp flagged
// them, only the mask differs.
SynthesisResult synthesize(const ImageGrid &context, const WarpGrid &warp);

} // namespace nrs
