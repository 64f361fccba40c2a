#pragma once

#include <vector>

#include "nrs/camera.hpp"
#include "nrs/geometry.hpp"
#include "nrs/losses.hpp"
#include "nrs/projection.hpp"
#include "nrs/synthesis.hpp"

namespace nrs {

// One context frame as seen from a target: its image, composed ray surface,
// and the chain pose parameters of the adjacent pair. `inverted` marks
// contexts that precede the target (the stored params parameterize
// context -> target, so the warp uses the inverse transform).
struct ContextObs {
    const ImageGrid *image = nullptr;
    const RaySurface *surface = nullptr;
    PoseParams pose;
    bool inverted = false;
};

struct ObjectiveOptions {
    PatchSpec patch;
    double tau = 0.01;
    bool half_res = false;
    LossWeights weights;
};

struct ContextGrads {
    ImageGrid d_rays; // w.r.t. the composed full-res context rays
    Vec3 d_translation{};
    Vec3 d_euler{};
};

// Loss of one target frame against its contexts, with analytic gradients
// w.r.t. decoded depth, both composed surfaces, and the pose parameters.
struct TargetObjective {
    double loss = 0, photo = 0, smooth = 0;
    double valid_fraction = 0;
    bool degenerate = false; // auto-mask or warp validity emptied the pixel set
    ImageGrid d_depth;
    ImageGrid d_rays_t;
    std::vector<ContextGrads> contexts;
};

TargetObjective evaluate_target(const ImageGrid &target, const ImageGrid &depth,
                                const RaySurface &surface_t,
                                const std::vector<ContextObs> &contexts,
                                const ObjectiveOptions &opt, bool with_grads);

} // namespace nrs
