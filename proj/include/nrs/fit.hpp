#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nrs/camera.hpp"
#include "nrs/geometry.hpp"
#include "nrs/losses.hpp"
#include "nrs/objective.hpp"
#include "nrs/projection.hpp"

namespace nrs {

struct FitConfig {
    int epochs = 20;
    int steps_per_epoch = 25;
    double lr = 2e-4;
    double residual_lr = -1.0; // <0: same as lr; Adam steps are lr-sized even
                               // for weakly constrained components, so the
                               // surface residual often wants a smaller rate
    PatchSpec patch{41, 41};
    double tau_start = 1.0;
    double tau_end = 0.01;
    int lambda_r_ramp_epochs = 10;
    LossWeights weights;
    bool per_frame_surface = false;
    uint64_t seed = 0;
    double d_min = 0.1;
    double d_max = 100.0;
    bool half_res_search = true;

    bool fit_pose = true;
    bool fit_residual = true;
    double init_depth = -1.0; // <0: geometric mid-range of [d_min, d_max]
    double min_valid_fraction = 0.05; // collapse level for the divergence guard
    double lr_min_factor = 1.0 / 64.0; // divergence guard floor
};

// Serialize / parse the flat key=value config format. Unknown keys are
// rejected.
FitConfig parse_fit_config(const std::string &path);
void write_fit_config(const std::string &path, const FitConfig &config);

// The optimizable bundle: unconstrained inverse-depth parameters per frame,
// ray-surface residual(s), and chain pose parameters (frame i -> i+1).
struct FitState {
    int height = 0, width = 0;
    std::vector<ImageGrid> inv_depth_params; // one H x W x 1 grid per frame
    std::vector<ResidualSurface> residuals;  // one entry (shared) or one per frame
    std::vector<PoseParams> pose_params;     // n_frames - 1 entries
    int step = 0;
};

struct FitDiagnostics {
    std::vector<double> step_loss;
    std::vector<double> valid_fraction; // min over targets, per step
    std::vector<int> rejected_steps;
    bool static_scene = false;
    bool diverged = false;
};

struct FitResult {
    FitState state;
    RaySurface template_surface;
    std::vector<double> loss_curve; // per completed epoch
    FitDiagnostics diagnostics;
    FitConfig config;
};

struct FitInputs {
    std::vector<ImageGrid> frames;
    std::optional<RaySurface> template_surface;     // default: pinhole W/2 template
    std::optional<std::vector<PoseParams>> init_pose; // chain initialization (e.g. GT)
    std::optional<FitState> init_state; // warm start (e.g. a coarse first stage);
                                        // optimizer moments restart fresh
};

// Map unconstrained parameters to depth in [d_min, d_max] through a sigmoid
// on inverse depth. decode_depth_backward accumulates d(loss)/d(params).
ImageGrid decode_depth(const ImageGrid &params, double d_min, double d_max);
void decode_depth_backward(const ImageGrid &params, const ImageGrid &d_depth, double d_min,
                           double d_max, ImageGrid *d_params);
double encode_depth(double depth, double d_min, double d_max);

// min(1, epoch/ramp)
double lambda_r_schedule(int epoch, int ramp_epochs);

FitResult fit_scene(const FitInputs &inputs, const FitConfig &config);
FitResult fit_scene(const std::vector<ImageGrid> &frames, const FitConfig &config);

// Accumulated camera-to-world trajectory from the chain pose parameters,
// starting at the identity.
std::vector<Pose> accumulate_trajectory(const std::vector<PoseParams> &chain);

// Decoded depth maps of a state.
std::vector<ImageGrid> decode_all_depths(const FitState &state, const FitConfig &config);

// Composed surface for frame index (shared residual unless per-frame).
RaySurface composed_surface(const FitResult &result, int frame);

// Writes decoded depths (PFM), composed surface (PFM), trajectory (text),
// residual grids (PFM) and an exact double-precision state blob; reload is
// bit-identical to the exported state.
void export_state(const FitResult &result, const std::string &dir);
FitState import_state(const std::string &dir);

} // namespace nrs
