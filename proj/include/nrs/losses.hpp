#pragma once

#include <cstdint>
#include <vector>

#include "nrs/grid.hpp"

namespace nrs {

struct LossWeights {
    double alpha = 0.85;     // SSIM weight
    double lambda_d = 0.001; // smoothness weight
};

// Per-pixel SSIM (channel-averaged) with 3x3 mean pooling, C1 = 0.01^2,
// C2 = 0.03^2 for unit dynamic range. Windows are clamped at the border and
// normalized by the live cell count.
ImageGrid ssim_map(const ImageGrid &a, const ImageGrid &b);

// Gradient of sum(d_map * ssim_map(a,b)) w.r.t. b, accumulated into d_b.
void ssim_map_backward(const ImageGrid &a, const ImageGrid &b, const ImageGrid &d_map,
                       ImageGrid *d_b);

// Per-pixel alpha*(1-SSIM)/2 + (1-alpha)*mean_c|a-b|.
ImageGrid photometric_loss(const ImageGrid &target, const ImageGrid &synth,
                           const LossWeights &weights);
void photometric_loss_backward(const ImageGrid &target, const ImageGrid &synth,
                               const LossWeights &weights, const ImageGrid &d_map,
                               ImageGrid *d_synth);

using PixelMask = std::vector<uint8_t>;

struct MinContextResult {
    ImageGrid loss;        // per-pixel minimum over valid contexts
    PixelMask valid;       // pixel valid in at least one context
    std::vector<int> argmin; // which context won; -1 where all invalid
};

MinContextResult min_over_context(const std::vector<ImageGrid> &losses,
                                  const std::vector<PixelMask> &masks);

// Keep a pixel iff its warped loss is strictly below the unwarped loss.
PixelMask auto_mask(const ImageGrid &warped_loss, const ImageGrid &unwarped_loss);

// Edge-aware smoothness of mean-normalized inverse depth (Ls). Forward
// differences; image gradients channel-averaged; mean over all H*W pixels.
double smoothness_loss(const ImageGrid &depth, const ImageGrid &image);
void smoothness_loss_backward(const ImageGrid &depth, const ImageGrid &image, double d_loss,
                              ImageGrid *d_depth);

// Mean of map over mask-true pixels, pairwise-summed. Throws if no pixel is
// valid (divergence guard lives in the caller).
double masked_mean(const ImageGrid &map, const PixelMask &mask);

// masked photometric mean + lambda_d * smoothness.
double total_loss(const ImageGrid &min_photo, const PixelMask &mask, const ImageGrid &depth,
                  const ImageGrid &image, const LossWeights &weights);

} // namespace nrs
