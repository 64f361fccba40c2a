#pragma once

#include <string>
#include <vector>

#include "nrs/camera.hpp"
#include "nrs/geometry.hpp"
#include "nrs/grid.hpp"

namespace nrs {

struct DepthMetrics {
    double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;
    double delta1 = 0, delta2 = 0, delta3 = 0;
};

// Median-scaled depth metrics over pixels with 0 < gt <= max_depth.
// Predictions are scaled by median(gt)/median(pred), then clamped to
// [min_depth, max_depth].
DepthMetrics depth_metrics(const ImageGrid &pred, const ImageGrid &gt, double max_depth,
                           double min_depth = 0.1);

// RMSE of translation residuals after similarity (rotation+translation+scale)
// alignment of the predicted positions onto ground truth.
double ate_full(const std::vector<Pose> &pred, const std::vector<Pose> &gt);

struct SnippetAte {
    double mean = 0;
    double stddev = 0; // population stddev over windows
};

// Sliding windows of `snippet` frames, each aligned independently.
SnippetAte ate_snippets(const std::vector<Pose> &pred, const std::vector<Pose> &gt,
                        int snippet = 5);

// Coefficient of variation across surfaces: per pixel per component
// stddev/|mean| (population stddev), entries with |mean| < 1e-2 excluded
// (a component that far below the unit ray norm has no stable sign),
// averaged over the rest.
double surface_cov(const std::vector<RaySurface> &surfaces);

// Flat key=value text + JSON with the same fields.
void write_depth_report(const std::string &txt_path, const std::string &json_path,
                        const DepthMetrics &m);
void write_odom_report(const std::string &txt_path, const std::string &json_path, double ate,
                       const SnippetAte &snippets);

} // namespace nrs
