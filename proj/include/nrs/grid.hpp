#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nrs/types.hpp"

namespace nrs {

// Dense H x W x C raster. Canonical memory order everywhere in this project:
// row-major, top row first, channels interleaved (index = (y*W + x)*C + c).
// Image payloads live in [0,1]; loss/score/ray payloads are unconstrained.
struct ImageGrid {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    ImageGrid() = default;
    ImageGrid(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(c), fill) {}

    size_t idx(int y, int x, int c = 0) const {
        return (static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) *
                   static_cast<size_t>(channels) +
               static_cast<size_t>(c);
    }
    double &at(int y, int x, int c = 0) { return data[idx(y, x, c)]; }
    double at(int y, int x, int c = 0) const { return data[idx(y, x, c)]; }

    size_t size() const { return data.size(); }
    bool same_shape(const ImageGrid &o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct SampleResult {
    std::vector<double> values;  // query-major, C values per query
    std::vector<uint8_t> valid;  // one flag per query
};

// Bilinear sampling at continuous (u,v) = (column,row) coordinates. Queries
// outside [0,W-1]x[0,H-1] return zero values with valid=false.
SampleResult bilinear_sample(const ImageGrid &grid, std::span<const Vec2> coords);

// Adjoint of bilinear_sample. d_values is query-major with C entries per
// query. Accumulates into d_grid (if non-null, must match grid shape) and
// d_coords (if non-null, one Vec2 per query). Invalid queries contribute
// nothing.
void bilinear_sample_backward(const ImageGrid &grid, std::span<const Vec2> coords,
                              std::span<const double> d_values, ImageGrid *d_grid,
                              std::vector<Vec2> *d_coords);

// 2x2 block means; edge blocks truncated. Rejects 1xN / Nx1 inputs.
ImageGrid downsample_half(const ImageGrid &grid);
void downsample_half_backward(const ImageGrid &grid, const ImageGrid &d_out, ImageGrid *d_grid);

// Align-corners bilinear upsampling to (out_h, out_w). Rejects shrinking.
ImageGrid upsample_bilinear(const ImageGrid &grid, int out_h, int out_w);
void upsample_bilinear_backward(const ImageGrid &grid, const ImageGrid &d_out, ImageGrid *d_grid);

// Pairwise (cascade) summation; used for every loss reduction so that the
// summation order is fixed and rounding stays below 1e-10 relative.
double pairwise_sum(std::span<const double> values);

} // namespace nrs
