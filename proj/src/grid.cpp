#include "nrs/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace nrs {

namespace {

inline bool in_bounds(const ImageGrid &g, double u, double v) {
    return u >= 0.0 && v >= 0.0 && u <= static_cast<double>(g.width - 1) &&
           v <= static_cast<double>(g.height - 1);
}

struct Corner {
    int x0, y0, x1, y1;
    double fx, fy;
};

inline Corner corners(const ImageGrid &g, double u, double v) {
    Corner c;
    c.x0 = static_cast<int>(std::floor(u));
    c.y0 = static_cast<int>(std::floor(v));
    if (c.x0 >= g.width - 1) c.x0 = g.width - 2;
    if (c.y0 >= g.height - 1) c.y0 = g.height - 2;
    if (c.x0 < 0) c.x0 = 0;
    if (c.y0 < 0) c.y0 = 0;
    c.x1 = c.x0 + 1;
    c.y1 = c.y0 + 1;
    c.fx = u - c.x0;
    c.fy = v - c.y0;
    return c;
}

} // namespace

SampleResult bilinear_sample(const ImageGrid &grid, std::span<const Vec2> coords) {
    if (grid.height < 1 || grid.width < 1 || grid.channels < 1)
        throw std::invalid_argument("bilinear_sample: empty grid");
    const int C = grid.channels;
    SampleResult out;
    out.values.assign(coords.size() * static_cast<size_t>(C), 0.0);
    out.valid.assign(coords.size(), 0);
    for (size_t q = 0; q < coords.size(); ++q) {
        const double u = coords[q].x, v = coords[q].y;
        if (!std::isfinite(u) || !std::isfinite(v) || !in_bounds(grid, u, v)) continue;
        out.valid[q] = 1;
        if (grid.width == 1 && grid.height == 1) {
            for (int c = 0; c < C; ++c) out.values[q * C + c] = grid.at(0, 0, c);
            continue;
        }
        // Degenerate 1-wide / 1-tall grids interpolate along the live axis only.
        if (grid.width == 1) {
            int y0 = std::min(static_cast<int>(std::floor(v)), grid.height - 2);
            double fy = v - y0;
            for (int c = 0; c < C; ++c)
                out.values[q * C + c] =
                    (1 - fy) * grid.at(y0, 0, c) + fy * grid.at(y0 + 1, 0, c);
            continue;
        }
        if (grid.height == 1) {
            int x0 = std::min(static_cast<int>(std::floor(u)), grid.width - 2);
            double fx = u - x0;
            for (int c = 0; c < C; ++c)
                out.values[q * C + c] =
                    (1 - fx) * grid.at(0, x0, c) + fx * grid.at(0, x0 + 1, c);
            continue;
        }
        const Corner k = corners(grid, u, v);
        const double w00 = (1 - k.fx) * (1 - k.fy), w10 = k.fx * (1 - k.fy);
        const double w01 = (1 - k.fx) * k.fy, w11 = k.fx * k.fy;
        for (int c = 0; c < C; ++c) {
            out.values[q * C + c] = w00 * grid.at(k.y0, k.x0, c) + w10 * grid.at(k.y0, k.x1, c) +
                                    w01 * grid.at(k.y1, k.x0, c) + w11 * grid.at(k.y1, k.x1, c);
        }
    }
    return out;
}

void bilinear_sample_backward(const ImageGrid &grid, std::span<const Vec2> coords,
                              std::span<const double> d_values, ImageGrid *d_grid,
                              std::vector<Vec2> *d_coords) {
    const int C = grid.channels;
    if (d_values.size() != coords.size() * static_cast<size_t>(C))
        throw std::invalid_argument("bilinear_sample_backward: d_values size mismatch");
    if (d_coords) d_coords->assign(coords.size(), Vec2{});
    for (size_t q = 0; q < coords.size(); ++q) {
        const double u = coords[q].x, v = coords[q].y;
        if (!std::isfinite(u) || !std::isfinite(v) || !in_bounds(grid, u, v)) continue;
        if (grid.width == 1 || grid.height == 1) {
            // Degenerate axes carry no u (resp. v) gradient; rarely used path.
            if (grid.width == 1 && grid.height == 1) {
                if (d_grid)
                    for (int c = 0; c < C; ++c) d_grid->at(0, 0, c) += d_values[q * C + c];
                continue;
            }
            if (grid.width == 1) {
                int y0 = std::min(static_cast<int>(std::floor(v)), grid.height - 2);
                double fy = v - y0;
                double dv = 0;
                for (int c = 0; c < C; ++c) {
                    double g = d_values[q * C + c];
                    if (d_grid) {
                        d_grid->at(y0, 0, c) += (1 - fy) * g;
                        d_grid->at(y0 + 1, 0, c) += fy * g;
                    }
                    dv += g * (grid.at(y0 + 1, 0, c) - grid.at(y0, 0, c));
                }
                if (d_coords) (*d_coords)[q].y = dv;
            } else {
                int x0 = std::min(static_cast<int>(std::floor(u)), grid.width - 2);
                double fx = u - x0;
                double du = 0;
                for (int c = 0; c < C; ++c) {
                    double g = d_values[q * C + c];
                    if (d_grid) {
                        d_grid->at(0, x0, c) += (1 - fx) * g;
                        d_grid->at(0, x0 + 1, c) += fx * g;
                    }
                    du += g * (grid.at(0, x0 + 1, c) - grid.at(0, x0, c));
                }
                if (d_coords) (*d_coords)[q].x = du;
            }
            continue;
        }
        const Corner k = corners(grid, u, v);
        double du = 0, dv = 0;
        for (int c = 0; c < C; ++c) {
            const double g = d_values[q * C + c];
            const double g00 = grid.at(k.y0, k.x0, c), g10 = grid.at(k.y0, k.x1, c);
            const double g01 = grid.at(k.y1, k.x0, c), g11 = grid.at(k.y1, k.x1, c);
            if (d_grid) {
                d_grid->at(k.y0, k.x0, c) += (1 - k.fx) * (1 - k.fy) * g;
                d_grid->at(k.y0, k.x1, c) += k.fx * (1 - k.fy) * g;
                d_grid->at(k.y1, k.x0, c) += (1 - k.fx) * k.fy * g;
                d_grid->at(k.y1, k.x1, c) += k.fx * k.fy * g;
            }
            du += g * ((1 - k.fy) * (g10 - g00) + k.fy * (g11 - g01));
            dv += g * ((1 - k.fx) * (g01 - g00) + k.fx * (g11 - g10));
        }
        if (d_coords) {
            (*d_coords)[q].x = du;
            (*d_coords)[q].y = dv;
        }
    }
}

ImageGrid downsample_half(const ImageGrid &grid) {
    if (grid.height < 2 || grid.width < 2)
        throw std::invalid_argument("downsample_half: need at least 2x2");
    const int oh = (grid.height + 1) / 2, ow = (grid.width + 1) / 2;
    ImageGrid out(oh, ow, grid.channels);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const int y1 = std::min(2 * y + 1, grid.height - 1);
            const int x1 = std::min(2 * x + 1, grid.width - 1);
            const int ny = y1 - 2 * y + 1, nx = x1 - 2 * x + 1;
            const double inv = 1.0 / (ny * nx);
            for (int c = 0; c < grid.channels; ++c) {
                double s = 0;
                for (int yy = 2 * y; yy <= y1; ++yy)
                    for (int xx = 2 * x; xx <= x1; ++xx) s += grid.at(yy, xx, c);
                out.at(y, x, c) = s * inv;
            }
        }
    }
    return out;
}

void downsample_half_backward(const ImageGrid &grid, const ImageGrid &d_out, ImageGrid *d_grid) {
    const int oh = (grid.height + 1) / 2, ow = (grid.width + 1) / 2;
    if (d_out.height != oh || d_out.width != ow || d_out.channels != grid.channels)
        throw std::invalid_argument("downsample_half_backward: shape mismatch");
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const int y1 = std::min(2 * y + 1, grid.height - 1);
            const int x1 = std::min(2 * x + 1, grid.width - 1);
            const double inv = 1.0 / ((y1 - 2 * y + 1) * (x1 - 2 * x + 1));
            for (int c = 0; c < grid.channels; ++c) {
                const double g = d_out.at(y, x, c) * inv;
                for (int yy = 2 * y; yy <= y1; ++yy)
                    for (int xx = 2 * x; xx <= x1; ++xx) d_grid->at(yy, xx, c) += g;
            }
        }
    }
}

namespace {

// Align-corners source coordinate for output index i of n_out over n_in.
inline double src_coord(int i, int n_out, int n_in) {
    if (n_out == 1) return 0.0;
    return static_cast<double>(i) * (n_in - 1) / static_cast<double>(n_out - 1);
}

} // namespace

ImageGrid upsample_bilinear(const ImageGrid &grid, int out_h, int out_w) {
    if (out_h < grid.height || out_w < grid.width)
        throw std::invalid_argument("upsample_bilinear: target smaller than source");
    ImageGrid out(out_h, out_w, grid.channels);
    for (int y = 0; y < out_h; ++y) {
        const double sv = src_coord(y, out_h, grid.height);
        int y0 = std::min(static_cast<int>(sv), std::max(grid.height - 2, 0));
        const double fy = sv - y0;
        const int y1 = std::min(y0 + 1, grid.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const double su = src_coord(x, out_w, grid.width);
            int x0 = std::min(static_cast<int>(su), std::max(grid.width - 2, 0));
            const double fx = su - x0;
            const int x1 = std::min(x0 + 1, grid.width - 1);
            for (int c = 0; c < grid.channels; ++c) {
                out.at(y, x, c) = (1 - fy) * ((1 - fx) * grid.at(y0, x0, c) + fx * grid.at(y0, x1, c)) +
                                  fy * ((1 - fx) * grid.at(y1, x0, c) + fx * grid.at(y1, x1, c));
            }
        }
    }
    return out;
}

void upsample_bilinear_backward(const ImageGrid &grid, const ImageGrid &d_out, ImageGrid *d_grid) {
    const int out_h = d_out.height, out_w = d_out.width;
    for (int y = 0; y < out_h; ++y) {
        const double sv = src_coord(y, out_h, grid.height);
        int y0 = std::min(static_cast<int>(sv), std::max(grid.height - 2, 0));
        const double fy = sv - y0;
        const int y1 = std::min(y0 + 1, grid.height - 1);
        for (int x = 0; x < out_w; ++x) {
            const double su = src_coord(x, out_w, grid.width);
            int x0 = std::min(static_cast<int>(su), std::max(grid.width - 2, 0));
            const double fx = su - x0;
            const int x1 = std::min(x0 + 1, grid.width - 1);
            for (int c = 0; c < grid.channels; ++c) {
                const double g = d_out.at(y, x, c);
                d_grid->at(y0, x0, c) += (1 - fy) * (1 - fx) * g;
                d_grid->at(y0, x1, c) += (1 - fy) * fx * g;
                d_grid->at(y1, x0, c) += fy * (1 - fx) * g;
                d_grid->at(y1, x1, c) += fy * fx * g;
            }
        }
    }
}

double pairwise_sum(std::span<const double> values) {
    const size_t n = values.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0;
        for (double v : values) s += v;
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace nrs
