#include "nrs/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace nrs {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// 3x3 box mean with border clamping (live-cell count normalization).
std::vector<double> box3_mean(const std::vector<double> &plane, int h, int w) {
    std::vector<double> out(plane.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
            double s = 0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) s += plane[static_cast<size_t>(yy) * w + xx];
            out[static_cast<size_t>(y) * w + x] = s / ((y1 - y0 + 1) * (x1 - x0 + 1));
        }
    }
    return out;
}

// Transpose of box3_mean: scatters g(p)/n_p back over p's window.
std::vector<double> box3_scatter(const std::vector<double> &g, int h, int w) {
    std::vector<double> out(g.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
            const double v = g[static_cast<size_t>(y) * w + x] / ((y1 - y0 + 1) * (x1 - x0 + 1));
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) out[static_cast<size_t>(yy) * w + xx] += v;
        }
    }
    return out;
}

std::vector<double> channel_plane(const ImageGrid &g, int c) {
    std::vector<double> out(static_cast<size_t>(g.height) * g.width);
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) out[static_cast<size_t>(y) * g.width + x] = g.at(y, x, c);
    return out;
}

struct SsimStats {
    std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
};

SsimStats ssim_stats(const std::vector<double> &a, const std::vector<double> &b, int h, int w) {
    SsimStats s;
    const size_t n = a.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    s.mu_a = box3_mean(a, h, w);
    s.mu_b = box3_mean(b, h, w);
    s.e_aa = box3_mean(aa, h, w);
    s.e_bb = box3_mean(bb, h, w);
    s.e_ab = box3_mean(ab, h, w);
    return s;
}

} // namespace

ImageGrid ssim_map(const ImageGrid &a, const ImageGrid &b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim_map: shape mismatch");
    ImageGrid out(a.height, a.width, 1);
    const size_t n = static_cast<size_t>(a.height) * a.width;
    for (int c = 0; c < a.channels; ++c) {
        const auto pa = channel_plane(a, c), pb = channel_plane(b, c);
        const SsimStats s = ssim_stats(pa, pb, a.height, a.width);
        for (size_t i = 0; i < n; ++i) {
            const double va = s.e_aa[i] - s.mu_a[i] * s.mu_a[i];
            const double vb = s.e_bb[i] - s.mu_b[i] * s.mu_b[i];
            const double cov = s.e_ab[i] - s.mu_a[i] * s.mu_b[i];
            const double num = (2 * s.mu_a[i] * s.mu_b[i] + kC1) * (2 * cov + kC2);
            const double den = (s.mu_a[i] * s.mu_a[i] + s.mu_b[i] * s.mu_b[i] + kC1) * (va + vb + kC2);
            out.data[i] += num / den / a.channels;
        }
    }
    return out;
}

void ssim_map_backward(const ImageGrid &a, const ImageGrid &b, const ImageGrid &d_map,
                       ImageGrid *d_b) {
    const int h = a.height, w = a.width;
    const size_t n = static_cast<size_t>(h) * w;
    for (int c = 0; c < a.channels; ++c) {
        const auto pa = channel_plane(a, c), pb = channel_plane(b, c);
        const SsimStats s = ssim_stats(pa, pb, h, w);
        std::vector<double> g_mub(n), g_ebb(n), g_eab(n);
        for (size_t i = 0; i < n; ++i) {
            const double g = d_map.data[i] / a.channels;
            const double mua = s.mu_a[i], mub = s.mu_b[i];
            const double va = s.e_aa[i] - mua * mua;
            const double vb = s.e_bb[i] - mub * mub;
            const double cov = s.e_ab[i] - mua * mub;
            const double n1 = 2 * mua * mub + kC1, n2 = 2 * cov + kC2;
            const double d1 = mua * mua + mub * mub + kC1, d2 = va + vb + kC2;
            const double inv = 1.0 / (d1 * d2);
            const double ssim = n1 * n2 * inv;
            // chain through mu_b, E[b^2], E[ab]; cov and vb depend on mu_b too
            const double d_mub = 2 * mua * n2 * inv + n1 * (-2 * mua) * inv -
                                 ssim * (2 * mub / d1) - ssim * (-2 * mub / d2);
            const double d_ebb = -ssim / d2;
            const double d_eab = 2 * n1 * inv;
            g_mub[i] = g * d_mub;
            g_ebb[i] = g * d_ebb;
            g_eab[i] = g * d_eab;
        }
        const auto s_mub = box3_scatter(g_mub, h, w);
        const auto s_ebb = box3_scatter(g_ebb, h, w);
        const auto s_eab = box3_scatter(g_eab, h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                d_b->at(y, x, c) += s_mub[i] + 2 * pb[i] * s_ebb[i] + pa[i] * s_eab[i];
            }
    }
}

ImageGrid photometric_loss(const ImageGrid &target, const ImageGrid &synth,
                           const LossWeights &weights) {
    if (!target.same_shape(synth)) throw std::invalid_argument("photometric_loss: shape mismatch");
    const ImageGrid ssim = ssim_map(target, synth);
    ImageGrid out(target.height, target.width, 1);
    for (int y = 0; y < target.height; ++y)
        for (int x = 0; x < target.width; ++x) {
            double l1 = 0;
            for (int c = 0; c < target.channels; ++c)
                l1 += std::abs(target.at(y, x, c) - synth.at(y, x, c));
            l1 /= target.channels;
            out.at(y, x) = weights.alpha * 0.5 * (1.0 - ssim.at(y, x)) + (1 - weights.alpha) * l1;
        }
    return out;
}

void photometric_loss_backward(const ImageGrid &target, const ImageGrid &synth,
                               const LossWeights &weights, const ImageGrid &d_map,
                               ImageGrid *d_synth) {
    ImageGrid d_ssim(target.height, target.width, 1);
    for (size_t i = 0; i < d_ssim.data.size(); ++i)
        d_ssim.data[i] = -0.5 * weights.alpha * d_map.data[i];
    ssim_map_backward(target, synth, d_ssim, d_synth);
    const double wl1 = (1 - weights.alpha) / target.channels;
    for (int y = 0; y < target.height; ++y)
        for (int x = 0; x < target.width; ++x) {
            const double g = d_map.at(y, x) * wl1;
            for (int c = 0; c < target.channels; ++c) {
                const double diff = target.at(y, x, c) - synth.at(y, x, c);
                if (diff > 0)
                    d_synth->at(y, x, c) -= g;
                else if (diff < 0)
                    d_synth->at(y, x, c) += g;
            }
        }
}

MinContextResult min_over_context(const std::vector<ImageGrid> &losses,
                                  const std::vector<PixelMask> &masks) {
    if (losses.empty()) throw std::invalid_argument("min_over_context: empty context list");
    const size_t n = losses[0].data.size();
    MinContextResult out;
    out.loss = ImageGrid(losses[0].height, losses[0].width, 1);
    out.valid.assign(n, 0);
    out.argmin.assign(n, -1);
    for (size_t i = 0; i < n; ++i) {
        double best = 0;
        int best_c = -1;
        for (size_t c = 0; c < losses.size(); ++c) {
            if (!masks[c].empty() && !masks[c][i]) continue;
            const double v = losses[c].data[i];
            if (best_c < 0 || v < best) {
                best = v;
                best_c = static_cast<int>(c);
            }
        }
        if (best_c >= 0) {
            out.loss.data[i] = best;
            out.valid[i] = 1;
            out.argmin[i] = best_c;
        }
    }
    return out;
}

PixelMask auto_mask(const ImageGrid &warped_loss, const ImageGrid &unwarped_loss) {
    if (!warped_loss.same_shape(unwarped_loss))
        throw std::invalid_argument("auto_mask: shape mismatch");
    PixelMask keep(warped_loss.data.size(), 0);
    for (size_t i = 0; i < keep.size(); ++i)
        keep[i] = warped_loss.data[i] < unwarped_loss.data[i] ? 1 : 0;
    return keep;
}

namespace {

struct SmoothnessWork {
    std::vector<double> inv, dbar; // inverse depth and its mean-normalized form
    double mu = 0;
    std::vector<double> egx, egy; // exp(-|image gradient|)
};

SmoothnessWork smoothness_setup(const ImageGrid &depth, const ImageGrid &image) {
    const int h = depth.height, w = depth.width;
    const size_t n = static_cast<size_t>(h) * w;
    SmoothnessWork wk;
    wk.inv.resize(n);
    for (size_t i = 0; i < n; ++i) wk.inv[i] = 1.0 / depth.data[i];
    double s = 0;
    for (double v : wk.inv) s += v;
    wk.mu = s / static_cast<double>(n);
    wk.dbar.resize(n);
    for (size_t i = 0; i < n; ++i) wk.dbar[i] = wk.inv[i] / wk.mu;
    wk.egx.assign(n, 0.0);
    wk.egy.assign(n, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (x + 1 < w) {
                double g = 0;
                for (int c = 0; c < image.channels; ++c)
                    g += std::abs(image.at(y, x + 1, c) - image.at(y, x, c));
                wk.egx[i] = std::exp(-g / image.channels);
            }
            if (y + 1 < h) {
                double g = 0;
                for (int c = 0; c < image.channels; ++c)
                    g += std::abs(image.at(y + 1, x, c) - image.at(y, x, c));
                wk.egy[i] = std::exp(-g / image.channels);
            }
        }
    return wk;
}

} // namespace

double smoothness_loss(const ImageGrid &depth, const ImageGrid &image) {
    if (depth.height != image.height || depth.width != image.width || depth.channels != 1)
        throw std::invalid_argument("smoothness_loss: shape mismatch");
    const int h = depth.height, w = depth.width;
    const SmoothnessWork wk = smoothness_setup(depth, image);
    std::vector<double> terms;
    terms.reserve(2 * wk.inv.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (x + 1 < w) terms.push_back(std::abs(wk.dbar[i + 1] - wk.dbar[i]) * wk.egx[i]);
            if (y + 1 < h) terms.push_back(std::abs(wk.dbar[i + w] - wk.dbar[i]) * wk.egy[i]);
        }
    return pairwise_sum(terms) / (static_cast<double>(h) * w);
}

void smoothness_loss_backward(const ImageGrid &depth, const ImageGrid &image, double d_loss,
                              ImageGrid *d_depth) {
    const int h = depth.height, w = depth.width;
    const size_t n = static_cast<size_t>(h) * w;
    const SmoothnessWork wk = smoothness_setup(depth, image);
    std::vector<double> g_dbar(n, 0.0);
    const double scale = d_loss / static_cast<double>(n);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            if (x + 1 < w) {
                const double diff = wk.dbar[i + 1] - wk.dbar[i];
                const double sg = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                g_dbar[i + 1] += scale * sg * wk.egx[i];
                g_dbar[i] -= scale * sg * wk.egx[i];
            }
            if (y + 1 < h) {
                const double diff = wk.dbar[i + w] - wk.dbar[i];
                const double sg = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                g_dbar[i + w] += scale * sg * wk.egy[i];
                g_dbar[i] -= scale * sg * wk.egy[i];
            }
        }
    // dbar_j = inv_j / mu with mu = mean(inv): the mean couples all pixels.
    double dot = 0;
    for (size_t i = 0; i < n; ++i) dot += g_dbar[i] * wk.inv[i];
    const double coupling = dot / (wk.mu * wk.mu * static_cast<double>(n));
    for (size_t i = 0; i < n; ++i) {
        const double d_inv = g_dbar[i] / wk.mu - coupling;
        d_depth->data[i] += -wk.inv[i] * wk.inv[i] * d_inv;
    }
}

double masked_mean(const ImageGrid &map, const PixelMask &mask) {
    std::vector<double> vals;
    vals.reserve(map.data.size());
    for (size_t i = 0; i < map.data.size(); ++i)
        if (mask.empty() || mask[i]) vals.push_back(map.data[i]);
    if (vals.empty()) throw std::runtime_error("masked_mean: no valid pixels");
    return pairwise_sum(vals) / static_cast<double>(vals.size());
}

double total_loss(const ImageGrid &min_photo, const PixelMask &mask, const ImageGrid &depth,
                  const ImageGrid &image, const LossWeights &weights) {
    return masked_mean(min_photo, mask) + weights.lambda_d * smoothness_loss(depth, image);
}

} // namespace nrs
