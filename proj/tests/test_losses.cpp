#include <doctest.h>

#include <random>

#include "nrs/gradcheck.hpp"
#include "nrs/losses.hpp"

using namespace nrs;

namespace {

ImageGrid random_image(int h, int w, int c, uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    ImageGrid g(h, w, c);
    for (double &v : g.data) v = dist(rng);
    return g;
}

} // namespace

TEST_CASE("SSIM of an image with itself is 1 everywhere") {
    const ImageGrid a = random_image(8, 9, 3, 2);
    const ImageGrid s = ssim_map(a, a);
    CHECK(s.channels == 1);
    for (double v : s.data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("SSIM stays within [-1, 1] and is symmetric in its stabilizers") {
    const ImageGrid a = random_image(10, 10, 3, 3);
    const ImageGrid b = random_image(10, 10, 3, 4);
    const ImageGrid s = ssim_map(a, b);
    for (double v : s.data) {
        CHECK(v <= 1.0 + 1e-12);
        CHECK(v >= -1.0 - 1e-12);
    }
}

TEST_CASE("SSIM drops when structure is destroyed") {
    const ImageGrid a = random_image(12, 12, 1, 5);
    ImageGrid flat(12, 12, 1, 0.5);
    const ImageGrid s = ssim_map(a, flat);
    double mean = 0;
    for (double v : s.data) mean += v;
    mean /= s.data.size();
    CHECK(mean < 0.9);
}

TEST_CASE("ssim_map_backward matches central differences") {
    const ImageGrid a = random_image(6, 6, 2, 7);
    const ImageGrid b = random_image(6, 6, 2, 8);
    ImageGrid d_map(6, 6, 1);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (double &v : d_map.data) v = dist(rng);

    auto f = [&](std::span<const double> p) {
        ImageGrid bb = b;
        bb.data.assign(p.begin(), p.end());
        const ImageGrid s = ssim_map(a, bb);
        double acc = 0;
        for (size_t i = 0; i < s.data.size(); ++i) acc += d_map.data[i] * s.data[i];
        return acc;
    };
    auto grad = [&](std::span<const double> p) {
        ImageGrid bb = b;
        bb.data.assign(p.begin(), p.end());
        ImageGrid d_b(6, 6, 2);
        ssim_map_backward(a, bb, d_map, &d_b);
        return d_b.data;
    };
    CHECK(grad_check(f, grad, b.data) < 1e-6);
}

TEST_CASE("photometric loss is zero for identical images and positive otherwise") {
    const ImageGrid a = random_image(8, 8, 3, 11);
    const LossWeights w;
    const ImageGrid zero = photometric_loss(a, a, w);
    for (double v : zero.data) CHECK(std::abs(v) < 1e-12);
    const ImageGrid b = random_image(8, 8, 3, 12);
    const ImageGrid nz = photometric_loss(a, b, w);
    double mean = 0;
    for (double v : nz.data) mean += v;
    CHECK(mean / nz.data.size() > 0.01);
}

TEST_CASE("photometric_loss_backward matches central differences") {
    const ImageGrid a = random_image(6, 7, 3, 13);
    const ImageGrid b = random_image(6, 7, 3, 14);
    const LossWeights w;
    ImageGrid d_map(6, 7, 1);
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (double &v : d_map.data) v = dist(rng);

    auto f = [&](std::span<const double> p) {
        ImageGrid bb = b;
        bb.data.assign(p.begin(), p.end());
        const ImageGrid m = photometric_loss(a, bb, w);
        double acc = 0;
        for (size_t i = 0; i < m.data.size(); ++i) acc += d_map.data[i] * m.data[i];
        return acc;
    };
    auto grad = [&](std::span<const double> p) {
        ImageGrid bb = b;
        bb.data.assign(p.begin(), p.end());
        ImageGrid d_b(6, 7, 3);
        photometric_loss_backward(a, bb, w, d_map, &d_b);
        return d_b.data;
    };
    CHECK(grad_check(f, grad, b.data) < 1e-6);
}

TEST_CASE("min_over_context takes the pixelwise minimum over valid entries") {
    ImageGrid l0(2, 2, 1), l1(2, 2, 1);
    l0.data = {1.0, 5.0, 2.0, 0.5};
    l1.data = {3.0, 4.0, 0.1, 0.9};
    PixelMask m0{1, 1, 0, 1}, m1{1, 0, 1, 0};
    const MinContextResult r = min_over_context({l0, l1}, {m0, m1});
    CHECK(r.loss.data[0] == doctest::Approx(1.0));
    CHECK(r.argmin[0] == 0);
    CHECK(r.loss.data[1] == doctest::Approx(5.0)); // only context 0 valid
    CHECK(r.argmin[1] == 0);
    CHECK(r.loss.data[2] == doctest::Approx(0.1)); // only context 1 valid
    CHECK(r.argmin[2] == 1);
    CHECK(r.loss.data[3] == doctest::Approx(0.5));
    CHECK(r.argmin[3] == 0);
    for (uint8_t v : r.valid) CHECK(v == 1);

    // a pixel invalid everywhere
    m0[0] = m1[0] = 0;
    const MinContextResult r2 = min_over_context({l0, l1}, {m0, m1});
    CHECK_FALSE(r2.valid[0]);
    CHECK(r2.argmin[0] == -1);
}

TEST_CASE("auto_mask keeps strictly-better warped pixels only") {
    ImageGrid warped(1, 3, 1), unwarped(1, 3, 1);
    warped.data = {0.2, 0.5, 0.5};
    unwarped.data = {0.5, 0.2, 0.5};
    const PixelMask m = auto_mask(warped, unwarped);
    CHECK(m[0] == 1);  // better
    CHECK(m[1] == 0);  // worse
    CHECK(m[2] == 0);  // tie is rejected (strict inequality)
}

TEST_CASE("smoothness loss is zero for constant depth and scale invariant") {
    const ImageGrid img = random_image(6, 6, 3, 17);
    const ImageGrid flat(6, 6, 1, 3.7);
    CHECK(std::abs(smoothness_loss(flat, img)) < 1e-12);

    ImageGrid depth = random_image(6, 6, 1, 18);
    for (double &v : depth.data) v = 1.0 + 4.0 * v;
    ImageGrid scaled = depth;
    for (double &v : scaled.data) v *= 13.0;
    // mean normalization of inverse depth makes the loss scale invariant
    CHECK(smoothness_loss(depth, img) ==
          doctest::Approx(smoothness_loss(scaled, img)).epsilon(1e-10));
}

TEST_CASE("smoothness_loss_backward matches central differences") {
    const ImageGrid img = random_image(5, 6, 3, 19);
    ImageGrid depth = random_image(5, 6, 1, 20);
    for (double &v : depth.data) v = 1.0 + 4.0 * v;

    auto f = [&](std::span<const double> p) {
        ImageGrid d = depth;
        d.data.assign(p.begin(), p.end());
        return smoothness_loss(d, img);
    };
    auto grad = [&](std::span<const double> p) {
        ImageGrid d = depth;
        d.data.assign(p.begin(), p.end());
        ImageGrid g(5, 6, 1);
        smoothness_loss_backward(d, img, 1.0, &g);
        return g.data;
    };
    CHECK(grad_check(f, grad, depth.data) < 1e-6);
}

TEST_CASE("masked_mean averages live pixels only and rejects an empty mask") {
    ImageGrid m(2, 2, 1);
    m.data = {1.0, 100.0, 3.0, 100.0};
    const PixelMask mask{1, 0, 1, 0};
    CHECK(masked_mean(m, mask) == doctest::Approx(2.0));
    CHECK_THROWS(masked_mean(m, PixelMask{0, 0, 0, 0}));
}

TEST_CASE("total_loss composes the masked photometric mean and weighted smoothness") {
    const ImageGrid img = random_image(4, 4, 3, 23);
    ImageGrid depth = random_image(4, 4, 1, 24);
    for (double &v : depth.data) v = 1.0 + v;
    const ImageGrid photo = random_image(4, 4, 1, 25);
    PixelMask mask(16, 1);
    mask[3] = 0;
    LossWeights w;
    const double expect = masked_mean(photo, mask) + w.lambda_d * smoothness_loss(depth, img);
    CHECK(total_loss(photo, mask, depth, img, w) == doctest::Approx(expect));
}
