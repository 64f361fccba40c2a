#include <doctest.h>

#include <numeric>
#include <random>

#include "nrs/gradcheck.hpp"
#include "nrs/grid.hpp"

using namespace nrs;

namespace {

ImageGrid random_grid(int h, int w, int c, uint32_t seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    ImageGrid g(h, w, c);
    for (double &v : g.data) v = dist(rng);
    return g;
}

} // namespace

TEST_CASE("bilinear sampling at integer coordinates returns the stored value") {
    const ImageGrid g = random_grid(5, 7, 3, 11);
    std::vector<Vec2> coords;
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) coords.push_back({double(x), double(y)});
    const SampleResult r = bilinear_sample(g, coords);
    for (size_t q = 0; q < coords.size(); ++q) {
        CHECK(r.valid[q]);
        const int y = int(coords[q].y), x = int(coords[q].x);
        for (int c = 0; c < 3; ++c) CHECK(r.values[q * 3 + c] == doctest::Approx(g.at(y, x, c)));
    }
}

TEST_CASE("bilinear sampling midpoints are the average of the corners") {
    ImageGrid g(2, 2, 1);
    g.at(0, 0) = 1.0;
    g.at(0, 1) = 3.0;
    g.at(1, 0) = 5.0;
    g.at(1, 1) = 7.0;
    const std::vector<Vec2> coords{{0.5, 0.5}};
    const SampleResult r = bilinear_sample(g, coords);
    CHECK(r.values[0] == doctest::Approx(4.0));
}

TEST_CASE("bilinear sampling outside the raster is zero and invalid") {
    const ImageGrid g = random_grid(4, 4, 1, 3);
    const std::vector<Vec2> coords{{-0.01, 1.0}, {1.0, 3.01}, {4.0, 1.0}, {1.5, 1.5}};
    const SampleResult r = bilinear_sample(g, coords);
    CHECK_FALSE(r.valid[0]);
    CHECK_FALSE(r.valid[1]);
    CHECK_FALSE(r.valid[2]);
    CHECK(r.valid[3]);
    CHECK(r.values[0] == 0.0);
    CHECK(r.values[1] == 0.0);
}

TEST_CASE("bilinear backward matches central differences in the grid values") {
    const ImageGrid g = random_grid(4, 5, 2, 17);
    const std::vector<Vec2> coords{{1.3, 2.7}, {0.1, 0.9}, {3.99, 2.01}};
    // loss = sum of all sampled values
    auto f = [&](std::span<const double> p) {
        ImageGrid gg = g;
        gg.data.assign(p.begin(), p.end());
        const SampleResult r = bilinear_sample(gg, coords);
        return std::accumulate(r.values.begin(), r.values.end(), 0.0);
    };
    auto grad = [&](std::span<const double> p) {
        ImageGrid gg = g;
        gg.data.assign(p.begin(), p.end());
        ImageGrid d_grid(4, 5, 2);
        std::vector<double> ones(coords.size() * 2, 1.0);
        bilinear_sample_backward(gg, coords, ones, &d_grid, nullptr);
        return d_grid.data;
    };
    CHECK(grad_check(f, grad, g.data) < 1e-7);
}

TEST_CASE("bilinear backward matches central differences in the coordinates") {
    const ImageGrid g = random_grid(6, 6, 1, 23);
    const std::vector<Vec2> base{{1.3, 2.7}, {4.2, 0.6}};
    auto unpack = [&](std::span<const double> p) {
        std::vector<Vec2> c(base.size());
        for (size_t i = 0; i < c.size(); ++i) c[i] = {p[2 * i], p[2 * i + 1]};
        return c;
    };
    auto f = [&](std::span<const double> p) {
        const SampleResult r = bilinear_sample(g, unpack(p));
        double s = 0;
        for (size_t i = 0; i < r.values.size(); ++i) s += (i + 1.0) * r.values[i];
        return s;
    };
    auto grad = [&](std::span<const double> p) {
        const auto coords = unpack(p);
        std::vector<double> dv(coords.size());
        for (size_t i = 0; i < dv.size(); ++i) dv[i] = i + 1.0;
        std::vector<Vec2> d_coords(coords.size());
        bilinear_sample_backward(g, coords, dv, nullptr, &d_coords);
        std::vector<double> out;
        for (const Vec2 &d : d_coords) {
            out.push_back(d.x);
            out.push_back(d.y);
        }
        return out;
    };
    std::vector<double> p;
    for (const Vec2 &c : base) {
        p.push_back(c.x);
        p.push_back(c.y);
    }
    CHECK(grad_check(f, grad, p) < 1e-7);
}

TEST_CASE("downsample_half computes 2x2 block means with truncated edges") {
    ImageGrid g(3, 4, 1);
    for (int i = 0; i < 12; ++i) g.data[i] = i;
    const ImageGrid d = downsample_half(g);
    CHECK(d.height == 2);
    CHECK(d.width == 2);
    CHECK(d.at(0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
    CHECK(d.at(0, 1) == doctest::Approx((2 + 3 + 6 + 7) / 4.0));
    CHECK(d.at(1, 0) == doctest::Approx((8 + 9) / 2.0)); // truncated bottom row
    CHECK(d.at(1, 1) == doctest::Approx((10 + 11) / 2.0));
    CHECK_THROWS(downsample_half(ImageGrid(1, 8, 1)));
}

TEST_CASE("downsample_half backward is the transpose of the forward map") {
    const ImageGrid g = random_grid(5, 6, 2, 31);
    auto f = [&](std::span<const double> p) {
        ImageGrid gg = g;
        gg.data.assign(p.begin(), p.end());
        const ImageGrid d = downsample_half(gg);
        double s = 0;
        for (size_t i = 0; i < d.data.size(); ++i) s += (i % 7 + 1.0) * d.data[i];
        return s;
    };
    auto grad = [&](std::span<const double> p) {
        ImageGrid gg = g;
        gg.data.assign(p.begin(), p.end());
        const ImageGrid d = downsample_half(gg);
        ImageGrid d_out(d.height, d.width, d.channels);
        for (size_t i = 0; i < d_out.data.size(); ++i) d_out.data[i] = i % 7 + 1.0;
        ImageGrid d_grid(5, 6, 2);
        downsample_half_backward(gg, d_out, &d_grid);
        return d_grid.data;
    };
    CHECK(grad_check(f, grad, g.data) < 1e-8);
}

TEST_CASE("upsample_bilinear keeps corners and refuses to shrink") {
    const ImageGrid g = random_grid(3, 3, 1, 41);
    const ImageGrid u = upsample_bilinear(g, 5, 7);
    CHECK(u.at(0, 0) == doctest::Approx(g.at(0, 0)));
    CHECK(u.at(0, 6) == doctest::Approx(g.at(0, 2)));
    CHECK(u.at(4, 0) == doctest::Approx(g.at(2, 0)));
    CHECK(u.at(4, 6) == doctest::Approx(g.at(2, 2)));
    CHECK_THROWS(upsample_bilinear(g, 2, 3));
}

TEST_CASE("upsample backward matches central differences") {
    const ImageGrid g = random_grid(3, 4, 1, 43);
    auto f = [&](std::span<const double> p) {
        ImageGrid gg = g;
        gg.data.assign(p.begin(), p.end());
        const ImageGrid u = upsample_bilinear(gg, 6, 7);
        double s = 0;
        for (size_t i = 0; i < u.data.size(); ++i) s += (i % 5 + 1.0) * u.data[i];
        return s;
    };
    auto grad = [&](std::span<const double> p) {
        ImageGrid gg = g;
        gg.data.assign(p.begin(), p.end());
        ImageGrid d_out(6, 7, 1);
        for (size_t i = 0; i < d_out.data.size(); ++i) d_out.data[i] = i % 5 + 1.0;
        ImageGrid d_grid(3, 4, 1);
        upsample_bilinear_backward(gg, d_out, &d_grid);
        return d_grid.data;
    };
    CHECK(grad_check(f, grad, g.data) < 1e-8);
}

TEST_CASE("pairwise_sum matches exact summation of a hostile sequence") {
    // large + many small values, where naive order matters
    std::vector<double> v{1e16};
    for (int i = 0; i < 1000; ++i) v.push_back(1.0);
    // exact value known analytically
    const double exact = 1e16 + 1000.0;
    CHECK(std::abs(pairwise_sum(v) - exact) / exact < 1e-10);

    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<double> r(4097);
    for (double &x : r) x = dist(rng);
    long double acc = 0;
    for (double x : r) acc += (long double)x;
    CHECK(pairwise_sum(r) == doctest::Approx(double(acc)).epsilon(1e-12));
    CHECK(pairwise_sum(std::span<const double>{}) == 0.0);
}
