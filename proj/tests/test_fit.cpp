#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "nrs/fit.hpp"
#include "nrs/gradcheck.hpp"
#include "nrs/io.hpp"
#include "nrs/synthscene.hpp"

using namespace nrs;

TEST_CASE("depth decoding maps any parameter into [d_min, d_max] and inverts encode") {
    const double d_min = 0.1, d_max = 100.0;
    ImageGrid p(1, 5, 1);
    p.data = {-50.0, -2.0, 0.0, 2.0, 50.0};
    const ImageGrid d = decode_depth(p, d_min, d_max);
    for (double v : d.data) {
        CHECK(v >= d_min);
        CHECK(v <= d_max);
    }
    // larger parameter -> larger inverse depth -> smaller depth
    for (int i = 1; i < 5; ++i) CHECK(d.data[i] < d.data[i - 1]);
    for (double depth : {0.2, 1.0, 5.0, 60.0})
        CHECK(1.0 / (1.0 / 100.0 +
                     (1.0 / 0.1 - 1.0 / 100.0) /
                         (1.0 + std::exp(-encode_depth(depth, d_min, d_max)))) ==
              doctest::Approx(depth).epsilon(1e-9));
}

TEST_CASE("decode_depth_backward matches central differences") {
    ImageGrid p(2, 3, 1);
    p.data = {-1.0, 0.3, 2.0, -0.4, 1.1, 0.0};
    ImageGrid d_depth(2, 3, 1);
    for (size_t i = 0; i < 6; ++i) d_depth.data[i] = 0.3 * double(i) - 0.7;
    auto f = [&](std::span<const double> z) {
        ImageGrid zz = p;
        zz.data.assign(z.begin(), z.end());
        const ImageGrid d = decode_depth(zz, 0.1, 100.0);
        double s = 0;
        for (size_t i = 0; i < 6; ++i) s += d_depth.data[i] * d.data[i];
        return s;
    };
    auto grad = [&](std::span<const double> z) {
        ImageGrid zz = p;
        zz.data.assign(z.begin(), z.end());
        ImageGrid g(2, 3, 1);
        decode_depth_backward(zz, d_depth, 0.1, 100.0, &g);
        return g.data;
    };
    CHECK(grad_check(f, grad, p.data) < 1e-7);
}

TEST_CASE("the residual weight ramps linearly and saturates at 1") {
    CHECK(lambda_r_schedule(0, 10) == doctest::Approx(0.0));
    CHECK(lambda_r_schedule(5, 10) == doctest::Approx(0.5));
    CHECK(lambda_r_schedule(10, 10) == doctest::Approx(1.0));
    CHECK(lambda_r_schedule(19, 10) == doctest::Approx(1.0));
    CHECK_THROWS(lambda_r_schedule(1, 0));
}

TEST_CASE("fit config files roundtrip and unknown keys are rejected") {
    const auto dir = std::filesystem::temp_directory_path() / "nrs_fitcfg";
    std::filesystem::create_directories(dir);
    FitConfig c;
    c.epochs = 7;
    c.lr = 3.5e-4;
    c.patch = {15, 17};
    c.per_frame_surface = true;
    c.half_res_search = false;
    write_fit_config((dir / "c.txt").string(), c);
    const FitConfig back = parse_fit_config((dir / "c.txt").string());
    CHECK(back.epochs == 7);
    CHECK(back.lr == doctest::Approx(3.5e-4).epsilon(1e-15));
    CHECK(back.patch.h == 15);
    CHECK(back.patch.w == 17);
    CHECK(back.per_frame_surface);
    CHECK_FALSE(back.half_res_search);

    std::ofstream bad((dir / "bad.txt").string());
    bad << "epochs=3\nlearning_rate=0.1\n";
    bad.close();
    CHECK_THROWS_WITH_AS(parse_fit_config((dir / "bad.txt").string()),
                         doctest::Contains("learning_rate"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("a short depth-only fit reduces the loss on a rendered sequence") {
    const int hw = 24;
    const OracleCamera cam = OracleCamera::pinhole(hw, hw, Intrinsics::default_for(hw, hw));
    const Scene scene = make_plane_scene();
    std::vector<ImageGrid> frames;
    std::vector<PoseParams> chain;
    std::vector<Pose> traj;
    Pose cur;
    for (int i = 0; i < 3; ++i) {
        traj.push_back(cur);
        frames.push_back(render(scene, cam, cur).image);
        Pose step;
        step.translation = {0.08, 0.0, 0.05};
        cur = pose_compose(cur, step);
    }
    // ground-truth chain params parameterize frame i -> i+1 in camera coords:
    // X = T_{i+1}^{-1} T_i ... the fitter accumulates T_{i+1} = T_i * X^{-1}
    for (int i = 0; i < 2; ++i) {
        const Pose x = pose_compose(pose_inverse(traj[size_t(i) + 1]), traj[size_t(i)]);
        PoseParams p;
        p.translation = x.translation; // pure translation steps here
        chain.push_back(p);
    }

    FitConfig cfg;
    cfg.epochs = 4;
    cfg.steps_per_epoch = 10;
    cfg.patch = {9, 9};
    cfg.tau_start = 1e-3;
    cfg.tau_end = 2e-4;
    cfg.half_res_search = false;
    cfg.fit_pose = false;
    cfg.fit_residual = false;
    cfg.lr = 0.02;
    cfg.init_depth = 5.0;
    FitInputs in;
    in.frames = frames;
    in.init_pose = chain;
    const FitResult r = fit_scene(in, cfg);
    REQUIRE(r.loss_curve.size() >= 2);
    CHECK(r.loss_curve.back() < r.loss_curve.front());
    CHECK_FALSE(r.diagnostics.static_scene);
    CHECK_FALSE(r.diagnostics.diverged);
    CHECK(int(r.diagnostics.step_loss.size()) == cfg.epochs * cfg.steps_per_epoch);
}

TEST_CASE("a static sequence is detected instead of fitted") {
    const int hw = 16;
    const OracleCamera cam = OracleCamera::pinhole(hw, hw, Intrinsics::default_for(hw, hw));
    const ImageGrid frame = render(make_plane_scene(), cam, Pose{}).image;
    FitConfig cfg;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 2;
    cfg.patch = {7, 7};
    cfg.half_res_search = false;
    cfg.fit_pose = false;
    cfg.fit_residual = false;
    // identical frames: the warped view can never beat the unwarped one
    const FitResult r = fit_scene({frame, frame, frame}, cfg);
    CHECK(r.diagnostics.static_scene);
}

TEST_CASE("exported state reloads bit-identically") {
    const int hw = 16;
    const OracleCamera cam = OracleCamera::pinhole(hw, hw, Intrinsics::default_for(hw, hw));
    const Scene scene = make_plane_scene();
    std::vector<ImageGrid> frames;
    for (int i = 0; i < 3; ++i) {
        Pose p;
        p.translation = {0.1 * i, 0, 0.06 * i};
        frames.push_back(render(scene, cam, p).image);
    }
    FitConfig cfg;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 3;
    cfg.patch = {7, 7};
    cfg.tau_start = 1e-3;
    cfg.tau_end = 1e-3;
    cfg.half_res_search = false;
    cfg.lr = 0.01;
    cfg.init_depth = 4.0;
    const FitResult r = fit_scene(frames, cfg);

    const auto dir = std::filesystem::temp_directory_path() / "nrs_state";
    export_state(r, dir.string());
    const FitState back = import_state(dir.string());
    CHECK(back.height == r.state.height);
    CHECK(back.step == r.state.step);
    REQUIRE(back.inv_depth_params.size() == r.state.inv_depth_params.size());
    for (size_t f = 0; f < back.inv_depth_params.size(); ++f)
        CHECK(back.inv_depth_params[f].data == r.state.inv_depth_params[f].data);
    REQUIRE(back.residuals.size() == r.state.residuals.size());
    for (size_t i = 0; i < back.residuals.size(); ++i) {
        CHECK(back.residuals[i].weight == r.state.residuals[i].weight);
        CHECK(back.residuals[i].residuals.data == r.state.residuals[i].residuals.data);
    }
    REQUIRE(back.pose_params.size() == r.state.pose_params.size());
    for (size_t i = 0; i < back.pose_params.size(); ++i) {
        CHECK((back.pose_params[i].translation - r.state.pose_params[i].translation).norm() == 0);
        CHECK((back.pose_params[i].euler - r.state.pose_params[i].euler).norm() == 0);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("accumulate_trajectory starts at identity and chains inverses") {
    std::vector<PoseParams> chain(2);
    chain[0].translation = {-0.1, 0, 0}; // frame0 -> frame1 moves points by -0.1x
    chain[1].translation = {-0.1, 0, 0};
    const auto traj = accumulate_trajectory(chain);
    REQUIRE(traj.size() == 3);
    CHECK(traj[0].translation.norm() == 0.0);
    // camera-to-world positions advance by +0.1x per frame
    CHECK(traj[1].translation.x == doctest::Approx(0.1));
    CHECK(traj[2].translation.x == doctest::Approx(0.2));
}
