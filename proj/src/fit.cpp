#include "nrs/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "nrs/io.hpp"

namespace nrs {

ImageGrid decode_depth(const ImageGrid &params, double d_min, double d_max) {
    const double a = 1.0 / d_max, b = 1.0 / d_min - 1.0 / d_max;
    ImageGrid out(params.height, params.width, 1);
    for (size_t i = 0; i < params.data.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-params.data[i]));
        out.data[i] = 1.0 / (a + b * s);
    }
    return out;
}

void decode_depth_backward(const ImageGrid &params, const ImageGrid &d_depth, double d_min,
                           double d_max, ImageGrid *d_params) {
    const double a = 1.0 / d_max, b = 1.0 / d_min - 1.0 / d_max;
    for (size_t i = 0; i < params.data.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-params.data[i]));
        const double depth = 1.0 / (a + b * s);
        d_params->data[i] += d_depth.data[i] * (-depth * depth * b * s * (1 - s));
    }
}

double encode_depth(double depth, double d_min, double d_max) {
    const double a = 1.0 / d_max, b = 1.0 / d_min - 1.0 / d_max;
    const double s = std::clamp((1.0 / depth - a) / b, 1e-9, 1.0 - 1e-9);
    return std::log(s / (1.0 - s));
}

double lambda_r_schedule(int epoch, int ramp_epochs) {
    if (ramp_epochs < 1) throw std::invalid_argument("lambda_r_schedule: ramp must be >= 1");
    return std::min(1.0, static_cast<double>(epoch) / ramp_epochs);
}

namespace {

// Standard Adam with bias correction; beta1 = 0.9, beta2 = 0.999.
struct Adam {
    std::vector<double> m, v;
    static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
    void update(std::vector<double> &params, const std::vector<double> &grads, double lr, int t) {
        const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1 - kBeta1) * grads[i];
            v[i] = kBeta2 * v[i] + (1 - kBeta2) * grads[i] * grads[i];
            params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
        }
    }
};

struct Optimizer {
    std::vector<Adam> depth;   // per frame
    std::vector<Adam> residual;
    Adam pose;                 // flattened 6 * (n-1)
    int t = 0;                 // Adam timestep
};

std::vector<double> flatten_pose(const std::vector<PoseParams> &p) {
    std::vector<double> out;
    out.reserve(p.size() * 6);
    for (const PoseParams &q : p) {
        out.push_back(q.translation.x);
        out.push_back(q.translation.y);
        out.push_back(q.translation.z);
        out.push_back(q.euler.x);
        out.push_back(q.euler.y);
        out.push_back(q.euler.z);
    }
    return out;
}

void unflatten_pose(const std::vector<double> &flat, std::vector<PoseParams> *p) {
    for (size_t i = 0; i < p->size(); ++i) {
        (*p)[i].translation = {flat[6 * i + 0], flat[6 * i + 1], flat[6 * i + 2]};
        (*p)[i].euler = {flat[6 * i + 3], flat[6 * i + 4], flat[6 * i + 5]};
    }
}

} // namespace

FitResult fit_scene(const std::vector<ImageGrid> &frames, const FitConfig &config) {
    FitInputs in;
    in.frames = frames;
    return fit_scene(in, config);
}

FitResult fit_scene(const FitInputs &inputs, const FitConfig &config) {
    const auto &frames = inputs.frames;
    if (frames.size() < 3) throw std::invalid_argument("fit_scene: need at least 3 frames");
    const int h = frames[0].height, w = frames[0].width;
    for (const ImageGrid &f : frames)
        if (f.height != h || f.width != w || f.channels != frames[0].channels)
            throw std::invalid_argument("fit_scene: inconsistent frame dimensions");
    const int n = static_cast<int>(frames.size());

    FitResult result;
    result.config = config;
    result.template_surface =
        inputs.template_surface ? *inputs.template_surface
                                : pinhole_template(h, w, Intrinsics::default_for(h, w));

    FitState &state = result.state;
    state.height = h;
    state.width = w;
    const double init_depth =
        config.init_depth > 0 ? config.init_depth : std::sqrt(config.d_min * config.d_max);
    const double z0 = encode_depth(init_depth, config.d_min, config.d_max);
    state.inv_depth_params.assign(static_cast<size_t>(n), ImageGrid(h, w, 1, z0));
    const int n_res = config.per_frame_surface ? n : 1;
    state.residuals.assign(static_cast<size_t>(n_res), ResidualSurface{ImageGrid(h, w, 3), 0.0});
    state.pose_params.assign(static_cast<size_t>(n - 1), PoseParams{});
    if (inputs.init_pose) {
        if (inputs.init_pose->size() != static_cast<size_t>(n - 1))
            throw std::invalid_argument("fit_scene: init_pose size mismatch");
        state.pose_params = *inputs.init_pose;
    }
    if (inputs.init_state) {
        const FitState &is = *inputs.init_state;
        if (is.height != h || is.width != w ||
            is.inv_depth_params.size() != static_cast<size_t>(n) ||
            is.residuals.size() != static_cast<size_t>(n_res) ||
            is.pose_params.size() != static_cast<size_t>(n - 1))
            throw std::invalid_argument("fit_scene: init_state shape mismatch");
        state = is;
        state.step = 0; // schedules restart; only the parameters carry over
    }

    Optimizer opt;
    opt.depth.resize(static_cast<size_t>(n));
    for (auto &a : opt.depth) a.init(static_cast<size_t>(h) * w);
    opt.residual.resize(static_cast<size_t>(n_res));
    for (auto &a : opt.residual) a.init(static_cast<size_t>(h) * w * 3);
    opt.pose.init(static_cast<size_t>(n - 1) * 6);

    const int total_steps = config.epochs * config.steps_per_epoch;
    double lr = config.lr;
    const double lr_floor = config.lr * config.lr_min_factor;

    ObjectiveOptions obj;
    obj.patch = config.patch;
    obj.half_res = config.half_res_search;
    obj.weights = config.weights;

    struct Snapshot {
        FitState state;
        Optimizer opt;
    };
    Snapshot snap{state, opt};
    bool have_snapshot = false;
    // The guard only arms once a step has been healthy: early in a fit (pose
    // near identity) the strict auto-mask legitimately keeps few pixels.
    bool guard_armed = false;

    // A warm start resumes from an already-ramped residual weight: the ramp
    // never takes lambda_r back down.
    const double lambda_floor = inputs.init_state ? state.residuals[0].weight : 0.0;

    int global_step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lam =
            std::max(lambda_floor, lambda_r_schedule(epoch, config.lambda_r_ramp_epochs));
        double epoch_loss = 0;
        int epoch_steps = 0;
        for (int s = 0; s < config.steps_per_epoch; ++s) {
            obj.tau = anneal_tau(global_step, std::max(1, total_steps - 1), config.tau_start,
                                 config.tau_end);

            // compose surfaces at the current residual / lambda_r
            std::vector<RaySurface> surfaces;
            for (int f = 0; f < n; ++f) {
                ResidualSurface &res = state.residuals[config.per_frame_surface ? f : 0];
                res.weight = lam;
                if (!config.per_frame_surface && f > 0) {
                    surfaces.push_back(surfaces[0]);
                    continue;
                }
                surfaces.push_back(compose_surface(result.template_surface, res));
            }

            std::vector<ImageGrid> depths;
            for (int f = 0; f < n; ++f)
                depths.push_back(decode_depth(state.inv_depth_params[f], config.d_min, config.d_max));

            double loss = 0;
            double min_valid = 1.0;
            int degenerate_targets = 0;
            std::vector<ImageGrid> d_z(static_cast<size_t>(n));
            std::vector<ImageGrid> d_rays(static_cast<size_t>(n));
            for (int f = 0; f < n; ++f) {
                d_z[f] = ImageGrid(h, w, 1);
                d_rays[f] = ImageGrid(h, w, 3);
            }
            std::vector<double> d_pose(static_cast<size_t>(n - 1) * 6, 0.0);

            for (int t = 0; t < n; ++t) {
                std::vector<ContextObs> ctx;
                std::vector<int> pose_idx;
                if (t > 0) {
                    ctx.push_back({&frames[t - 1], &surfaces[t - 1], state.pose_params[t - 1], true});
                    pose_idx.push_back(t - 1);
                }
                if (t + 1 < n) {
                    ctx.push_back({&frames[t + 1], &surfaces[t + 1], state.pose_params[t], false});
                    pose_idx.push_back(t);
                }
                const TargetObjective res =
                    evaluate_target(frames[t], depths[t], surfaces[t], ctx, obj, true);
                loss += res.loss;
                min_valid = std::min(min_valid, res.valid_fraction);
                if (res.degenerate) {
                    ++degenerate_targets;
                    continue;
                }
                decode_depth_backward(state.inv_depth_params[t], res.d_depth, config.d_min,
                                      config.d_max, &d_z[t]);
                for (size_t i = 0; i < res.d_rays_t.data.size(); ++i)
                    d_rays[t].data[i] += res.d_rays_t.data[i];
                for (size_t c = 0; c < ctx.size(); ++c) {
                    const int cf = ctx[c].inverted ? t - 1 : t + 1;
                    for (size_t i = 0; i < res.contexts[c].d_rays.data.size(); ++i)
                        d_rays[cf].data[i] += res.contexts[c].d_rays.data[i];
                    const int pi = pose_idx[c];
                    d_pose[6 * pi + 0] += res.contexts[c].d_translation.x;
                    d_pose[6 * pi + 1] += res.contexts[c].d_translation.y;
                    d_pose[6 * pi + 2] += res.contexts[c].d_translation.z;
                    d_pose[6 * pi + 3] += res.contexts[c].d_euler.x;
                    d_pose[6 * pi + 4] += res.contexts[c].d_euler.y;
                    d_pose[6 * pi + 5] += res.contexts[c].d_euler.z;
                }
            }

            if (degenerate_targets == n && global_step == 0) {
                result.diagnostics.static_scene = true;
                result.loss_curve.push_back(loss);
                return result;
            }

            if (min_valid >= 2 * config.min_valid_fraction) guard_armed = true;
            if (min_valid < config.min_valid_fraction && guard_armed && have_snapshot) {
                // reject the previous update and retry it with a smaller step
                state = snap.state;
                opt = snap.opt;
                result.diagnostics.rejected_steps.push_back(global_step);
                lr *= 0.5;
                if (lr < lr_floor) {
                    result.diagnostics.diverged = true;
                    return result;
                }
                continue;
            }
            if (!std::isfinite(loss)) throw std::runtime_error("fit_scene: non-finite loss");

            snap.state = state;
            snap.opt = opt;
            have_snapshot = true;

            // residual gradients through the composition
            std::vector<std::vector<double>> d_res(static_cast<size_t>(n_res));
            for (int r = 0; r < n_res; ++r) {
                ImageGrid acc(h, w, 3);
                if (config.per_frame_surface) {
                    compose_surface_backward(result.template_surface, state.residuals[r], d_rays[r],
                                             &acc);
                } else {
                    ImageGrid sum(h, w, 3);
                    for (int f = 0; f < n; ++f)
                        for (size_t i = 0; i < sum.data.size(); ++i)
                            sum.data[i] += d_rays[f].data[i];
                    compose_surface_backward(result.template_surface, state.residuals[0], sum, &acc);
                }
                d_res[r] = std::move(acc.data);
            }

            ++opt.t;
            for (int f = 0; f < n; ++f)
                opt.depth[f].update(state.inv_depth_params[f].data, d_z[f].data, lr, opt.t);
            if (config.fit_residual) {
                // the divergence guard's lr halving applies proportionally
                const double res_lr =
                    (config.residual_lr < 0 ? lr : config.residual_lr * (lr / config.lr));
                for (int r = 0; r < n_res; ++r)
                    opt.residual[r].update(state.residuals[r].residuals.data, d_res[r], res_lr,
                                           opt.t);
            }
            if (config.fit_pose) {
                std::vector<double> flat = flatten_pose(state.pose_params);
                opt.pose.update(flat, d_pose, lr, opt.t);
                unflatten_pose(flat, &state.pose_params);
            }

            result.diagnostics.step_loss.push_back(loss);
            result.diagnostics.valid_fraction.push_back(min_valid);
            epoch_loss += loss;
            ++epoch_steps;
            ++global_step;
            ++state.step;
        }
        if (epoch_steps > 0) result.loss_curve.push_back(epoch_loss / epoch_steps);
    }
    return result;
}

std::vector<Pose> accumulate_trajectory(const std::vector<PoseParams> &chain) {
    std::vector<Pose> out{Pose{}};
    for (const PoseParams &p : chain)
        out.push_back(pose_compose(out.back(), pose_inverse(euler_to_pose(p))));
    return out;
}

std::vector<ImageGrid> decode_all_depths(const FitState &state, const FitConfig &config) {
    std::vector<ImageGrid> out;
    for (const ImageGrid &z : state.inv_depth_params)
        out.push_back(decode_depth(z, config.d_min, config.d_max));
    return out;
}

RaySurface composed_surface(const FitResult &result, int frame) {
    const int idx = result.config.per_frame_surface ? frame : 0;
    return compose_surface(result.template_surface, result.state.residuals[idx]);
}

void export_state(const FitResult &result, const std::string &dir) {
    std::filesystem::create_directories(dir);
    const FitState &state = result.state;
    char buf[64];
    const auto depths = decode_all_depths(state, result.config);
    for (size_t f = 0; f < depths.size(); ++f) {
        std::snprintf(buf, sizeof(buf), "depth_%03zu.pfm", f);
        write_pfm(dir + "/" + buf, depths[f]);
    }
    write_pfm(dir + "/surface.pfm", composed_surface(result, 0).rays);
    for (size_t r = 0; r < state.residuals.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "residual_%03zu.pfm", r);
        write_pfm(dir + "/" + buf, state.residuals[r].residuals);
    }
    write_poses(dir + "/poses.txt", accumulate_trajectory(state.pose_params));

    // exact state blob
    std::vector<double> blob;
    blob.push_back(state.height);
    blob.push_back(state.width);
    blob.push_back(static_cast<double>(state.inv_depth_params.size()));
    blob.push_back(static_cast<double>(state.residuals.size()));
    blob.push_back(state.step);
    for (const ImageGrid &z : state.inv_depth_params)
        blob.insert(blob.end(), z.data.begin(), z.data.end());
    for (const ResidualSurface &r : state.residuals) {
        blob.push_back(r.weight);
        blob.insert(blob.end(), r.residuals.data.begin(), r.residuals.data.end());
    }
    for (const double v : flatten_pose(state.pose_params)) blob.push_back(v);
    write_doubles(dir + "/state.bin", blob);
}

FitState import_state(const std::string &dir) {
    const std::vector<double> blob = read_doubles(dir + "/state.bin");
    size_t pos = 0;
    auto next = [&]() { return blob.at(pos++); };
    FitState state;
    state.height = static_cast<int>(next());
    state.width = static_cast<int>(next());
    const int n = static_cast<int>(next());
    const int n_res = static_cast<int>(next());
    state.step = static_cast<int>(next());
    const size_t n_px = static_cast<size_t>(state.height) * state.width;
    for (int f = 0; f < n; ++f) {
        ImageGrid z(state.height, state.width, 1);
        for (size_t i = 0; i < n_px; ++i) z.data[i] = next();
        state.inv_depth_params.push_back(std::move(z));
    }
    for (int r = 0; r < n_res; ++r) {
        ResidualSurface res{ImageGrid(state.height, state.width, 3), 0.0};
        res.weight = next();
        for (size_t i = 0; i < n_px * 3; ++i) res.residuals.data[i] = next();
        state.residuals.push_back(std::move(res));
    }
    const size_t n_pose = (blob.size() - pos) / 6;
    state.pose_params.resize(n_pose);
    std::vector<double> flat(blob.begin() + static_cast<long>(pos), blob.end());
    unflatten_pose(flat, &state.pose_params);
    return state;
}

namespace {

std::string bool_str(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string &v, const std::string &key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: bad boolean for '" + key + "': " + v);
}

} // namespace

FitConfig parse_fit_config(const std::string &path) {
    FitConfig c;
    for (const auto &[key, value] : read_kv_file(path)) {
        if (key == "epochs") c.epochs = std::stoi(value);
        else if (key == "steps_per_epoch") c.steps_per_epoch = std::stoi(value);
        else if (key == "lr") c.lr = std::stod(value);
        else if (key == "residual_lr") c.residual_lr = std::stod(value);
        else if (key == "patch_h") c.patch.h = std::stoi(value);
        else if (key == "patch_w") c.patch.w = std::stoi(value);
        else if (key == "tau_start") c.tau_start = std::stod(value);
        else if (key == "tau_end") c.tau_end = std::stod(value);
        else if (key == "lambda_r_ramp_epochs") c.lambda_r_ramp_epochs = std::stoi(value);
        else if (key == "alpha") c.weights.alpha = std::stod(value);
        else if (key == "lambda_d") c.weights.lambda_d = std::stod(value);
        else if (key == "per_frame_surface") c.per_frame_surface = parse_bool(value, key);
        else if (key == "seed") c.seed = std::stoull(value);
        else if (key == "d_min") c.d_min = std::stod(value);
        else if (key == "d_max") c.d_max = std::stod(value);
        else if (key == "half_res_search") c.half_res_search = parse_bool(value, key);
        else if (key == "fit_pose") c.fit_pose = parse_bool(value, key);
        else if (key == "fit_residual") c.fit_residual = parse_bool(value, key);
        else if (key == "init_depth") c.init_depth = std::stod(value);
        else if (key == "min_valid_fraction") c.min_valid_fraction = std::stod(value);
        else if (key == "lr_min_factor") c.lr_min_factor = std::stod(value);
        else throw std::runtime_error("config: unknown key '" + key + "' in " + path);
    }
    return c;
}

void write_fit_config(const std::string &path, const FitConfig &c) {
    char num[64];
    auto fmt = [&](double v) {
        std::snprintf(num, sizeof(num), "%.17g", v);
        return std::string(num);
    };
    write_kv_file(path, {
        {"epochs", std::to_string(c.epochs)},
        {"steps_per_epoch", std::to_string(c.steps_per_epoch)},
        {"lr", fmt(c.lr)},
        {"residual_lr", fmt(c.residual_lr)},
        {"patch_h", std::to_string(c.patch.h)},
        {"patch_w", std::to_string(c.patch.w)},
        {"tau_start", fmt(c.tau_start)},
        {"tau_end", fmt(c.tau_end)},
        {"lambda_r_ramp_epochs", std::to_string(c.lambda_r_ramp_epochs)},
        {"alpha", fmt(c.weights.alpha)},
        {"lambda_d", fmt(c.weights.lambda_d)},
        {"per_frame_surface", bool_str(c.per_frame_surface)},
        {"seed", std::to_string(c.seed)},
        {"d_min", fmt(c.d_min)},
        {"d_max", fmt(c.d_max)},
        {"half_res_search", bool_str(c.half_res_search)},
        {"fit_pose", bool_str(c.fit_pose)},
        {"fit_residual", bool_str(c.fit_residual)},
        {"init_depth", fmt(c.init_depth)},
        {"min_valid_fraction", fmt(c.min_valid_fraction)},
        {"lr_min_factor", fmt(c.lr_min_factor)},
    });
}

} // namespace nrs
