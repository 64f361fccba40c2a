#include "nrs/synthscene.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "nrs/io.hpp"

namespace nrs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEps = 1e-9;

struct NoiseParams {
    // three sinusoid components per channel
    double fs[3], ft[3], phase[3][3], amp[3];
};

NoiseParams noise_params(uint32_t seed) {
    std::mt19937 rng(seed * 2654435761u + 12345u);
    std::uniform_real_distribution<double> freq(0.15, 0.45);
    std::uniform_real_distribution<double> ph(0.0, 2 * kPi);
    NoiseParams p{};
    double total = 0;
    for (int i = 0; i < 3; ++i) {
        p.fs[i] = freq(rng);
        p.ft[i] = freq(rng);
        p.amp[i] = 1.0 / (i + 1);
        total += p.amp[i];
        for (int c = 0; c < 3; ++c) p.phase[i][c] = ph(rng);
    }
    for (int i = 0; i < 3; ++i) p.amp[i] /= total;
    return p;
}

} // namespace

Vec3 Texture::sample(double s, double t) const {
    if (kind == TextureKind::Checker) {
        const int parity = (static_cast<int>(std::floor(s * scale)) +
                            static_cast<int>(std::floor(t * scale))) &
                           1;
        const double v = parity ? amplitude : -amplitude;
        return {std::clamp(base.x + v, 0.0, 1.0), std::clamp(base.y + v, 0.0, 1.0),
                std::clamp(base.z + v, 0.0, 1.0)};
    }
    const NoiseParams p = noise_params(seed);
    Vec3 out = base;
    double *chan[3] = {&out.x, &out.y, &out.z};
    for (int c = 0; c < 3; ++c) {
        double v = 0;
        for (int i = 0; i < 3; ++i)
            v += p.amp[i] *
                 std::sin(2 * kPi * (p.fs[i] * s * scale + p.ft[i] * t * scale) + p.phase[i][c]);
        *chan[c] = std::clamp(*chan[c] + amplitude * v, 0.0, 1.0);
    }
    return out;
}

Vec3 Texture::sample_solid(const Vec3 &p) const {
    const NoiseParams np = noise_params(seed);
    Vec3 out = base;
    double *chan[3] = {&out.x, &out.y, &out.z};
    for (int c = 0; c < 3; ++c) {
        double v = 0;
        for (int i = 0; i < 3; ++i) {
            // frequency direction reuses the planar params, third axis mixes them
            const double arg = np.fs[i] * p.x + np.ft[i] * p.y +
                               0.5 * (np.fs[i] + np.ft[i]) * p.z;
            v += np.amp[i] * std::sin(2 * kPi * scale * arg + np.phase[i][c]);
        }
        *chan[c] = std::clamp(*chan[c] + amplitude * v, 0.0, 1.0);
    }
    return out;
}

OracleCamera OracleCamera::pinhole(int h, int w, const Intrinsics &k) {
    OracleCamera c;
    c.kind = CameraKind::Pinhole;
    c.height = h;
    c.width = w;
    c.intrinsics = k;
    return c;
}

OracleCamera OracleCamera::fisheye(int h, int w, double focal) {
    OracleCamera c;
    c.kind = CameraKind::EquidistantFisheye;
    c.height = h;
    c.width = w;
    c.focal = focal;
    return c;
}

OracleCamera OracleCamera::catadioptric(int h, int w, double theta_min, double theta_max) {
    OracleCamera c;
    c.kind = CameraKind::EquiangularCatadioptric;
    c.height = h;
    c.width = w;
    c.theta_min = theta_min;
    c.theta_max = theta_max;
    return c;
}

double OracleCamera::image_circle_radius() const {
    return (std::min(height, width) - 1) / 2.0;
}

bool OracleCamera::pixel_valid(int y, int x) const {
    if (kind == CameraKind::Pinhole) return true;
    const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
    const double r = std::hypot(x - cx, y - cy);
    return r <= image_circle_radius() + 1e-12;
}

std::optional<Vec3> OracleCamera::unproject(double u, double v) const {
    switch (kind) {
        case CameraKind::Pinhole:
            return pinhole_unproject(intrinsics, {u, v}, 1.0).normalized();
        case CameraKind::EquidistantFisheye: {
            const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
            const double dx = u - cx, dy = v - cy;
            const double r = std::hypot(dx, dy);
            if (r > image_circle_radius() + 1e-12) return std::nullopt;
            const double theta = r / focal;
            if (theta > kPi) return std::nullopt;
            if (r < 1e-12) return Vec3{0, 0, 1};
            const double s = std::sin(theta) / r;
            return Vec3{dx * s, dy * s, std::cos(theta)};
        }
        case CameraKind::EquiangularCatadioptric: {
            const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
            const double dx = u - cx, dy = v - cy;
            const double r = std::hypot(dx, dy);
            const double rmax = image_circle_radius();
            if (r > rmax + 1e-12) return std::nullopt;
            const double theta = theta_min + (theta_max - theta_min) * r / rmax;
            const double phi = (r < 1e-12) ? 0.0 : std::atan2(dy, dx);
            return Vec3{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                        std::cos(theta)};
        }
    }
    return std::nullopt;
}

std::optional<Vec2> OracleCamera::project(const Vec3 &point) const {
    const double n = point.norm();
    if (n < 1e-12) return std::nullopt;
    switch (kind) {
        case CameraKind::Pinhole: {
            if (point.z <= 0) return std::nullopt;
            const Vec2 p = pinhole_project(intrinsics, point);
            return p;
        }
        case CameraKind::EquidistantFisheye: {
            const double theta = std::acos(std::clamp(point.z / n, -1.0, 1.0));
            const double r = focal * theta;
            if (r > image_circle_radius()) return std::nullopt;
            const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
            const double rho = std::hypot(point.x, point.y);
            if (rho < 1e-14) return Vec2{cx, cy};
            return Vec2{cx + r * point.x / rho, cy + r * point.y / rho};
        }
        case CameraKind::EquiangularCatadioptric: {
            const double theta = std::acos(std::clamp(point.z / n, -1.0, 1.0));
            if (theta < theta_min || theta > theta_max) return std::nullopt;
            const double rmax = image_circle_radius();
            const double r = (theta - theta_min) / (theta_max - theta_min) * rmax;
            const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
            const double rho = std::hypot(point.x, point.y);
            if (rho < 1e-14) return Vec2{cx, cy};
            return Vec2{cx + r * point.x / rho, cy + r * point.y / rho};
        }
    }
    return std::nullopt;
}

RaySurface oracle_ray_surface(const OracleCamera &camera, PixelMask *valid) {
    RaySurface s;
    s.rays = ImageGrid(camera.height, camera.width, 3);
    if (valid) valid->assign(static_cast<size_t>(camera.height) * camera.width, 0);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            const auto q = camera.unproject(x, y);
            const Vec3 ray = q.value_or(Vec3{0, 0, 1});
            s.rays.at(y, x, 0) = ray.x;
            s.rays.at(y, x, 1) = ray.y;
            s.rays.at(y, x, 2) = ray.z;
            if (valid && q)
                (*valid)[static_cast<size_t>(y) * camera.width + x] = 1;
        }
    return s;
}

namespace {

struct Hit {
    double t = 0;
    Vec3 color;
};

bool intersect_rect(const RectPrim &rect, const Vec3 &origin, const Vec3 &dir, Hit *hit) {
    const Vec3 n = rect.edge_u.cross(rect.edge_v);
    const double denom = dir.dot(n);
    if (std::abs(denom) < 1e-14) return false;
    const double t = (rect.origin - origin).dot(n) / denom;
    if (t <= kRayEps) return false;
    const Vec3 p = origin + t * dir - rect.origin;
    const double lu2 = rect.edge_u.dot(rect.edge_u), lv2 = rect.edge_v.dot(rect.edge_v);
    const double a = p.dot(rect.edge_u) / lu2, b = p.dot(rect.edge_v) / lv2;
    if (a < 0 || a > 1 || b < 0 || b > 1) return false;
    hit->t = t;
    hit->color = rect.texture.kind == TextureKind::SolidNoise
                     ? rect.texture.sample_solid(origin + t * dir)
                     : rect.texture.sample(a * std::sqrt(lu2), b * std::sqrt(lv2));
    return true;
}

bool intersect_box(const BoxPrim &box, const Vec3 &origin, const Vec3 &dir, Hit *hit) {
    double tmin = -1e300, tmax = 1e300;
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double lo[3] = {box.min_corner.x, box.min_corner.y, box.min_corner.z};
    const double hi[3] = {box.max_corner.x, box.max_corner.y, box.max_corner.z};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-14) {
            if (o[a] < lo[a] || o[a] > hi[a]) return false;
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a], t1 = (hi[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    double t;
    if (tmin > kRayEps)
        t = tmin;
    else if (tmax > kRayEps)
        t = tmax; // origin inside the box: hit the exit face
    else
        return false;
    const Vec3 p = origin + t * dir;
    // pick the face by the largest normalized slab coordinate
    const double pp[3] = {p.x, p.y, p.z};
    int face = 0;
    double best = -1;
    for (int a = 0; a < 3; ++a) {
        const double span = hi[a] - lo[a];
        const double u = (pp[a] - lo[a]) / span;
        const double edge = std::min(u, 1 - u);
        const double score = -edge;
        if (score > best) {
            best = score;
            face = a;
        }
    }
    const int u_axis = (face + 1) % 3, v_axis = (face + 2) % 3;
    hit->t = t;
    hit->color = box.texture.kind == TextureKind::SolidNoise
                     ? box.texture.sample_solid(p)
                     : box.texture.sample(pp[u_axis], pp[v_axis]);
    return true;
}

} // namespace

RenderResult render(const Scene &scene, const OracleCamera &camera, const Pose &pose) {
    RenderResult out;
    out.image = ImageGrid(camera.height, camera.width, 3);
    out.depth = ImageGrid(camera.height, camera.width, 1);
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const auto q = camera.unproject(x, y);
            Vec3 color = scene.background;
            double depth = 0;
            if (q) {
                const Vec3 dir = pose.rotation * (*q);
                const Vec3 &origin = pose.translation;
                Hit nearest;
                bool any = false;
                Hit h;
                for (const RectPrim &r : scene.rects)
                    if (intersect_rect(r, origin, dir, &h) && (!any || h.t < nearest.t)) {
                        nearest = h;
                        any = true;
                    }
                for (const BoxPrim &b : scene.boxes)
                    if (intersect_box(b, origin, dir, &h) && (!any || h.t < nearest.t)) {
                        nearest = h;
                        any = true;
                    }
                if (any) {
                    color = nearest.color;
                    depth = nearest.t; // distance along the unit ray
                }
            }
            out.image.at(y, x, 0) = color.x;
            out.image.at(y, x, 1) = color.y;
            out.image.at(y, x, 2) = color.z;
            out.depth.at(y, x) = depth;
        }
    }
    return out;
}

void make_sequence(const Scene &scene, const OracleCamera &camera,
                   const std::vector<Pose> &trajectory, const std::string &out_dir) {
    if (trajectory.size() < 3)
        throw std::invalid_argument("make_sequence: need at least 3 poses");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    char buf[64];
    for (size_t i = 0; i < trajectory.size(); ++i) {
        const RenderResult r = render(scene, camera, trajectory[i]);
        std::snprintf(buf, sizeof(buf), "frame_%03zu.pfm", i);
        write_pfm(out_dir + "/" + buf, r.image);
        std::snprintf(buf, sizeof(buf), "frame_%03zu.png", i);
        write_png8(out_dir + "/" + buf, r.image);
        std::snprintf(buf, sizeof(buf), "depth_%03zu.pfm", i);
        write_pfm(out_dir + "/" + buf, r.depth);
    }
    write_poses(out_dir + "/poses.txt", trajectory);

    PixelMask valid;
    const RaySurface surface = oracle_ray_surface(camera, &valid);
    write_pfm(out_dir + "/surface.pfm", surface.rays);
    ImageGrid mask(camera.height, camera.width, 1);
    for (size_t i = 0; i < valid.size(); ++i) mask.data[i] = valid[i] ? 1.0 : 0.0;
    write_pfm(out_dir + "/mask.pfm", mask);

    const char *kind = camera.kind == CameraKind::Pinhole ? "pinhole"
                       : camera.kind == CameraKind::EquidistantFisheye ? "fisheye"
                                                                       : "catadioptric";
    KvPairs manifest = {
        {"version", "1"},
        {"camera", kind},
        {"height", std::to_string(camera.height)},
        {"width", std::to_string(camera.width)},
        {"frames", std::to_string(trajectory.size())},
    };
    write_kv_file(out_dir + "/manifest.txt", manifest);
}

Scene make_plane_scene() {
    Scene s;
    auto noise = [](uint32_t seed, double scale) {
        Texture t;
        t.kind = TextureKind::SmoothNoise;
        t.seed = seed;
        t.scale = scale;
        t.amplitude = 0.32;
        return t;
    };
    // backdrop
    RectPrim back;
    back.origin = {-12, -12, 7};
    back.edge_u = {24, 0, 0};
    back.edge_v = {0, 24, 0};
    back.texture = noise(7, 0.8);
    s.rects.push_back(back);
    // mid-depth slanted card
    RectPrim mid;
    mid.origin = {-4.5, -3.5, 4.6};
    mid.edge_u = {4.4, 0, 0.9};
    mid.edge_v = {0, 5.4, 0};
    mid.texture = noise(13, 1.2);
    s.rects.push_back(mid);
    // near card
    RectPrim near_card;
    near_card.origin = {0.6, -2.6, 3.1};
    near_card.edge_u = {3.4, 0, -0.5};
    near_card.edge_v = {0, 4.2, 0};
    near_card.texture = noise(21, 1.5);
    s.rects.push_back(near_card);
    // a box off to the side
    BoxPrim box;
    box.min_corner = {-3.2, 0.4, 3.4};
    box.max_corner = {-1.0, 2.6, 5.2};
    box.texture = noise(29, 1.4);
    s.boxes.push_back(box);
    return s;
}

Scene make_room_scene() {
    Scene s;
    BoxPrim room;
    room.min_corner = {-6, -6, -6};
    room.max_corner = {6, 6, 6};
    room.texture.kind = TextureKind::SmoothNoise;
    room.texture.seed = 3;
    room.texture.scale = 0.55;
    room.texture.amplitude = 0.34;
    s.boxes.push_back(room);
    // interior cards give nearer structure
    RectPrim card;
    card.origin = {-2.4, -1.8, 3.4};
    card.edge_u = {2.6, 0, 0.4};
    card.edge_v = {0, 2.8, 0};
    card.texture.kind = TextureKind::SmoothNoise;
    card.texture.seed = 11;
    card.texture.scale = 1.1;
    card.texture.amplitude = 0.3;
    s.rects.push_back(card);
    RectPrim card2;
    card2.origin = {0.8, -2.2, -3.8};
    card2.edge_u = {-2.2, 0, 0.5};
    card2.edge_v = {0, 2.6, 0};
    card2.texture.kind = TextureKind::SmoothNoise;
    card2.texture.seed = 17;
    card2.texture.scale = 1.0;
    card2.texture.amplitude = 0.3;
    s.rects.push_back(card2);
    return s;
}

} // namespace nrs
