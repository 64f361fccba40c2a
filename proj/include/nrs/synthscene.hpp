#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nrs/camera.hpp"
#include "nrs/geometry.hpp"
#include "nrs/grid.hpp"

namespace nrs {

enum class TextureKind { Checker, SmoothNoise, SolidNoise };

// Procedural surface color. SmoothNoise is a fixed-seed mixture of low
// frequency sinusoids, band-limited so bilinear resampling of a rendered
// frame stays below 1% of dynamic range at the working resolutions.
struct Texture {
    TextureKind kind = TextureKind::SmoothNoise;
    double scale = 1.0; // spatial frequency scale
    uint32_t seed = 0;
    Vec3 base{0.5, 0.5, 0.5};
    double amplitude = 0.35;

    Vec3 sample(double s, double t) const;
    // SolidNoise: color as a smooth function of the 3D hit point, continuous
    // across primitive edges (no seams at box creases).
    Vec3 sample_solid(const Vec3 &p) const;
};

// Finite textured rectangle: origin corner plus two edge vectors.
struct RectPrim {
    Vec3 origin;
    Vec3 edge_u, edge_v; // not necessarily unit; extents are their norms
    Texture texture;
};

// Axis-aligned textured box; rays starting inside hit the exit face.
struct BoxPrim {
    Vec3 min_corner, max_corner;
    Texture texture;
};

struct Scene {
    std::vector<RectPrim> rects;
    std::vector<BoxPrim> boxes;
    Vec3 background{0.2, 0.2, 0.25};
};

enum class CameraKind { Pinhole, EquidistantFisheye, EquiangularCatadioptric };

// Analytically known camera, used to generate ground truth for every test.
struct OracleCamera {
    CameraKind kind = CameraKind::Pinhole;
    int height = 64, width = 64;
    Intrinsics intrinsics;      // pinhole
    double focal = 24.0;        // fisheye: r = focal * theta
    double theta_min = 0.0;     // catadioptric: elevation at image center
    double theta_max = 2.0;     // catadioptric: elevation at the circle edge

    static OracleCamera pinhole(int h, int w, const Intrinsics &k);
    static OracleCamera fisheye(int h, int w, double focal);
    static OracleCamera catadioptric(int h, int w, double theta_min, double theta_max);

    double image_circle_radius() const;
    bool pixel_valid(int y, int x) const;
    // Unit ray for a pixel; nullopt outside the image circle.
    std::optional<Vec3> unproject(double u, double v) const;
    // Closed-form projection; nullopt if the point is outside the field of view.
    std::optional<Vec2> project(const Vec3 &point) const;
};

using PixelMask = std::vector<uint8_t>;

// Exact per-pixel surface from the closed-form model. Pixels outside the
// image circle get a placeholder ray (+z) and are reported via the mask.
RaySurface oracle_ray_surface(const OracleCamera &camera, PixelMask *valid = nullptr);

struct RenderResult {
    ImageGrid image;  // H x W x 3
    ImageGrid depth;  // H x W x 1, distance along the ray; 0 where invalid
};

// Exact ray cast through the camera placed at `pose` (camera-to-world).
RenderResult render(const Scene &scene, const OracleCamera &camera, const Pose &pose);

// Writes frames (PFM + PNG), depths, camera-to-world poses, the oracle
// surface, the validity mask, and a manifest. Deterministic.
void make_sequence(const Scene &scene, const OracleCamera &camera,
                   const std::vector<Pose> &trajectory, const std::string &out_dir);

// Canned scenes used by the CLI and the acceptance tests.
Scene make_plane_scene();    // layered fronto-parallel rectangles plus a box
Scene make_room_scene();     // inside of a large textured box (full sphere of rays)

} // namespace nrs
