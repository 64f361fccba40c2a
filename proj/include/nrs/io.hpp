#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nrs/camera.hpp"
#include "nrs/geometry.hpp"
#include "nrs/grid.hpp"
#include "nrs/losses.hpp"

namespace nrs {

// PFM: "PF" (3-channel) / "Pf" (1-channel), dims line, negative scale for
// little-endian, float32 rows stored bottom-up.
void write_pfm(const std::string &path, const ImageGrid &grid);
ImageGrid read_pfm(const std::string &path);

// 8-bit PNG for human viewing only; values clamped to [0,1].
void write_png8(const std::string &path, const ImageGrid &grid);

// One 3x4 row-major matrix per line, whitespace-separated.
void write_poses(const std::string &path, const std::vector<Pose> &poses);
std::vector<Pose> read_poses(const std::string &path);

struct PlyVertex {
    Vec3 position;
    Vec3 color; // [0,1], quantized to 8 bits
};
void write_ply(const std::string &path, const std::vector<PlyVertex> &vertices,
               bool binary = false);

// Flat key=value text files ('#' comments). Readers reject unknown keys so a
// typo in a config never silently disappears.
using KvPairs = std::vector<std::pair<std::string, std::string>>;
KvPairs read_kv_file(const std::string &path);
void write_kv_file(const std::string &path, const KvPairs &pairs);

// Raw double-precision blob; PFM artifacts are float32 exports, this is what
// exact state reload uses.
void write_doubles(const std::string &path, const std::vector<double> &values);
std::vector<double> read_doubles(const std::string &path);

struct Dataset {
    int height = 0, width = 0;
    std::string camera_kind;
    std::vector<ImageGrid> frames; // H x W x 3, from lossless PFM copies
    std::vector<ImageGrid> depths; // H x W x 1, 0 where invalid
    std::vector<Pose> poses;       // camera-to-world
    RaySurface surface;            // ground-truth ray surface
    PixelMask pixel_valid;         // image-circle / FoV validity
};

// Reads a dataset directory via its manifest; verifies every listed member
// exists and parses.
Dataset load_dataset(const std::string &dir);

} // namespace nrs
