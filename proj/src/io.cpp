#include "nrs/io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nrs {

namespace {

[[noreturn]] void io_fail(const std::string &path, const std::string &what) {
    throw std::runtime_error("io error: " + path + ": " + what);
}

std::ifstream open_in(const std::string &path, bool binary = true) {
    std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
    if (!f) io_fail(path, "cannot open for reading");
    return f;
}

std::ofstream open_out(const std::string &path, bool binary = true) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) io_fail(path, "cannot open for writing");
    return f;
}

} // namespace

void write_pfm(const std::string &path, const ImageGrid &grid) {
    if (grid.channels != 1 && grid.channels != 3)
        throw std::invalid_argument("write_pfm: only 1 or 3 channels");
    std::ofstream f = open_out(path);
    f << (grid.channels == 3 ? "PF" : "Pf") << "\n"
      << grid.width << " " << grid.height << "\n"
      << "-1.0\n";
    // rows bottom-up
    std::vector<float> row(static_cast<size_t>(grid.width) * grid.channels);
    for (int y = grid.height - 1; y >= 0; --y) {
        for (int x = 0; x < grid.width; ++x)
            for (int c = 0; c < grid.channels; ++c)
                row[static_cast<size_t>(x) * grid.channels + c] =
                    static_cast<float>(grid.at(y, x, c));
        f.write(reinterpret_cast<const char *>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!f) io_fail(path, "write failed");
}

ImageGrid read_pfm(const std::string &path) {
    std::ifstream f = open_in(path);
    std::string magic;
    f >> magic;
    int channels;
    if (magic == "PF")
        channels = 3;
    else if (magic == "Pf")
        channels = 1;
    else
        io_fail(path, "not a PFM file (bad magic '" + magic + "')");
    int w, h;
    double scale;
    f >> w >> h >> scale;
    if (!f || w <= 0 || h <= 0) io_fail(path, "bad PFM header");
    if (scale >= 0) io_fail(path, "big-endian PFM not supported");
    f.get(); // single whitespace after the scale line
    ImageGrid grid(h, w, channels);
    std::vector<float> row(static_cast<size_t>(w) * channels);
    for (int y = h - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char *>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!f) io_fail(path, "truncated PFM payload");
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                grid.at(y, x, c) = row[static_cast<size_t>(x) * channels + c];
    }
    return grid;
}

namespace {

void put_u32be(std::vector<unsigned char> &v, uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

void png_chunk(std::ofstream &f, const char type[4], const std::vector<unsigned char> &payload) {
    std::vector<unsigned char> head;
    put_u32be(head, static_cast<uint32_t>(payload.size()));
    f.write(reinterpret_cast<const char *>(head.data()), 4);
    std::vector<unsigned char> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    const uLong crc = crc32(0L, body.data(), static_cast<uInt>(body.size()));
    f.write(reinterpret_cast<const char *>(body.data()), static_cast<std::streamsize>(body.size()));
    std::vector<unsigned char> tail;
    put_u32be(tail, static_cast<uint32_t>(crc));
    f.write(reinterpret_cast<const char *>(tail.data()), 4);
}

} // namespace

void write_png8(const std::string &path, const ImageGrid &grid) {
    if (grid.channels != 1 && grid.channels != 3)
        throw std::invalid_argument("write_png8: only 1 or 3 channels");
    const int h = grid.height, w = grid.width, c = grid.channels;
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * c));
    for (int y = 0; y < h; ++y) {
        raw.push_back(0); // filter: none
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < c; ++ch) {
                const double v = std::clamp(grid.at(y, x, ch), 0.0, 1.0);
                raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
            }
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        io_fail(path, "zlib compression failed");
    comp.resize(comp_len);

    std::ofstream f = open_out(path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    f.write(reinterpret_cast<const char *>(sig), 8);
    std::vector<unsigned char> ihdr;
    put_u32be(ihdr, static_cast<uint32_t>(w));
    put_u32be(ihdr, static_cast<uint32_t>(h));
    ihdr.push_back(8);                      // bit depth
    ihdr.push_back(c == 3 ? 2 : 0);         // color type
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(f, "IHDR", ihdr);
    png_chunk(f, "IDAT", comp);
    png_chunk(f, "IEND", {});
    if (!f) io_fail(path, "write failed");
}

void write_poses(const std::string &path, const std::vector<Pose> &poses) {
    std::ofstream f = open_out(path, false);
    f.precision(17);
    for (const Pose &p : poses) {
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) f << p.rotation(i, j) << " ";
            f << (i == 0 ? p.translation.x : i == 1 ? p.translation.y : p.translation.z);
            if (i < 2) f << " ";
        }
        f << "\n";
    }
    if (!f) io_fail(path, "write failed");
}

std::vector<Pose> read_poses(const std::string &path) {
    std::ifstream f = open_in(path, false);
    std::vector<Pose> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        double v[12];
        for (int i = 0; i < 12; ++i)
            if (!(ss >> v[i])) io_fail(path, "pose line needs 12 numbers: '" + line + "'");
        Pose p;
        p.rotation(0, 0) = v[0];
        p.rotation(0, 1) = v[1];
        p.rotation(0, 2) = v[2];
        p.translation.x = v[3];
        p.rotation(1, 0) = v[4];
        p.rotation(1, 1) = v[5];
        p.rotation(1, 2) = v[6];
        p.translation.y = v[7];
        p.rotation(2, 0) = v[8];
        p.rotation(2, 1) = v[9];
        p.rotation(2, 2) = v[10];
        p.translation.z = v[11];
        out.push_back(p);
    }
    return out;
}

void write_ply(const std::string &path, const std::vector<PlyVertex> &vertices, bool binary) {
    std::ofstream f = open_out(path);
    f << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
    auto to_byte = [](double v) {
        return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    };
    if (binary) {
        for (const PlyVertex &v : vertices) {
            const float xyz[3] = {static_cast<float>(v.position.x),
                                  static_cast<float>(v.position.y),
                                  static_cast<float>(v.position.z)};
            const unsigned char rgb[3] = {to_byte(v.color.x), to_byte(v.color.y),
                                          to_byte(v.color.z)};
            f.write(reinterpret_cast<const char *>(xyz), sizeof(xyz));
            f.write(reinterpret_cast<const char *>(rgb), sizeof(rgb));
        }
    } else {
        f.precision(9);
        for (const PlyVertex &v : vertices) {
            f << v.position.x << " " << v.position.y << " " << v.position.z << " "
              << static_cast<int>(to_byte(v.color.x)) << " " << static_cast<int>(to_byte(v.color.y))
              << " " << static_cast<int>(to_byte(v.color.z)) << "\n";
        }
    }
    if (!f) io_fail(path, "write failed");
}

KvPairs read_kv_file(const std::string &path) {
    std::ifstream f = open_in(path, false);
    KvPairs out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            io_fail(path, "line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const size_t a = s.find_first_not_of(" \t\r");
            const size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
        };
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

void write_kv_file(const std::string &path, const KvPairs &pairs) {
    std::ofstream f = open_out(path, false);
    for (const auto &[k, v] : pairs) f << k << "=" << v << "\n";
    if (!f) io_fail(path, "write failed");
}

void write_doubles(const std::string &path, const std::vector<double> &values) {
    std::ofstream f = open_out(path);
    const uint64_t n = values.size();
    f.write(reinterpret_cast<const char *>(&n), sizeof(n));
    f.write(reinterpret_cast<const char *>(values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) io_fail(path, "write failed");
}

std::vector<double> read_doubles(const std::string &path) {
    std::ifstream f = open_in(path);
    uint64_t n = 0;
    f.read(reinterpret_cast<char *>(&n), sizeof(n));
    std::vector<double> out(n);
    f.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) io_fail(path, "truncated double blob");
    return out;
}

Dataset load_dataset(const std::string &dir) {
    namespace fs = std::filesystem;
    const std::string manifest_path = dir + "/manifest.txt";
    const KvPairs kv = read_kv_file(manifest_path);
    std::map<std::string, std::string> m(kv.begin(), kv.end());
    auto need = [&](const std::string &key) {
        auto it = m.find(key);
        if (it == m.end()) io_fail(manifest_path, "missing field '" + key + "'");
        return it->second;
    };
    if (need("version") != "1") io_fail(manifest_path, "unsupported manifest version");

    Dataset ds;
    ds.height = std::stoi(need("height"));
    ds.width = std::stoi(need("width"));
    ds.camera_kind = need("camera");
    const int n = std::stoi(need("frames"));
    auto member = [&](const std::string &name) {
        const std::string p = dir + "/" + name;
        if (!fs::exists(p)) io_fail(manifest_path, "listed member missing: " + name);
        return p;
    };
    char buf[64];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "frame_%03d.pfm", i);
        ds.frames.push_back(read_pfm(member(buf)));
        std::snprintf(buf, sizeof(buf), "depth_%03d.pfm", i);
        ds.depths.push_back(read_pfm(member(buf)));
    }
    ds.poses = read_poses(member("poses.txt"));
    if (static_cast<int>(ds.poses.size()) != n) io_fail(manifest_path, "pose count mismatch");
    ds.surface.rays = read_pfm(member("surface.pfm"));
    const ImageGrid mask = read_pfm(member("mask.pfm"));
    ds.pixel_valid.assign(mask.data.size(), 0);
    for (size_t i = 0; i < mask.data.size(); ++i) ds.pixel_valid[i] = mask.data[i] > 0.5 ? 1 : 0;
    return ds;
}

} // namespace nrs
