// Point cloud and trajectory readers/writers.

#ifndef QUATRO_IO_HPP
#define QUATRO_IO_HPP

#include "quatro/core.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace quatro {

/// Malformed file content. `where()` is a byte offset or a 1-based line number.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string &msg, std::size_t where) : std::runtime_error(msg), where_(where) {}
    std::size_t where() const { return where_; }

private:
    std::size_t where_;
};

struct TrajectoryEntry {
    double timestamp = 0.0;  // seconds; index-derived when the source has none
    RigidMotion pose;
};

using Trajectory = std::vector<TrajectoryEntry>;

namespace detail {

inline std::vector<char> read_all_bytes(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline float le_float(const char *p) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | static_cast<unsigned char>(p[b]);
    return std::bit_cast<float>(u);
}

inline void put_le_float(std::ostream &os, float f) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

}  // namespace detail

/// KITTI velodyne scan: little-endian float32 records (x, y, z, intensity).
inline PointCloud read_kitti_bin(const std::string &path) {
    const auto bytes = detail::read_all_bytes(path);
    if (bytes.size() % 16 != 0) {
        const std::size_t tail = bytes.size() - bytes.size() % 16;
        throw FormatError(path + ": length " + std::to_string(bytes.size()) +
                              " is not a multiple of 16; trailing record starts at byte " + std::to_string(tail),
                          tail);
    }
    PointCloud cloud;
    const std::size_t n = bytes.size() / 16;
    cloud.points.reserve(n);
    cloud.intensity.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const char *rec = bytes.data() + 16 * i;
        const Point3 p(detail::le_float(rec), detail::le_float(rec + 4), detail::le_float(rec + 8));
        if (!is_finite(p)) throw FormatError(path + ": non-finite point at byte " + std::to_string(16 * i), 16 * i);
        cloud.push_back(p, detail::le_float(rec + 12));
    }
    return cloud;
}

inline void write_kitti_bin(const PointCloud &cloud, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    const bool with_i = cloud.has_intensity();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto &p = cloud[i];
        detail::put_le_float(out, static_cast<float>(p.x()));
        detail::put_le_float(out, static_cast<float>(p.y()));
        detail::put_le_float(out, static_cast<float>(p.z()));
        detail::put_le_float(out, with_i ? cloud.intensity[i] : 0.0f);
    }
}

/// ASCII PLY reader. Only the vertex element is loaded; x, y, z (and intensity
/// when present) are taken, other properties are skipped.
inline PointCloud read_ply_ascii(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next_line() || line != "ply") throw FormatError(path + ": missing 'ply' magic", 1);

    bool ascii = false;
    bool in_vertex = false;
    bool seen_vertex = false;
    std::size_t vertex_count = 0;
    std::size_t lines_before_vertex = 0;  // data lines of elements declared before vertex
    std::vector<std::string> props;
    for (;;) {
        if (!next_line()) throw FormatError(path + ": header not terminated by end_header", line_no);
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (kw == "element") {
            std::string name;
            std::size_t count = 0;
            if (!(ls >> name >> count)) throw FormatError(path + ": malformed element line", line_no);
            in_vertex = name == "vertex";
            if (in_vertex) {
                seen_vertex = true;
                vertex_count = count;
            } else if (!seen_vertex) {
                lines_before_vertex += count;
            }
        } else if (kw == "property") {
            if (in_vertex) {
                std::string type, name;
                ls >> type;
                if (type == "list") throw FormatError(path + ": list properties on vertex not supported", line_no);
                ls >> name;
                props.push_back(name);
            }
        } else if (kw == "end_header") {
            break;
        }
    }
    if (!ascii) throw FormatError(path + ": only ascii PLY is supported", line_no);
    if (!seen_vertex) throw FormatError(path + ": missing vertex element", line_no);
    auto find = [&](const char *n) -> int {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i] == n) return static_cast<int>(i);
        return -1;
    };
    const int ix = find("x"), iy = find("y"), iz = find("z"), ii = find("intensity");
    if (ix < 0 || iy < 0 || iz < 0) throw FormatError(path + ": vertex element lacks x/y/z", line_no);

    for (std::size_t k = 0; k < lines_before_vertex; ++k)
        if (!next_line()) throw FormatError(path + ": truncated before vertex data", line_no);

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    std::vector<double> vals(props.size());
    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (!next_line())
            throw FormatError(path + ": header declares " + std::to_string(vertex_count) + " vertices, found " +
                                  std::to_string(v),
                              line_no);
        std::istringstream ls(line);
        for (auto &x : vals)
            if (!(ls >> x)) throw FormatError(path + ": bad vertex line " + std::to_string(line_no), line_no);
        const Point3 p(vals[ix], vals[iy], vals[iz]);
        if (!is_finite(p)) throw FormatError(path + ": non-finite vertex at line " + std::to_string(line_no), line_no);
        if (ii >= 0) cloud.push_back(p, static_cast<float>(vals[ii]));
        else cloud.push_back(p);
    }
    return cloud;
}

inline void write_ply_ascii(const PointCloud &cloud, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    const bool with_i = cloud.has_intensity();
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (with_i) out << "property float intensity\n";
    out << "end_header\n";
    out << std::setprecision(9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto &p = cloud[i];
        out << p.x() << ' ' << p.y() << ' ' << p.z();
        if (with_i) out << ' ' << cloud.intensity[i];
        out << '\n';
    }
}

/// Dispatches on extension: `.bin` (KITTI) or `.ply`.
inline PointCloud read_cloud(const std::string &path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".bin") return read_kitti_bin(path);
    if (ext == ".ply") return read_ply_ascii(path);
    throw std::runtime_error("unsupported cloud format: " + path);
}

inline void write_cloud(const PointCloud &cloud, const std::string &path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".bin") return write_kitti_bin(cloud, path);
    if (ext == ".ply") return write_ply_ascii(cloud, path);
    throw std::runtime_error("unsupported cloud format: " + path);
}

/// KITTI pose file: one row-major 3x4 matrix per line. Rotations with a small
/// orthonormality residual (< 1e-3) are projected onto SO(3).
inline Trajectory read_kitti_poses(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    Trajectory traj;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(tok, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used != tok.size())
                throw FormatError(path + ":" + std::to_string(line_no) + ": non-numeric token '" + tok + "'", line_no);
            v.push_back(x);
        }
        if (v.size() != 12)
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected 12 values, got " +
                                  std::to_string(v.size()),
                              line_no);
        Eigen::Matrix3d r;
        r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
        if (orthonormality_residual(r) >= 1e-3 || r.determinant() <= 0.0)
            throw FormatError(path + ":" + std::to_string(line_no) + ": rotation is not orthonormal", line_no);
        traj.push_back({static_cast<double>(traj.size()),
                        RigidMotion(project_to_rotation(r), Point3(v[3], v[7], v[11]))});
    }
    if (traj.empty()) throw FormatError(path + ": no poses", 0);
    return traj;
}

inline void write_kitti_poses(const Trajectory &traj, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << std::setprecision(12);
    for (const auto &e : traj) {
        const auto m = e.pose.matrix();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) out << m(r, c) << ((r == 2 && c == 3) ? '\n' : ' ');
    }
}

}  // namespace quatro

#endif  // QUATRO_IO_HPP
