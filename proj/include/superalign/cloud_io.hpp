#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "superalign/geometry.hpp"

namespace superalign {

namespace detail {

[[noreturn]] inline void format_fail(const std::string& path, std::size_t line,
                                     const std::string& what) {
    std::ostringstream msg;
    msg << path << ":" << line << ": " << what;
    fail(ErrorCode::Format, msg.str());
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

/// ASCII PLY subset: vertex element with x/y/z and optional nx/ny/nz
/// properties; face elements are skipped. Line numbers are reported on errors.
inline PointCloud read_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Format, "cannot open cloud file: " + path);

    std::string line;
    std::size_t line_no = 0;
    const auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            return true;
        }
        return false;
    };

    if (!next_line() || line != "ply") detail::format_fail(path, line_no, "expected 'ply' magic");
    if (!next_line() || line.rfind("format ascii", 0) != 0) {
        detail::format_fail(path, line_no, "only 'format ascii 1.0' is supported");
    }

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> properties;
    };
    std::vector<Element> elements;

    while (true) {
        if (!next_line()) detail::format_fail(path, line_no, "header ended before end_header");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "end_header") break;
        if (word == "element") {
            Element e;
            if (!(ls >> e.name >> e.count)) detail::format_fail(path, line_no, "malformed element line");
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty()) detail::format_fail(path, line_no, "property before any element");
            std::string type, name;
            ls >> type;
            if (type == "list") {
                std::string count_type, item_type;
                ls >> count_type >> item_type >> name;
            } else {
                ls >> name;
            }
            if (name.empty()) detail::format_fail(path, line_no, "malformed property line");
            elements.back().properties.push_back(name);
        } else {
            detail::format_fail(path, line_no, "unrecognized header keyword '" + word + "'");
        }
    }

    PointCloud cloud;
    for (const auto& element : elements) {
        if (element.name != "vertex") {
            // skip the data lines of non-vertex elements (e.g. faces)
            for (std::size_t i = 0; i < element.count; ++i) {
                if (!next_line()) detail::format_fail(path, line_no, "unexpected end of file");
            }
            continue;
        }

        int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
        for (std::size_t p = 0; p < element.properties.size(); ++p) {
            const std::string& name = element.properties[p];
            const int idx = static_cast<int>(p);
            if (name == "x") ix = idx;
            if (name == "y") iy = idx;
            if (name == "z") iz = idx;
            if (name == "nx") inx = idx;
            if (name == "ny") iny = idx;
            if (name == "nz") inz = idx;
        }
        if (ix < 0 || iy < 0 || iz < 0) {
            detail::format_fail(path, line_no, "vertex element lacks x/y/z properties");
        }
        const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;

        cloud.points.reserve(element.count);
        if (with_normals) cloud.normals.reserve(element.count);
        std::vector<double> values(element.properties.size());
        for (std::size_t i = 0; i < element.count; ++i) {
            if (!next_line()) {
                detail::format_fail(path, line_no,
                                    "vertex count mismatch: header declared " +
                                        std::to_string(element.count) + " vertices, file ended at " +
                                        std::to_string(i));
            }
            std::istringstream ls(line);
            for (std::size_t v = 0; v < values.size(); ++v) {
                if (!(ls >> values[v])) detail::format_fail(path, line_no, "malformed vertex row");
            }
            cloud.points.emplace_back(values[static_cast<std::size_t>(ix)],
                                      values[static_cast<std::size_t>(iy)],
                                      values[static_cast<std::size_t>(iz)]);
            if (with_normals) {
                cloud.normals.emplace_back(values[static_cast<std::size_t>(inx)],
                                           values[static_cast<std::size_t>(iny)],
                                           values[static_cast<std::size_t>(inz)]);
            }
        }
    }
    cloud.validate();
    return cloud;
}

/// XYZ text: one point per line, 3 floats (x y z) or 6 (x y z nx ny nz).
inline PointCloud read_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Format, "cannot open cloud file: " + path);

    PointCloud cloud;
    std::string line;
    std::size_t line_no = 0;
    int fields = 0;  // established by the first data line
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> values;
        double v;
        while (ls >> v) values.push_back(v);
        if (fields == 0) {
            if (values.size() != 3 && values.size() != 6) {
                detail::format_fail(path, line_no, "expected 3 or 6 floats per line");
            }
            fields = static_cast<int>(values.size());
        }
        if (static_cast<int>(values.size()) != fields) {
            detail::format_fail(path, line_no, "inconsistent field count");
        }
        cloud.points.emplace_back(values[0], values[1], values[2]);
        if (fields == 6) cloud.normals.emplace_back(values[3], values[4], values[5]);
    }
    cloud.validate();
    return cloud;
}

inline PointCloud read_cloud(const std::string& path) {
    if (detail::has_suffix(path, ".ply")) return read_ply(path);
    return read_xyz(path);
}

inline void write_cloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Format, "cannot open for writing: " + path);
    char buf[160];
    if (detail::has_suffix(path, ".ply")) {
        out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
            << "property double x\nproperty double y\nproperty double z\n";
        if (cloud.has_normals()) {
            out << "property double nx\nproperty double ny\nproperty double nz\n";
        }
        out << "end_header\n";
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        if (cloud.has_normals()) {
            const Vec3& n = cloud.normals[i];
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g\n", p.x(), p.y(), p.z(),
                          n.x(), n.y(), n.z());
        } else {
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
        }
        out << buf;
    }
}

/// Pose files are 4 lines of 4 floats: a homogeneous matrix with bottom row
/// (0,0,0,1). The rotation block is validated within 1e-5 of SO(3) and
/// re-orthonormalized on read.
inline RigidTransform read_pose(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Format, "cannot open pose file: " + path);
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            if (!(in >> m(r, c))) {
                fail(ErrorCode::Format, path + ": expected 4x4 matrix (16 floats)");
            }
        }
    }
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
        fail(ErrorCode::Format, path + ": bottom row must be 0 0 0 1");
    }
    const Mat3 r = m.block<3, 3>(0, 0);
    if (!r.allFinite() || so3_residual(r) > 1e-5 || std::abs(r.determinant() - 1.0) > 1e-5) {
        fail(ErrorCode::Format, path + ": upper-left block is not a rotation (tolerance 1e-5)");
    }
    RigidTransform t = RigidTransform::from_matrix(m);
    t.rotation = project_to_so3(t.rotation);
    return t;
}

inline void write_pose(const RigidTransform& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Format, "cannot open for writing: " + path);
    const Mat4 m = t.matrix();
    char buf[200];
    for (int r = 0; r < 4; ++r) {
        std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f\n", m(r, 0), m(r, 1), m(r, 2), m(r, 3));
        out << buf;
    }
}

}  // namespace superalign
