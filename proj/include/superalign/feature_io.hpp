#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "superalign/descriptors.hpp"

namespace superalign {

// Feature file formats:
//   text   "SPFEAT v1 <N> <D>" header, then N lines of D space-separated floats
//   binary magic "SPFB", little-endian u32 N, u32 D, then N*D little-endian f32

namespace detail {

inline bool is_little_endian() {
    const std::uint32_t probe = 1;
    std::uint8_t b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

inline std::uint32_t read_u32_le(std::istream& in) {
    std::uint8_t bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    const std::uint8_t bytes[4] = {static_cast<std::uint8_t>(v & 0xff),
                                   static_cast<std::uint8_t>((v >> 8) & 0xff),
                                   static_cast<std::uint8_t>((v >> 16) & 0xff),
                                   static_cast<std::uint8_t>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

inline float read_f32_le(std::istream& in) {
    const std::uint32_t bits = read_u32_le(in);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

inline void write_f32_le(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32_le(out, bits);
}

}  // namespace detail

inline void save_features_text(const FeatureMatrix& fm, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::Format, "cannot open for writing: " + path);
    out << "SPFEAT v1 " << fm.rows.rows() << " " << fm.rows.cols() << "\n";
    char buf[64];
    for (Eigen::Index i = 0; i < fm.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < fm.rows.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", fm.rows(i, j));
            out << (j ? " " : "") << buf;
        }
        out << "\n";
    }
}

inline void save_features_binary(const FeatureMatrix& fm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::Format, "cannot open for writing: " + path);
    out.write("SPFB", 4);
    detail::write_u32_le(out, static_cast<std::uint32_t>(fm.rows.rows()));
    detail::write_u32_le(out, static_cast<std::uint32_t>(fm.rows.cols()));
    for (Eigen::Index i = 0; i < fm.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < fm.rows.cols(); ++j) {
            detail::write_f32_le(out, static_cast<float>(fm.rows(i, j)));
        }
    }
}

inline FeatureMatrix load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::Format, "cannot open feature file: " + path);

    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    const bool binary = in.gcount() == 4 && std::memcmp(magic, "SPFB", 4) == 0;
    FeatureMatrix fm;

    if (binary) {
        const std::uint32_t n = detail::read_u32_le(in);
        const std::uint32_t d = detail::read_u32_le(in);
        if (!in) fail(ErrorCode::Format, path + ": truncated SPFB header at byte offset 4");
        fm.rows.resize(n, d);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint32_t j = 0; j < d; ++j) {
                const float v = detail::read_f32_le(in);
                if (!in) {
                    std::ostringstream msg;
                    msg << path << ": truncated at byte offset " << (12 + 4 * (i * d + j))
                        << ", expected " << n << " rows but found " << i;
                    fail(ErrorCode::Format, msg.str());
                }
                if (!std::isfinite(v)) fail(ErrorCode::Data, path + ": non-finite feature entry");
                fm.rows(i, j) = static_cast<double>(v);
            }
        }
        return fm;
    }

    in.clear();
    in.seekg(0);
    std::string tag, version;
    std::int64_t n = -1, d = -1;
    if (!(in >> tag >> version >> n >> d) || tag != "SPFEAT" || version != "v1" || n < 0 || d < 0) {
        fail(ErrorCode::Format, path + ": expected header 'SPFEAT v1 <N> <D>' at byte offset 0");
    }
    fm.rows.resize(n, d);
    std::string token;
    for (std::int64_t i = 0; i < n; ++i) {
        const std::streamoff row_start = in.tellg();
        for (std::int64_t j = 0; j < d; ++j) {
            if (!(in >> token)) {
                std::ostringstream msg;
                msg << path << ": truncated near byte offset " << row_start << ", expected " << n
                    << " rows but found " << i;
                fail(ErrorCode::Format, msg.str());
            }
            // strtod so that nan/inf tokens parse and hit the finiteness check
            char* end = nullptr;
            const double v = std::strtod(token.c_str(), &end);
            if (end == token.c_str() || *end != '\0') {
                fail(ErrorCode::Format, path + ": malformed feature value '" + token + "'");
            }
            if (!std::isfinite(v)) fail(ErrorCode::Data, path + ": non-finite feature entry");
            fm.rows(i, j) = v;
        }
    }
    return fm;
}

}  // namespace superalign
