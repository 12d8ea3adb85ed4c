#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/estimator.hpp"
#include "sfuda/geometry.hpp"
#include "sfuda/synthgen.hpp"

namespace sfuda {

// ---------------------------------------------------------------------------
// Dataset container.
//
//   magic "GSF1" | u16 version | sections...
//   section: 4-byte tag | u64 element count | payload
//     "PTS1", "PTS2", "FLOW"  -> f32 x 3 per element
//     "LBL1"                  -> u32 per element
//
// All integers and floats little-endian. Points are stored as f32; library
// computation stays in double, and write-then-read reproduces the exact f32
// bit patterns.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}

inline void put_u16(std::string& out, std::uint16_t v) {
    const char b[2] = {char(v & 0xff), char(v >> 8)};
    out.append(b, 2);
}

inline void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    out.append(b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    out.append(b, 8);
}

inline void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

inline void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    const std::string& data;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > data.size()) throw IoError("container: truncated file");
    }
    std::string tag() {
        need(4);
        std::string t = data.substr(pos, 4);
        pos += 4;
        return t;
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= std::uint16_t(std::uint8_t(data[pos + i])) << (8 * i);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(data[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    bool done() const { return pos == data.size(); }
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(data.data(), std::streamsize(data.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline void put_vec3_section(std::string& out, const char* tag, const std::vector<Vec3>& v) {
    out.append(tag, 4);
    put_u64(out, v.size());
    for (const Vec3& p : v) {
        put_f32(out, float(p.x()));
        put_f32(out, float(p.y()));
        put_f32(out, float(p.z()));
    }
}

}  // namespace detail

/// In-memory view of one container file. PTS1 is required; the remaining
/// sections are optional so prediction files (PTS1 + FLOW) share the format.
struct Container {
    std::vector<Vec3> pts1;
    std::vector<Vec3> pts2;
    std::vector<Vec3> flow;
    std::vector<std::uint32_t> labels1;
    bool has_pts2 = false;
    bool has_flow = false;
    bool has_labels1 = false;

    static Container from_pair(const AnnotatedPair& pair) {
        Container c;
        c.pts1 = pair.first.points;
        c.pts2 = pair.second.points;
        c.flow = pair.flow.vectors;
        c.has_pts2 = true;
        c.has_flow = true;
        if (pair.first.has_labels()) {
            c.labels1 = pair.first.labels;
            c.has_labels1 = true;
        }
        return c;
    }

    AnnotatedPair to_pair() const {
        if (!has_pts2 || !has_flow) throw IoError("container: pair requires PTS2 and FLOW sections");
        AnnotatedPair pair;
        pair.first.points = pts1;
        if (has_labels1) pair.first.labels = labels1;
        pair.second.points = pts2;
        pair.flow.vectors = flow;
        return pair;
    }
};

inline constexpr std::uint16_t kContainerVersion = 1;

inline std::string encode_container(const Container& c) {
    if (c.has_flow && c.flow.size() != c.pts1.size())
        throw IoError("container: PTS1 and FLOW counts differ");
    if (c.has_labels1 && c.labels1.size() != c.pts1.size())
        throw IoError("container: PTS1 and LBL1 counts differ");
    std::string out;
    out.append("GSF1", 4);
    detail::put_u16(out, kContainerVersion);
    detail::put_vec3_section(out, "PTS1", c.pts1);
    if (c.has_pts2) detail::put_vec3_section(out, "PTS2", c.pts2);
    if (c.has_flow) detail::put_vec3_section(out, "FLOW", c.flow);
    if (c.has_labels1) {
        out.append("LBL1", 4);
        detail::put_u64(out, c.labels1.size());
        for (std::uint32_t l : c.labels1) detail::put_u32(out, l);
    }
    return out;
}

inline Container decode_container(const std::string& data) {
    detail::Reader r{data};
    if (r.tag() != "GSF1") throw IoError("container: bad magic");
    const std::uint16_t version = r.u16();
    if (version != kContainerVersion) throw IoError("container: unsupported version");

    Container c;
    bool saw_pts1 = false;
    while (!r.done()) {
        const std::string tag = r.tag();
        const std::uint64_t count = r.u64();
        if (tag == "PTS1" || tag == "PTS2" || tag == "FLOW") {
            std::vector<Vec3> v;
            v.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) {
                const double x = double(r.f32()), y = double(r.f32()), z = double(r.f32());
                v.emplace_back(x, y, z);
            }
            if (tag == "PTS1") {
                c.pts1 = std::move(v);
                saw_pts1 = true;
            } else if (tag == "PTS2") {
                c.pts2 = std::move(v);
                c.has_pts2 = true;
            } else {
                c.flow = std::move(v);
                c.has_flow = true;
            }
        } else if (tag == "LBL1") {
            c.labels1.reserve(count);
            for (std::uint64_t i = 0; i < count; ++i) c.labels1.push_back(r.u32());
            c.has_labels1 = true;
        } else {
            throw IoError("container: unknown section tag '" + tag + "'");
        }
    }
    if (!saw_pts1) throw IoError("container: missing PTS1 section");
    if (c.has_flow && c.flow.size() != c.pts1.size())
        throw IoError("container: PTS1 and FLOW counts differ");
    if (c.has_labels1 && c.labels1.size() != c.pts1.size())
        throw IoError("container: PTS1 and LBL1 counts differ");
    return c;
}

inline void write_container(const std::filesystem::path& path, const Container& c) {
    detail::write_file(path, encode_container(c));
}

inline Container read_container(const std::filesystem::path& path) {
    return decode_container(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Parameter checkpoint: magic "GSFP" | u16 version | u32 d | u32 candidate_k
// | f64 log_temperature | f64 embedding entries (row-major 3 x d).
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const EstimatorParams& p) {
    std::string out;
    out.append("GSFP", 4);
    detail::put_u16(out, kCheckpointVersion);
    detail::put_u32(out, std::uint32_t(p.dim()));
    detail::put_u32(out, std::uint32_t(p.candidate_k));
    detail::put_f64(out, p.log_temperature);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < p.dim(); ++c) detail::put_f64(out, p.embedding(r, c));
    return out;
}

inline EstimatorParams decode_checkpoint(const std::string& data) {
    detail::Reader r{data};
    if (r.tag() != "GSFP") throw IoError("checkpoint: bad magic");
    if (r.u16() != kCheckpointVersion) throw IoError("checkpoint: unsupported version");
    const std::uint32_t d = r.u32();
    const std::uint32_t k = r.u32();
    if (d < 3 || k < 1) throw IoError("checkpoint: invalid dimensions");
    EstimatorParams p;
    p.embedding = EmbeddingMatrix::Zero(3, int(d));
    p.candidate_k = int(k);
    p.log_temperature = r.f64();
    for (int row = 0; row < 3; ++row)
        for (std::uint32_t c = 0; c < d; ++c) p.embedding(row, int(c)) = r.f64();
    if (!r.done()) throw IoError("checkpoint: trailing bytes");
    return p;
}

inline void write_checkpoint(const std::filesystem::path& path, const EstimatorParams& p) {
    detail::write_file(path, encode_checkpoint(p));
}

inline EstimatorParams read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// ASCII PLY export for external viewers.
// ---------------------------------------------------------------------------

inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
                      const FlowField* flow = nullptr) {
    if (flow && flow->size() != cloud.size()) throw LengthMismatch("write_ply: flow length mismatch");
    std::string out;
    out += "ply\nformat ascii 1.0\n";
    out += "element vertex " + std::to_string(cloud.size()) + "\n";
    out += "property float x\nproperty float y\nproperty float z\n";
    if (flow) out += "property float fx\nproperty float fy\nproperty float fz\n";
    if (cloud.has_labels()) out += "property uint label\n";
    out += "end_header\n";
    char line[256];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        int len = std::snprintf(line, sizeof line, "%.9g %.9g %.9g", p.x(), p.y(), p.z());
        out.append(line, std::size_t(len));
        if (flow) {
            const Vec3& f = flow->vectors[i];
            len = std::snprintf(line, sizeof line, " %.9g %.9g %.9g", f.x(), f.y(), f.z());
            out.append(line, std::size_t(len));
        }
        if (cloud.has_labels()) {
            len = std::snprintf(line, sizeof line, " %u", cloud.labels[i]);
            out.append(line, std::size_t(len));
        }
        out += "\n";
    }
    detail::write_file(path, out);
}

}  // namespace sfuda
