#include "imfield/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace imfield {

VoxelGrid VoxelGrid::empty(int dims, int n) {
    if (dims != 2 && dims != 3) throw ContractError("voxel grid dims must be 2 or 3");
    VoxelGrid g;
    g.dims = dims;
    g.n = n;
    g.occ.assign(static_cast<size_t>(g.cell_count()), 0);
    return g;
}

int64_t VoxelGrid::occupied_count() const {
    int64_t c = 0;
    for (uint8_t v : occ) c += v;
    return c;
}

namespace {

bool primitive_contains(const Primitive& prim, const std::array<double, 3>& p, int dims) {
    return std::visit(
        [&](const auto& s) -> bool {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Sphere>) {
                double d2 = 0;
                for (int i = 0; i < dims; ++i) {
                    double d = p[i] - s.center[i];
                    d2 += d * d;
                }
                return d2 <= s.radius * s.radius;
            } else if constexpr (std::is_same_v<S, Box>) {
                for (int i = 0; i < dims; ++i)
                    if (std::abs(p[i] - s.center[i]) > s.half[i]) return false;
                return true;
            } else if constexpr (std::is_same_v<S, Cylinder>) {
                if (dims == 2) {  // degenerate: disc
                    double dx = p[0] - s.center[0], dy = p[1] - s.center[1];
                    return dx * dx + dy * dy <= s.radius * s.radius;
                }
                int a = s.axis % 3;
                if (std::abs(p[a] - s.center[a]) > s.half_height) return false;
                double r2 = 0;
                for (int i = 0; i < 3; ++i) {
                    if (i == a) continue;
                    double d = p[i] - s.center[i];
                    r2 += d * d;
                }
                return r2 <= s.radius * s.radius;
            } else {  // Torus; annulus in 2D
                if (dims == 2) {
                    double dx = p[0] - s.center[0], dy = p[1] - s.center[1];
                    double r = std::sqrt(dx * dx + dy * dy);
                    return std::abs(r - s.major) <= s.minor;
                }
                int a = s.axis % 3;
                double ax = p[a] - s.center[a];
                double r2 = 0;
                for (int i = 0; i < 3; ++i) {
                    if (i == a) continue;
                    double d = p[i] - s.center[i];
                    r2 += d * d;
                }
                double ring = std::sqrt(r2) - s.major;
                return ring * ring + ax * ax <= s.minor * s.minor;
            }
        },
        prim);
}

// Conservative axis-aligned bounds per primitive, for the margin check.
void primitive_bounds(const Primitive& prim, int dims, std::array<double, 3>& lo,
                      std::array<double, 3>& hi) {
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, Sphere>) {
                for (int i = 0; i < dims; ++i) {
                    lo[i] = s.center[i] - s.radius;
                    hi[i] = s.center[i] + s.radius;
                }
            } else if constexpr (std::is_same_v<S, Box>) {
                for (int i = 0; i < dims; ++i) {
                    lo[i] = s.center[i] - s.half[i];
                    hi[i] = s.center[i] + s.half[i];
                }
            } else if constexpr (std::is_same_v<S, Cylinder>) {
                for (int i = 0; i < dims; ++i) {
                    double r = (dims == 3 && i == s.axis % 3) ? s.half_height : s.radius;
                    lo[i] = s.center[i] - r;
                    hi[i] = s.center[i] + r;
                }
            } else {
                for (int i = 0; i < dims; ++i) {
                    double r = (dims == 3 && i == s.axis % 3) ? s.minor : s.major + s.minor;
                    lo[i] = s.center[i] - r;
                    hi[i] = s.center[i] + r;
                }
            }
        },
        prim);
}

}  // namespace

bool ShapeSpec::contains(const std::array<double, 3>& p) const {
    for (const auto& prim : parts)
        if (primitive_contains(prim, p, dims)) return true;
    return false;
}

void ShapeSpec::validate() const {
    if (parts.empty()) throw ContractError("shape spec has no primitives");
    constexpr double kMargin = 0.05;
    for (const auto& prim : parts) {
        std::array<double, 3> lo{}, hi{};
        primitive_bounds(prim, dims, lo, hi);
        for (int i = 0; i < dims; ++i)
            if (lo[i] < kMargin || hi[i] > 1.0 - kMargin)
                throw ContractError("shape exceeds the [0.05,0.95] margin on axis " +
                                    std::to_string(i));
    }
}

VoxelGrid rasterize(const ShapeSpec& spec, int n) {
    if (n != 16 && n != 32 && n != 64 && n != 128)
        throw ContractError("rasterize resolution must be one of 16/32/64/128");
    spec.validate();
    VoxelGrid g = VoxelGrid::empty(spec.dims, n);
    int nz = spec.dims == 3 ? n : 1;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                std::array<double, 3> p{g.center(x), g.center(y), spec.dims == 3 ? g.center(z) : 0.0};
                if (spec.contains(p)) g.occ[g.index(x, y, z)] = 1;
            }
    return g;
}

VoxelGrid downsample(const VoxelGrid& g) {
    if (g.n < 16) throw ContractError("downsample requires n >= 16 so n/2 >= 8");
    int half = g.n / 2;
    VoxelGrid out = VoxelGrid::empty(g.dims, half);
    int need = g.dims == 3 ? 4 : 2;
    int nz = g.dims == 3 ? half : 1;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < half; ++y)
            for (int x = 0; x < half; ++x) {
                int count = 0;
                int zmax = g.dims == 3 ? 2 : 1;
                for (int dz = 0; dz < zmax; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            count += g.at(2 * x + dx, 2 * y + dy, g.dims == 3 ? 2 * z + dz : 0);
                if (count >= need) out.occ[out.index(x, y, z)] = 1;
            }
    return out;
}

VoxelGrid resample_nearest(const VoxelGrid& g, int n) {
    if (n == g.n) return g;
    VoxelGrid out = VoxelGrid::empty(g.dims, n);
    int nz = g.dims == 3 ? n : 1;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                auto src = [&](int i) {
                    int s = int((i + 0.5) * g.n / n);
                    return std::min(s, g.n - 1);
                };
                if (g.at(src(x), src(y), g.dims == 3 ? src(z) : 0)) out.occ[out.index(x, y, z)] = 1;
            }
    return out;
}

namespace {

void put_u32(std::vector<uint8_t>& v, uint32_t x) {
    v.push_back(uint8_t(x & 0xff));
    v.push_back(uint8_t((x >> 8) & 0xff));
    v.push_back(uint8_t((x >> 16) & 0xff));
    v.push_back(uint8_t((x >> 24) & 0xff));
}

uint32_t get_u32(const std::vector<uint8_t>& v, size_t off) {
    return uint32_t(v[off]) | (uint32_t(v[off + 1]) << 8) | (uint32_t(v[off + 2]) << 16) |
           (uint32_t(v[off + 3]) << 24);
}

}  // namespace

std::vector<uint8_t> save_imvx(const VoxelGrid& g) {
    std::vector<uint8_t> out;
    out.reserve(6 + size_t(4) * g.dims + size_t((g.cell_count() + 7) / 8));
    for (char c : {'I', 'M', 'V', 'X'}) out.push_back(uint8_t(c));
    out.push_back(1);  // version
    out.push_back(uint8_t(g.dims));
    for (int i = 0; i < g.dims; ++i) put_u32(out, uint32_t(g.n));
    uint8_t acc = 0;
    int bits = 0;
    for (int64_t i = 0; i < g.cell_count(); ++i) {  // x fastest, MSB first
        acc = uint8_t((acc << 1) | (g.occ[i] ? 1 : 0));
        if (++bits == 8) {
            out.push_back(acc);
            acc = 0;
            bits = 0;
        }
    }
    if (bits) out.push_back(uint8_t(acc << (8 - bits)));
    return out;
}

VoxelGrid load_imvx(const std::vector<uint8_t>& bytes) {
    auto fail = [&](size_t off, const std::string& why) {
        throw FormatError("IMVX at byte " + std::to_string(off) + ": " + why);
    };
    if (bytes.size() < 6) fail(bytes.size(), "truncated header");
    if (std::memcmp(bytes.data(), "IMVX", 4) != 0) fail(0, "bad magic");
    if (bytes[4] != 1) fail(4, "unsupported version " + std::to_string(bytes[4]));
    int dims = bytes[5];
    if (dims != 2 && dims != 3) fail(5, "dims must be 2 or 3");
    size_t off = 6;
    if (bytes.size() < off + size_t(4) * dims) fail(bytes.size(), "truncated dimension block");
    uint32_t n = get_u32(bytes, off);
    for (int i = 0; i < dims; ++i) {
        uint32_t d = get_u32(bytes, off);
        if (d != n) fail(off, "non-cubic grid");
        off += 4;
    }
    if (n != 8 && n != 16 && n != 32 && n != 64 && n != 128 && n != 256)
        fail(6, "unsupported resolution " + std::to_string(n));
    VoxelGrid g = VoxelGrid::empty(dims, int(n));
    size_t payload = size_t((g.cell_count() + 7) / 8);
    if (bytes.size() < off + payload)
        fail(bytes.size(), "truncated payload, need " + std::to_string(off + payload) + " bytes");
    for (int64_t i = 0; i < g.cell_count(); ++i) {
        uint8_t byte = bytes[off + size_t(i / 8)];
        g.occ[i] = (byte >> (7 - (i % 8))) & 1;
    }
    return g;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw IoError("short write to '" + path + "'");
}

void write_file(const std::string& path, const std::string& text) {
    std::vector<uint8_t> bytes(text.begin(), text.end());
    write_file(path, bytes);
}

void save_imvx_file(const VoxelGrid& g, const std::string& path) { write_file(path, save_imvx(g)); }

VoxelGrid load_imvx_file(const std::string& path) { return load_imvx(read_file(path)); }

namespace {

// Reads one PGM token, skipping whitespace and '#' comments.
std::string pgm_token(const std::vector<uint8_t>& bytes, size_t& off) {
    while (off < bytes.size()) {
        if (std::isspace(bytes[off])) {
            ++off;
        } else if (bytes[off] == '#') {
            while (off < bytes.size() && bytes[off] != '\n') ++off;
        } else {
            break;
        }
    }
    std::string tok;
    while (off < bytes.size() && !std::isspace(bytes[off])) tok.push_back(char(bytes[off++]));
    return tok;
}

}  // namespace

VoxelGrid load_pgm(const std::vector<uint8_t>& bytes, int threshold) {
    size_t off = 0;
    if (pgm_token(bytes, off) != "P5") throw FormatError("PGM: expected binary 'P5' header");
    std::string ws = pgm_token(bytes, off), hs = pgm_token(bytes, off), ms = pgm_token(bytes, off);
    int w = std::atoi(ws.c_str()), h = std::atoi(hs.c_str()), maxval = std::atoi(ms.c_str());
    if (w != h) throw FormatError("PGM: image must be square, got " + ws + "x" + hs);
    if (w < 8 || (w & (w - 1)) != 0) throw FormatError("PGM: side must be a power of two >= 8");
    if (maxval != 255) throw FormatError("PGM: maxval must be 255");
    ++off;  // single whitespace after maxval
    if (bytes.size() < off + size_t(w) * h) throw FormatError("PGM: truncated pixel data");
    VoxelGrid g = VoxelGrid::empty(2, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (bytes[off + size_t(y) * w + x] >= threshold) g.occ[g.index(x, y)] = 1;
    return g;
}

VoxelGrid load_pgm_file(const std::string& path, int threshold) {
    return load_pgm(read_file(path), threshold);
}

std::vector<uint8_t> save_pgm(const std::vector<float>& gray, int side) {
    if (int64_t(gray.size()) != int64_t(side) * side) throw ContractError("save_pgm size mismatch");
    char header[64];
    int len = std::snprintf(header, sizeof(header), "P5\n%d %d\n255\n", side, side);
    std::vector<uint8_t> out(header, header + len);
    for (float v : gray) {
        float c = std::clamp(v, 0.0f, 1.0f);
        out.push_back(uint8_t(std::lround(c * 255.0f)));
    }
    return out;
}

}  // namespace imfield
