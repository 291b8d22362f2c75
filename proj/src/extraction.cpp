#include "imfield/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <unordered_map>

namespace imfield {

FieldGrid field_from_grid(const VoxelGrid& g) {
    FieldGrid f;
    f.dims = g.dims;
    f.m = g.n;
    f.values.resize(size_t(g.cell_count()));
    for (size_t i = 0; i < f.values.size(); ++i) f.values[i] = g.occ[i] ? 1.0f : 0.0f;
    return f;
}

VoxelGrid grid_from_field(const FieldGrid& f, float k) {
    VoxelGrid g = VoxelGrid::empty(f.dims, f.m);
    for (size_t i = 0; i < g.occ.size(); ++i) g.occ[i] = f.values[i] > k ? 1 : 0;
    return g;
}

FieldGrid sample_field(const ParamStore& store, const DecoderArch& arch, const std::vector<float>& z,
                       int m) {
    if (m < 2) throw ContractError("sample_field: m must be >= 2, got " + std::to_string(m));
    const int D = arch.point_dim;
    if (D != 2 && D != 3) throw ContractError("sample_field: point_dim must be 2 or 3");

    FieldGrid f;
    f.dims = D;
    f.m = m;
    f.values.resize(size_t(f.cell_count()));

    const int64_t total = f.cell_count();
    const int64_t batch = 8192;
    Tensor<float> pts = Tensor<float>::zeros({int(std::min(batch, total)), D});
    for (int64_t start = 0; start < total; start += batch) {
        const int b = int(std::min(batch, total - start));
        if (pts.rows() != b) pts = Tensor<float>::zeros({b, D});
        for (int r = 0; r < b; ++r) {
            int64_t idx = start + r;
            const int x = int(idx % m);
            const int y = int((idx / m) % m);
            pts.data[size_t(r) * D + 0] = float(f.center(x));
            pts.data[size_t(r) * D + 1] = float(f.center(y));
            if (D == 3) pts.data[size_t(r) * D + 2] = float(f.center(int(idx / (int64_t(m) * m))));
        }
        Tensor<float> out = decode(store, arch, z, pts);
        std::copy(out.data.begin(), out.data.end(), f.values.begin() + start);
    }
    return f;
}

namespace {

// Corner c of the lattice cell at sample (x,y,z) sits at sample
// (x,y,z) + corner_off[c]; edge e joins corner_edge[e][0..1].
constexpr int corner_off[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
                                  {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
constexpr int corner_edge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

float perturbed(float v, float k) { return v == k ? k + 1e-6f : v; }

}  // namespace

Mesh marching_cubes(const FieldGrid& f, float k) {
    if (f.dims != 3) throw ShapeError("marching_cubes: field must be 3-d");
    if (f.m < 2) throw ContractError("marching_cubes: m must be >= 2");
    const int m = f.m;

    Mesh mesh;
    // Shared interpolated vertices, keyed by (lower sample id, axis).
    std::unordered_map<int64_t, int> edge_vertex;
    auto sample_id = [m](int x, int y, int z) { return (int64_t(z) * m + y) * m + x; };

    auto vertex_on_edge = [&](int cx, int cy, int cz, int e) {
        const int* a = corner_off[corner_edge[e][0]];
        const int* b = corner_off[corner_edge[e][1]];
        int ax = cx + a[0], ay = cy + a[1], az = cz + a[2];
        int bx = cx + b[0], by = cy + b[1], bz = cz + b[2];
        const int axis = ax != bx ? 0 : (ay != by ? 1 : 2);
        if (ax + ay + az > bx + by + bz) {
            std::swap(ax, bx);
            std::swap(ay, by);
            std::swap(az, bz);
        }
        const int64_t key = sample_id(ax, ay, az) * 3 + axis;
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;

        const float v0 = perturbed(f.at(ax, ay, az), k);
        const float v1 = perturbed(f.at(bx, by, bz), k);
        const float t = (k - v0) / (v1 - v0);
        std::array<float, 3> p = {float(f.center(ax)), float(f.center(ay)), float(f.center(az))};
        p[axis] += t * float(f.center(1) - f.center(0));
        const int id = int(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int cz = 0; cz < m - 1; ++cz)
        for (int cy = 0; cy < m - 1; ++cy)
            for (int cx = 0; cx < m - 1; ++cx) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    const float v = perturbed(
                        f.at(cx + corner_off[c][0], cy + corner_off[c][1], cz + corner_off[c][2]), k);
                    if (v < k) cube |= 1 << c;
                }
                if (detail::mc_edge_table[cube] == 0) continue;

                int on_edge[12];
                for (int e = 0; e < 12; ++e)
                    if (detail::mc_edge_table[cube] & (1 << e)) on_edge[e] = vertex_on_edge(cx, cy, cz, e);

                const int* row = detail::mc_tri_table[cube];
                for (int t = 0; row[t] != -1; t += 3) {
                    // Swapping the last two table entries flips the winding so
                    // normals point toward the below-threshold side.
                    std::array<int, 3> tri = {on_edge[row[t]], on_edge[row[t + 2]], on_edge[row[t + 1]]};
                    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) continue;
                    if (mesh.vertices[size_t(tri[0])] == mesh.vertices[size_t(tri[1])] ||
                        mesh.vertices[size_t(tri[1])] == mesh.vertices[size_t(tri[2])] ||
                        mesh.vertices[size_t(tri[0])] == mesh.vertices[size_t(tri[2])])
                        continue;
                    mesh.triangles.push_back(tri);
                }
            }
    return mesh;
}

MeshStats mesh_stats(const Mesh& mesh) {
    MeshStats s;
    s.vertex_count = int64_t(mesh.vertices.size());
    s.triangle_count = int64_t(mesh.triangles.size());

    std::unordered_map<int64_t, int> edge_uses;
    auto ekey = [&](int a, int b) {
        return int64_t(std::min(a, b)) * int64_t(mesh.vertices.size()) + std::max(a, b);
    };
    for (const auto& t : mesh.triangles)
        for (int i = 0; i < 3; ++i) ++edge_uses[ekey(t[i], t[(i + 1) % 3])];

    s.edge_count = int64_t(edge_uses.size());
    s.euler = s.vertex_count - s.edge_count + s.triangle_count;
    s.watertight = !mesh.triangles.empty();
    for (const auto& [key, uses] : edge_uses)
        if (uses != 2) s.watertight = false;

    double vol6 = 0.0;
    for (const auto& t : mesh.triangles) {
        const auto& a = mesh.vertices[size_t(t[0])];
        const auto& b = mesh.vertices[size_t(t[1])];
        const auto& c = mesh.vertices[size_t(t[2])];
        vol6 += double(a[0]) * (double(b[1]) * c[2] - double(b[2]) * c[1]) -
                double(a[1]) * (double(b[0]) * c[2] - double(b[2]) * c[0]) +
                double(a[2]) * (double(b[0]) * c[1] - double(b[1]) * c[0]);
    }
    s.signed_volume = vol6 / 6.0;
    return s;
}

namespace {

// Directed marching-squares segments per case, inside kept on the left so
// loops run counter-clockwise around inside regions. Endpoints name the cell
// edge carrying the contour point: 0 bottom, 1 right, 2 top, 3 left. Cases 5
// and 10 are the saddles; their second pair applies when the center average
// is outside.
struct SquareCase {
    int seg[4][2];
    int count;
};
constexpr SquareCase square_cases[16] = {
    {{}, 0},
    {{{0, 3}}, 1},
    {{{1, 0}}, 1},
    {{{1, 3}}, 1},
    {{{2, 1}}, 1},
    {{{0, 1}, {2, 3}, {0, 3}, {2, 1}}, 2},
    {{{2, 0}}, 1},
    {{{2, 3}}, 1},
    {{{3, 2}}, 1},
    {{{0, 2}}, 1},
    {{{3, 0}, {1, 2}, {1, 0}, {3, 2}}, 2},
    {{{1, 2}}, 1},
    {{{3, 1}}, 1},
    {{{0, 1}}, 1},
    {{{3, 0}}, 1},
    {{}, 0},
};

}  // namespace

std::vector<Loop> marching_squares(const FieldGrid& f, float k) {
    if (f.dims != 2) throw ShapeError("marching_squares: field must be 2-d");
    if (f.m < 2) throw ContractError("marching_squares: m must be >= 2");
    const int m = f.m;

    // Contour points keyed by (lower sample id, axis); axis 0 = horizontal
    // cell edge, 1 = vertical.
    auto ms_key = [m](int x, int y, int axis) { return (int64_t(y) * m + x) * 2 + axis; };
    std::unordered_map<int64_t, std::array<float, 2>> point_at;
    std::unordered_map<int64_t, int64_t> next_of;

    auto contour_point = [&](int x, int y, int axis, int64_t key) {
        if (point_at.count(key)) return;
        const float v0 = perturbed(f.at(x, y), k);
        const float v1 = perturbed(axis == 0 ? f.at(x + 1, y) : f.at(x, y + 1), k);
        const float t = (k - v0) / (v1 - v0);
        std::array<float, 2> p = {float(f.center(x)), float(f.center(y))};
        p[axis == 0 ? 0 : 1] += t * float(f.center(1) - f.center(0));
        point_at.emplace(key, p);
    };

    for (int cy = 0; cy < m - 1; ++cy)
        for (int cx = 0; cx < m - 1; ++cx) {
            const float v[4] = {perturbed(f.at(cx, cy), k), perturbed(f.at(cx + 1, cy), k),
                                perturbed(f.at(cx + 1, cy + 1), k), perturbed(f.at(cx, cy + 1), k)};
            int idx = 0;
            for (int c = 0; c < 4; ++c)
                if (v[c] > k) idx |= 1 << c;
            const SquareCase& sc = square_cases[idx];
            if (sc.count == 0) continue;

            // Edge endpoints in (x, y, axis) form: bottom, right, top, left.
            const int edge_xyA[4][3] = {{cx, cy, 0}, {cx + 1, cy, 1}, {cx, cy + 1, 0}, {cx, cy, 1}};
            int64_t keys[4];
            for (int e = 0; e < 4; ++e) keys[e] = ms_key(edge_xyA[e][0], edge_xyA[e][1], edge_xyA[e][2]);

            int base = 0;
            if ((idx == 5 || idx == 10) && 0.25f * (v[0] + v[1] + v[2] + v[3]) <= k) base = 2;
            for (int s = 0; s < sc.count; ++s) {
                const int src = sc.seg[base + s][0], dst = sc.seg[base + s][1];
                contour_point(edge_xyA[src][0], edge_xyA[src][1], edge_xyA[src][2], keys[src]);
                contour_point(edge_xyA[dst][0], edge_xyA[dst][1], edge_xyA[dst][2], keys[dst]);
                next_of[keys[src]] = keys[dst];
            }
        }

    std::vector<Loop> loops;
    std::unordered_map<int64_t, bool> used;
    for (const auto& [start, ignored] : next_of) {
        if (used[start]) continue;
        Loop loop;
        int64_t cur = start;
        do {
            used[cur] = true;
            loop.push_back(point_at.at(cur));
            auto it = next_of.find(cur);
            if (it == next_of.end())
                throw ContractError("marching_squares: contour reaches the lattice boundary");
            cur = it->second;
        } while (cur != start);
        loops.push_back(std::move(loop));
    }
    return loops;
}

double loop_signed_area(const Loop& loop) {
    double a = 0.0;
    for (size_t i = 0; i < loop.size(); ++i) {
        const auto& p = loop[i];
        const auto& q = loop[(i + 1) % loop.size()];
        a += double(p[0]) * q[1] - double(q[0]) * p[1];
    }
    return 0.5 * a;
}

std::string export_obj(const Mesh& mesh) {
    std::string out;
    out.reserve(mesh.vertices.size() * 32 + mesh.triangles.size() * 24);
    char line[96];
    for (const auto& v : mesh.vertices) {
        std::snprintf(line, sizeof line, "v %.6g %.6g %.6g\n", double(v[0]), double(v[1]), double(v[2]));
        out += line;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(line, sizeof line, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out += line;
    }
    return out;
}

Mesh import_obj(const std::string& text) {
    Mesh mesh;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag == "#") continue;
        if (tag == "v") {
            std::array<float, 3> v;
            if (!(ls >> v[0] >> v[1] >> v[2]))
                throw FormatError("OBJ line " + std::to_string(lineno) + ": bad vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> t;
            if (!(ls >> t[0] >> t[1] >> t[2]))
                throw FormatError("OBJ line " + std::to_string(lineno) + ": bad face");
            for (int& i : t) {
                if (i < 1 || i > int(mesh.vertices.size()))
                    throw FormatError("OBJ line " + std::to_string(lineno) + ": face index out of range");
                --i;
            }
            mesh.triangles.push_back(t);
        }
    }
    return mesh;
}

namespace {

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

[[noreturn]] void imfg_fail(size_t at, const std::string& why) {
    throw FormatError("IMFG at byte " + std::to_string(at) + ": " + why);
}

}  // namespace

std::vector<uint8_t> save_imfg(const FieldGrid& f) {
    std::vector<uint8_t> out;
    out.reserve(10 + f.values.size() * 4);
    for (char c : {'I', 'M', 'F', 'G'}) out.push_back(uint8_t(c));
    out.push_back(1);
    out.push_back(uint8_t(f.dims));
    put_u32le(out, uint32_t(f.m));
    for (float v : f.values) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32le(out, bits);
    }
    return out;
}

FieldGrid load_imfg(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 10) imfg_fail(bytes.size(), "truncated header");
    if (std::memcmp(bytes.data(), "IMFG", 4) != 0) imfg_fail(0, "bad magic");
    if (bytes[4] != 1) imfg_fail(4, "unsupported version " + std::to_string(bytes[4]));
    FieldGrid f;
    f.dims = bytes[5];
    if (f.dims != 2 && f.dims != 3) imfg_fail(5, "dims must be 2 or 3");
    uint32_t m = 0;
    for (int i = 0; i < 4; ++i) m |= uint32_t(bytes[6 + i]) << (8 * i);
    if (m < 2 || m > 4096) imfg_fail(6, "bad resolution " + std::to_string(m));
    f.m = int(m);
    const size_t need = 10 + size_t(f.cell_count()) * 4;
    if (bytes.size() != need)
        imfg_fail(bytes.size(), "expected " + std::to_string(need) + " bytes total");
    f.values.resize(size_t(f.cell_count()));
    for (size_t i = 0; i < f.values.size(); ++i) {
        uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= uint32_t(bytes[10 + i * 4 + b]) << (8 * b);
        std::memcpy(&f.values[i], &bits, 4);
    }
    return f;
}

void save_imfg_file(const FieldGrid& f, const std::string& path) { write_file(path, save_imfg(f)); }

FieldGrid load_imfg_file(const std::string& path) {
    try {
        return load_imfg(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace imfield
