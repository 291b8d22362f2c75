#include "imfield/sampling.hpp"

#include <algorithm>
#include <cstring>

#include "imfield/common.hpp"

namespace imfield {

double SampledPointSet::weight_total() const {
    double s = 0;
    for (const auto& pt : points) s += pt.weight;
    return s;
}

int label_point(const VoxelGrid& g, const std::array<double, 3>& p) {
    auto cell = [&](double v, int axis) {
        if (v < 0.0 || v > 1.0)
            throw ContractError("label_point: coordinate " + std::to_string(v) + " on axis " +
                                std::to_string(axis) + " outside [0,1]");
        int i = int(v * g.n);
        return std::min(i, g.n - 1);
    };
    int x = cell(p[0], 0);
    int y = cell(p[1], 1);
    int z = g.dims == 3 ? cell(p[2], 2) : 0;
    return g.at(x, y, z) ? 1 : 0;
}

SampledPointSet sample_naive(const VoxelGrid& g) {
    SampledPointSet out;
    out.dims = g.dims;
    out.n = g.n;
    out.scheme = SampleScheme::Naive;
    out.points.reserve(size_t(g.cell_count()));
    int zmax = g.dims == 3 ? g.n : 1;
    for (int z = 0; z < zmax; ++z)
        for (int y = 0; y < g.n; ++y)
            for (int x = 0; x < g.n; ++x) {
                SampledPoint pt;
                pt.p = {float(g.center(x)), float(g.center(y)), g.dims == 3 ? float(g.center(z)) : 0.0f};
                pt.label = g.at(x, y, z) ? 1 : 0;
                pt.weight = 1.0f;
                out.points.push_back(pt);
            }
    return out;
}

std::vector<uint8_t> near_surface_mask(const VoxelGrid& g) {
    std::vector<uint8_t> near(size_t(g.cell_count()), 0);
    int zmax = g.dims == 3 ? g.n : 1;
    int zr = g.dims == 3 ? 1 : 0;
    for (int z = 0; z < zmax; ++z)
        for (int y = 0; y < g.n; ++y)
            for (int x = 0; x < g.n; ++x) {
                bool v = g.at(x, y, z);
                bool flip = false;
                for (int dz = -zr; dz <= zr && !flip; ++dz)
                    for (int dy = -1; dy <= 1 && !flip; ++dy)
                        for (int dx = -1; dx <= 1 && !flip; ++dx) {
                            int nx = x + dx, ny = y + dy, nz = z + dz;
                            if (nx < 0 || nx >= g.n || ny < 0 || ny >= g.n || nz < 0 || nz >= zmax)
                                continue;
                            if (g.at(nx, ny, nz) != v) flip = true;
                        }
                if (flip) near[size_t(g.index(x, y, z))] = 1;
            }
    return near;
}

double far_weight(int64_t far_count, int64_t budget) {
    if (budget >= far_count) return 1.0;
    return double(far_count) / double(budget);
}

SampledPointSet sample_surface_biased(const VoxelGrid& g, int64_t far_budget, uint64_t seed) {
    if (far_budget < 1) throw ContractError("sample_surface_biased: far_budget must be >= 1");
    int64_t occ = g.occupied_count();
    if (occ == 0 || occ == g.cell_count())
        throw ContractError("sample_surface_biased: grid must contain both occupied and empty voxels");

    std::vector<uint8_t> near = near_surface_mask(g);
    std::vector<int64_t> far;
    far.reserve(size_t(g.cell_count()));
    for (int64_t i = 0; i < g.cell_count(); ++i)
        if (!near[size_t(i)]) far.push_back(i);

    int64_t take = std::min<int64_t>(far_budget, int64_t(far.size()));
    float w_far = float(far_weight(int64_t(far.size()), take));

    Rng rng(seed);
    for (int64_t i = 0; i < take; ++i) {
        int64_t j = i + int64_t(rng.uniform_int(uint64_t(int64_t(far.size()) - i)));
        std::swap(far[size_t(i)], far[size_t(j)]);
    }
    far.resize(size_t(take));
    std::sort(far.begin(), far.end());

    SampledPointSet out;
    out.dims = g.dims;
    out.n = g.n;
    out.scheme = SampleScheme::SurfaceBiased;
    auto emit = [&](int64_t idx, float w) {
        int x = int(idx % g.n);
        int y = int((idx / g.n) % g.n);
        int z = g.dims == 3 ? int(idx / (int64_t(g.n) * g.n)) : 0;
        SampledPoint pt;
        pt.p = {float(g.center(x)), float(g.center(y)), g.dims == 3 ? float(g.center(z)) : 0.0f};
        pt.label = g.occ[size_t(idx)] ? 1 : 0;
        pt.weight = w;
        out.points.push_back(pt);
    };
    for (int64_t i = 0; i < g.cell_count(); ++i)
        if (near[size_t(i)]) emit(i, 1.0f);
    for (int64_t idx : far) emit(idx, w_far);
    return out;
}

namespace {

void put_u32le(std::vector<uint8_t>& v, uint32_t x) {
    for (int i = 0; i < 4; ++i) v.push_back(uint8_t(x >> (8 * i)));
}
void put_u64le(std::vector<uint8_t>& v, uint64_t x) {
    for (int i = 0; i < 8; ++i) v.push_back(uint8_t(x >> (8 * i)));
}
void put_f32le(std::vector<uint8_t>& v, float f) {
    uint32_t x;
    std::memcpy(&x, &f, 4);
    put_u32le(v, x);
}
uint32_t take_u32le(const std::vector<uint8_t>& v, size_t off) {
    uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= uint32_t(v[off + size_t(i)]) << (8 * i);
    return x;
}
uint64_t take_u64le(const std::vector<uint8_t>& v, size_t off) {
    uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= uint64_t(v[off + size_t(i)]) << (8 * i);
    return x;
}
float take_f32le(const std::vector<uint8_t>& v, size_t off) {
    uint32_t x = take_u32le(v, off);
    float f;
    std::memcpy(&f, &x, 4);
    return f;
}

}  // namespace

std::vector<uint8_t> save_impt(const SampledPointSet& s) {
    std::vector<uint8_t> out;
    size_t rec = size_t(s.dims) * 4 + 1 + 4;
    out.reserve(16 + rec * s.points.size());
    for (char c : {'I', 'M', 'P', 'T'}) out.push_back(uint8_t(c));
    out.push_back(1);
    out.push_back(uint8_t(s.dims));
    out.push_back(uint8_t(s.scheme));
    out.push_back(0);
    put_u32le(out, uint32_t(s.n));
    put_u64le(out, uint64_t(s.points.size()));
    for (const auto& pt : s.points) {
        for (int d = 0; d < s.dims; ++d) put_f32le(out, pt.p[size_t(d)]);
        out.push_back(pt.label);
        put_f32le(out, pt.weight);
    }
    return out;
}

SampledPointSet load_impt(const std::vector<uint8_t>& bytes) {
    auto fail = [](size_t off, const std::string& why) {
        throw FormatError("IMPT at byte " + std::to_string(off) + ": " + why);
    };
    if (bytes.size() < 20) fail(bytes.size(), "truncated header");
    if (std::memcmp(bytes.data(), "IMPT", 4) != 0) fail(0, "bad magic");
    if (bytes[4] != 1) fail(4, "unsupported version");
    SampledPointSet s;
    s.dims = bytes[5];
    if (s.dims != 2 && s.dims != 3) fail(5, "dims must be 2 or 3");
    if (bytes[6] > 1) fail(6, "unknown scheme tag");
    s.scheme = SampleScheme(bytes[6]);
    s.n = int(take_u32le(bytes, 8));
    uint64_t count = take_u64le(bytes, 12);
    size_t rec = size_t(s.dims) * 4 + 1 + 4;
    size_t need = 20 + rec * size_t(count);
    if (bytes.size() < need) fail(bytes.size(), "truncated records, need " + std::to_string(need));
    s.points.resize(size_t(count));
    size_t off = 20;
    for (auto& pt : s.points) {
        for (int d = 0; d < s.dims; ++d, off += 4) pt.p[size_t(d)] = take_f32le(bytes, off);
        pt.label = bytes[off++];
        pt.weight = take_f32le(bytes, off);
        off += 4;
    }
    return s;
}

void save_impt_file(const SampledPointSet& s, const std::string& path) { write_file(path, save_impt(s)); }

SampledPointSet load_impt_file(const std::string& path) { return load_impt(read_file(path)); }

PointBatch to_batch(const SampledPointSet& s) {
    int n = int(s.points.size());
    PointBatch b{Tensor<float>::zeros({n, s.dims}), Tensor<float>::zeros({n, 1}),
                 Tensor<float>::zeros({n, 1})};
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < s.dims; ++d) b.points.at(i, d) = s.points[size_t(i)].p[size_t(d)];
        b.labels.at(i, 0) = float(s.points[size_t(i)].label);
        b.weights.at(i, 0) = s.points[size_t(i)].weight;
    }
    return b;
}

}  // namespace imfield
