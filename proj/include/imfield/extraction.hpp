#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "imfield/decoder.hpp"

namespace imfield {

// Field values sampled at cell centers ((i+0.5)/m, ...), x fastest then y
// then z. The sampling resolution m is independent of any training grid.
struct FieldGrid {
    int dims = 3;
    int m = 0;
    std::vector<float> values;

    int64_t cell_count() const { return dims == 3 ? int64_t(m) * m * m : int64_t(m) * m; }
    int64_t index(int x, int y, int z = 0) const {
        return (int64_t(z) * (dims == 3 ? m : 1) + y) * m + x;
    }
    float at(int x, int y, int z = 0) const { return values[size_t(index(x, y, z))]; }
    double center(int i) const { return (i + 0.5) / m; }
};

// Occupancy as a 0/1 field (ground-truth meshes, IoU rasters).
FieldGrid field_from_grid(const VoxelGrid& g);

// Threshold a field back to occupancy: cell occupied iff value > k.
VoxelGrid grid_from_field(const FieldGrid& f, float k = 0.5f);

// Batched decoder evaluation over the full m^D center lattice.
FieldGrid sample_field(const ParamStore& store, const DecoderArch& arch,
                       const std::vector<float>& z, int m);

struct Mesh {
    std::vector<std::array<float, 3>> vertices;
    std::vector<std::array<int, 3>> triangles;  // CCW from outside
};

// Classic 256-case Marching Cubes over lattice cells spanning adjacent
// sample centers; a corner is inside iff value > k. Samples equal to k are
// perturbed by +1e-6 first. Vertices on shared edges are merged, so the
// result is watertight whenever no perturbed value equals k.
Mesh marching_cubes(const FieldGrid& f, float k = 0.5f);

struct MeshStats {
    int64_t vertex_count = 0;
    int64_t edge_count = 0;
    int64_t triangle_count = 0;
    int64_t euler = 0;  // V - E + F
    bool watertight = false;
    double signed_volume = 0.0;  // positive when normals point outward
};
MeshStats mesh_stats(const Mesh& mesh);

// A closed contour; the final point connects back to the first. Runs
// counter-clockwise around inside regions (positive shoelace area).
using Loop = std::vector<std::array<float, 2>>;

// 16-case Marching Squares; the two ambiguous saddles are resolved by the
// cell-center average.
std::vector<Loop> marching_squares(const FieldGrid& f, float k = 0.5f);
double loop_signed_area(const Loop& loop);

// ASCII Wavefront: `v x y z` then `f a b c` (1-based), 6 significant digits.
std::string export_obj(const Mesh& mesh);
Mesh import_obj(const std::string& text);

// IMFG dump: "IMFG", u8 version=1, u8 dims, u32 m, then f32 values,
// little-endian.
std::vector<uint8_t> save_imfg(const FieldGrid& f);
FieldGrid load_imfg(const std::vector<uint8_t>& bytes);
void save_imfg_file(const FieldGrid& f, const std::string& path);
FieldGrid load_imfg_file(const std::string& path);

namespace detail {
extern const int mc_edge_table[256];
extern const int mc_tri_table[256][16];
}  // namespace detail

}  // namespace imfield
