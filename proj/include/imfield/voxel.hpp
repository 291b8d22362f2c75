#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "imfield/common.hpp"

namespace imfield {

// Binary occupancy over the unit square/cube. Voxel (i,j,k) covers the cell
// with center ((i+0.5)/n, (j+0.5)/n, (k+0.5)/n); index x fastest, then y,
// then z. Immutable after construction by convention.
struct VoxelGrid {
    int dims = 3;  // 2 or 3
    int n = 0;     // per-axis resolution
    std::vector<uint8_t> occ;

    static VoxelGrid empty(int dims, int n);

    int64_t cell_count() const { return dims == 3 ? int64_t(n) * n * n : int64_t(n) * n; }
    int64_t index(int x, int y, int z = 0) const {
        return (int64_t(z) * (dims == 3 ? n : 1) + y) * n + x;
    }
    bool at(int x, int y, int z = 0) const { return occ[index(x, y, z)] != 0; }
    void set(int x, int y, int z, bool v) { occ[index(x, y, z)] = v ? 1 : 0; }

    int64_t occupied_count() const;
    double occupied_fraction() const { return double(occupied_count()) / double(cell_count()); }
    double center(int i) const { return (i + 0.5) / n; }
};

// Analytic solids in unit-cube coordinates. In 2D the z components are
// ignored (sphere -> disc, box -> rectangle, torus -> annulus).
struct Sphere {
    std::array<double, 3> center;
    double radius;
};
struct Box {
    std::array<double, 3> center;
    std::array<double, 3> half;
};
struct Cylinder {
    std::array<double, 3> center;
    int axis;  // 0,1,2
    double radius;
    double half_height;
};
struct Torus {
    std::array<double, 3> center;
    int axis;
    double major;  // ring radius
    double minor;  // tube radius
};
using Primitive = std::variant<Sphere, Box, Cylinder, Torus>;

struct ShapeSpec {
    int dims = 3;
    std::vector<Primitive> parts;  // union of primitives

    bool contains(const std::array<double, 3>& p) const;
    // Checks the closed-solid margin: the shape must lie inside
    // [0.05, 0.95]^dims. Throws ContractError when violated.
    void validate() const;
};

// Occupancy at voxel centers. n must be one of {16, 32, 64, 128}.
VoxelGrid rasterize(const ShapeSpec& spec, int n);

// Parent voxel occupied iff at least half of its children are (ties round
// up): >=4 of 8 in 3D, >=2 of 4 in 2D.
VoxelGrid downsample(const VoxelGrid& g);

// Nearest-neighbor resample to a new resolution (used when feeding coarse
// progressive-stage grids to a fixed-resolution encoder).
VoxelGrid resample_nearest(const VoxelGrid& g, int n);

// IMVX container: "IMVX", u8 version=1, u8 dims, dims x u32 resolution
// (little-endian), then bit-packed occupancy, x fastest then y then z,
// MSB-first within each byte.
std::vector<uint8_t> save_imvx(const VoxelGrid& g);
VoxelGrid load_imvx(const std::vector<uint8_t>& bytes);
void save_imvx_file(const VoxelGrid& g, const std::string& path);
VoxelGrid load_imvx_file(const std::string& path);

// Binary PGM ("P5", maxval 255, square power-of-two side). A pixel is
// occupied iff its gray value >= threshold. Row 0 of the image maps to y=0.
VoxelGrid load_pgm(const std::vector<uint8_t>& bytes, int threshold = 128);
VoxelGrid load_pgm_file(const std::string& path, int threshold = 128);
std::vector<uint8_t> save_pgm(const std::vector<float>& gray, int side);  // values in [0,1]

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<uint8_t>& bytes);
void write_file(const std::string& path, const std::string& text);

}  // namespace imfield
