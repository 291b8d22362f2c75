#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "imfield/tensor.hpp"
#include "imfield/voxel.hpp"

namespace imfield {

// One training sample for the field classifier: a point in the unit
// square/cube, its inside/outside label, and an importance weight that
// compensates for non-uniform sampling density.
struct SampledPoint {
    std::array<float, 3> p{0, 0, 0};
    uint8_t label = 0;
    float weight = 1.0f;
};

enum class SampleScheme : uint8_t { Naive = 0, SurfaceBiased = 1 };

struct SampledPointSet {
    int dims = 3;
    int n = 0;  // source grid resolution
    SampleScheme scheme = SampleScheme::Naive;
    std::vector<SampledPoint> points;

    double weight_total() const;
};

// Occupancy of the voxel containing p; p = 1.0 on an axis maps to the last
// voxel. Throws ContractError when p leaves the unit cube.
int label_point(const VoxelGrid& g, const std::array<double, 3>& p);

// One point per voxel center, weight 1. |points| = n^dims.
SampledPointSet sample_naive(const VoxelGrid& g);

// All voxels adjacent to an occupancy change (Chebyshev distance 1,
// 26-connectivity in 3D / 8 in 2D) get weight 1; far_budget of the remaining
// voxels are drawn uniformly without replacement with weight
// |far| / far_budget, so the weight total stays n^dims. A budget larger than
// the far set clamps to the whole far set with weight 1.
SampledPointSet sample_surface_biased(const VoxelGrid& g, int64_t far_budget, uint64_t seed);

// Weight given to each subsampled far point.
double far_weight(int64_t far_count, int64_t budget);

// Voxels with a differing neighbor within Chebyshev distance 1; mask over
// grid cells in index order. Exposed for tests and diagnostics.
std::vector<uint8_t> near_surface_mask(const VoxelGrid& g);

// IMPT cache: "IMPT", u8 version=1, u8 dims, u8 scheme, u8 zero, u32 n,
// u64 count, then count records of dims x f32 coords, u8 label, f32 weight,
// all little-endian.
std::vector<uint8_t> save_impt(const SampledPointSet& s);
SampledPointSet load_impt(const std::vector<uint8_t>& bytes);
void save_impt_file(const SampledPointSet& s, const std::string& path);
SampledPointSet load_impt_file(const std::string& path);

// Decoder-ready views: points [N x dims], labels and weights [N x 1].
struct PointBatch {
    Tensor<float> points;
    Tensor<float> labels;
    Tensor<float> weights;
};
PointBatch to_batch(const SampledPointSet& s);

}  // namespace imfield
