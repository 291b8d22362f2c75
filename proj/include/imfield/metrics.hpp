#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "imfield/extraction.hpp"
#include "imfield/voxel.hpp"

namespace imfield {

using PointCloud = std::vector<std::array<float, 3>>;

// Mean squared occupancy difference; grids enter as 0/1 floats, fields with
// their raw values.
double voxel_mse(const VoxelGrid& a, const VoxelGrid& b);
double voxel_mse(const VoxelGrid& a, const FieldGrid& b);

// Intersection over union; two empty grids count as identical (1.0).
double iou(const VoxelGrid& a, const VoxelGrid& b);

// Symmetric squared chamfer distance:
// mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2. Nearest neighbors run on a
// uniform grid with ring expansion, which is exact, not approximate.
double chamfer(const PointCloud& a, const PointCloud& b);

// count points drawn uniformly (with replacement) from the mesh vertex list.
PointCloud sample_vertices(const Mesh& mesh, int count, uint64_t seed);

// Silhouette-based shape descriptor: 10 fixed orthographic views (6 axis
// aligned, 4 cube diagonals), each rendered as a supersampled 64^2 soft
// silhouette and summarized by 17 features: normalized area, perimeter^2
// (in view-width units), 7 centered moment invariants (the reflection
// sensitive one folded by absolute value), and 8 centroid-anchored contour
// Fourier magnitudes.
struct SilhouetteDescriptor {
    static constexpr int view_count = 10;
    static constexpr int feature_count = 17;
    std::array<std::array<float, feature_count>, view_count> views{};
};

SilhouetteDescriptor lfd_lite(const VoxelGrid& g);
SilhouetteDescriptor lfd_lite(const Mesh& mesh);

// Minimum over the 24 axis-aligned rotations (realized as view permutations)
// of the summed per-view L1 feature distance. Symmetric; 0 for identical
// shapes.
double lfd_lite_distance(const SilhouetteDescriptor& a, const SilhouetteDescriptor& b);

// Fraction of `test` that is the nearest test-set element of at least one
// sample.
template <class T, class Dist>
double coverage(const std::vector<T>& samples, const std::vector<T>& test, Dist&& dist) {
    if (samples.empty() || test.empty()) throw ContractError("coverage: empty set");
    std::vector<char> marked(test.size(), 0);
    for (const T& a : samples) {
        size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t g = 0; g < test.size(); ++g) {
            const double d = dist(a, test[g]);
            if (d < best_d) {
                best_d = d;
                best = g;
            }
        }
        marked[best] = 1;
    }
    double covered = 0;
    for (char m : marked) covered += m;
    return covered / double(test.size());
}

// Mean over `test` of the distance to its closest sample.
template <class T, class Dist>
double mmd(const std::vector<T>& test, const std::vector<T>& samples, Dist&& dist) {
    if (samples.empty() || test.empty()) throw ContractError("mmd: empty set");
    double sum = 0.0;
    for (const T& g : test) {
        double best = std::numeric_limits<double>::infinity();
        for (const T& a : samples) best = std::min(best, double(dist(g, a)));
        sum += best;
    }
    return sum / double(test.size());
}

}  // namespace imfield
