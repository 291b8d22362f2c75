#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "imfield/metrics.hpp"

using namespace imfield;

namespace {

double chamfer_naive(const PointCloud& a, const PointCloud& b) {
    auto one_way = [](const PointCloud& from, const PointCloud& to) {
        double sum = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) {
                const double dx = double(p[0]) - q[0], dy = double(p[1]) - q[1],
                             dz = double(p[2]) - q[2];
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            sum += best;
        }
        return sum / double(from.size());
    };
    return one_way(a, b) + one_way(b, a);
}

VoxelGrid sphere_grid(int n, std::array<double, 3> c = {0.5, 0.5, 0.5}, double r = 0.3) {
    return rasterize(ShapeSpec{3, {Sphere{c, r}}}, n);
}

VoxelGrid box_grid(int n) {
    return rasterize(ShapeSpec{3, {Box{{0.5, 0.5, 0.5}, {0.3, 0.3, 0.3}}}}, n);
}

double descriptor_norm(const SilhouetteDescriptor& d) {
    double s = 0.0;
    for (const auto& view : d.views)
        for (float f : view) s += std::abs(double(f));
    return s;
}

}  // namespace

TEST_CASE("voxel mse basics") {
    VoxelGrid a = sphere_grid(16);
    CHECK(voxel_mse(a, a) == 0.0);

    VoxelGrid full = VoxelGrid::empty(3, 16), empty = VoxelGrid::empty(3, 16);
    std::fill(full.occ.begin(), full.occ.end(), uint8_t(1));
    CHECK(voxel_mse(full, empty) == 1.0);

    VoxelGrid one = empty;
    one.set(3, 7, 11, true);
    CHECK(voxel_mse(one, empty) == doctest::Approx(1.0 / 4096.0));

    CHECK(voxel_mse(a, field_from_grid(a)) == 0.0);
    FieldGrid f = field_from_grid(empty);
    f.values[size_t(f.index(3, 7, 11))] = 0.5f;
    CHECK(voxel_mse(empty, f) == doctest::Approx(0.25 / 4096.0));

    CHECK_THROWS_AS(voxel_mse(a, VoxelGrid::empty(3, 32)), ShapeError);
    CHECK_THROWS_AS(voxel_mse(a, VoxelGrid::empty(2, 16)), ShapeError);
}

TEST_CASE("iou basics and the half-overlap hand case") {
    VoxelGrid a = sphere_grid(16);
    CHECK(iou(a, a) == 1.0);

    VoxelGrid left = VoxelGrid::empty(3, 16), right = VoxelGrid::empty(3, 16);
    for (int z = 4; z < 12; ++z)
        for (int y = 4; y < 12; ++y) {
            for (int x = 0; x < 8; ++x) left.set(x, y, z, true);
            for (int x = 8; x < 16; ++x) right.set(x, y, z, true);
        }
    CHECK(iou(left, right) == 0.0);

    // Boxes x in [0,8) and x in [4,12): overlap is half of each, union 12
    // columns, intersection 4.
    VoxelGrid mid = VoxelGrid::empty(3, 16);
    for (int z = 4; z < 12; ++z)
        for (int y = 4; y < 12; ++y)
            for (int x = 4; x < 12; ++x) mid.set(x, y, z, true);
    CHECK(iou(left, mid) == doctest::Approx(1.0 / 3.0));

    CHECK(iou(VoxelGrid::empty(3, 8), VoxelGrid::empty(3, 8)) == 1.0);
    CHECK_THROWS_AS(iou(a, VoxelGrid::empty(3, 32)), ShapeError);
}

TEST_CASE("chamfer basics") {
    PointCloud a = {{0, 0, 0}};
    PointCloud b = {{1, 0, 0}};
    CHECK(chamfer(a, a) == 0.0);
    CHECK(chamfer(a, b) == doctest::Approx(2.0));

    CHECK_THROWS_AS(chamfer(a, PointCloud{}), ContractError);
    CHECK_THROWS_AS(chamfer(PointCloud{}, b), ContractError);
}

TEST_CASE("grid-accelerated chamfer equals the brute-force oracle exactly") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const int na = 1 + int(rng.uniform_int(100)), nb = 1 + int(rng.uniform_int(100));
        PointCloud a, b;
        for (int i = 0; i < na; ++i)
            a.push_back({float(rng.uniform()), float(rng.uniform()), float(rng.uniform())});
        for (int i = 0; i < nb; ++i)
            b.push_back({float(rng.uniform()), float(rng.uniform()), float(rng.uniform())});
        // A few clumped points stress the ring expansion.
        if (trial % 3 == 0)
            for (int i = 0; i < 5 && i < na; ++i) a[size_t(i)] = {0.001f, 0.001f, 0.001f};
        const double fast = chamfer(a, b);
        const double slow = chamfer_naive(a, b);
        CHECK(fast == slow);
        CHECK(chamfer(b, a) == fast);
    }
}

TEST_CASE("coverage and mmd hand cases") {
    using P = double;
    auto dist = [](P x, P y) { return std::abs(x - y); };

    std::vector<P> test_set = {0.0, 10.0};
    std::vector<P> samples = {1.0, 2.0, 3.0};
    CHECK(coverage(samples, test_set, dist) == doctest::Approx(0.5));
    CHECK(mmd(test_set, samples, dist) == doctest::Approx(4.0));

    std::vector<P> same = {0.0, 10.0};
    CHECK(coverage(same, test_set, dist) == doctest::Approx(1.0));
    CHECK(mmd(test_set, same, dist) == doctest::Approx(0.0));

    std::vector<P> one = {0.5};
    CHECK(coverage(one, test_set, dist) == doctest::Approx(0.5));

    CHECK_THROWS_AS(coverage(std::vector<P>{}, test_set, dist), ContractError);
    CHECK_THROWS_AS(mmd(test_set, std::vector<P>{}, dist), ContractError);

    // Growing the sample set can only improve (weakly) the matching.
    std::vector<P> small = {4.0}, big = {4.0, 9.0};
    CHECK(mmd(test_set, big, dist) <= mmd(test_set, small, dist));
}

TEST_CASE("sample_vertices is seeded and draws actual vertices") {
    Mesh mesh = marching_cubes(field_from_grid(sphere_grid(16)), 0.5f);
    PointCloud p1 = sample_vertices(mesh, 256, 9);
    PointCloud p2 = sample_vertices(mesh, 256, 9);
    PointCloud p3 = sample_vertices(mesh, 256, 10);
    CHECK(p1 == p2);
    CHECK(p1 != p3);
    CHECK(p1.size() == 256);
    for (const auto& p : p1) {
        bool is_vertex = false;
        for (const auto& v : mesh.vertices) is_vertex = is_vertex || v == p;
        CHECK(is_vertex);
    }
    CHECK_THROWS_AS(sample_vertices(Mesh{}, 16, 0), ContractError);
    CHECK_THROWS_AS(sample_vertices(mesh, 0, 0), ContractError);
}

TEST_CASE("lfd distance is zero for identical shapes and symmetric") {
    SilhouetteDescriptor ds = lfd_lite(sphere_grid(32));
    SilhouetteDescriptor db = lfd_lite(box_grid(32));
    CHECK(lfd_lite_distance(ds, ds) == 0.0);
    CHECK(lfd_lite_distance(ds, db) == doctest::Approx(lfd_lite_distance(db, ds)).epsilon(1e-12));
    CHECK(lfd_lite_distance(ds, db) > 0.0);
    for (const auto& view : ds.views)
        for (float f : view) CHECK(std::isfinite(f));
}

TEST_CASE("lfd separates sphere from cube far beyond re-rasterization noise") {
    SilhouetteDescriptor s64 = lfd_lite(sphere_grid(64));
    SilhouetteDescriptor s32 = lfd_lite(sphere_grid(32));
    SilhouetteDescriptor b64 = lfd_lite(box_grid(64));
    const double noise = lfd_lite_distance(s64, s32);
    const double signal = lfd_lite_distance(s64, b64);
    CAPTURE(noise);
    CAPTURE(signal);
    CHECK(signal > 10.0 * noise);
}

TEST_CASE("lfd is translation invariant for voxel shifts inside the margin") {
    const int n = 64;
    SilhouetteDescriptor base = lfd_lite(sphere_grid(n));
    SilhouetteDescriptor moved =
        lfd_lite(sphere_grid(n, {0.5 + 2.0 / n, 0.5 - 3.0 / n, 0.5 + 1.0 / n}));
    const double drift = lfd_lite_distance(base, moved);
    const double scale = descriptor_norm(base);
    CAPTURE(drift);
    CAPTURE(scale);
    CHECK(drift < 1e-3 * scale);
}

TEST_CASE("lfd is invariant under axis-aligned rotations of the grid") {
    // An offset two-part shape with no rotational symmetry of its own.
    ShapeSpec spec{3, {Sphere{{0.42, 0.5, 0.55}, 0.18}, Box{{0.62, 0.55, 0.45}, {0.12, 0.08, 0.1}}}};
    VoxelGrid g = rasterize(spec, 32);
    VoxelGrid rot = VoxelGrid::empty(3, 32);
    for (int z = 0; z < 32; ++z)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                rot.set(x, y, z, g.at(y, 31 - x, z));  // 90 degrees about z
    SilhouetteDescriptor da = lfd_lite(g);
    SilhouetteDescriptor db = lfd_lite(rot);
    const double d = lfd_lite_distance(da, db);
    const double scale = descriptor_norm(da);
    CAPTURE(d);
    CAPTURE(scale);
    // Axis views permute exactly; diagonal views re-rasterize the rotated
    // content, so the residual is quadrature noise, same as for translation.
    CHECK(d < 1e-3 * scale);
    // And the unrotated pair is clearly distinguishable from a plain sphere.
    CHECK(lfd_lite_distance(da, lfd_lite(sphere_grid(32))) > 1e-2 * scale);
}

TEST_CASE("lfd works on meshes and rejects empty shapes") {
    Mesh sphere_mesh = marching_cubes(field_from_grid(sphere_grid(32)), 0.5f);
    Mesh box_mesh = marching_cubes(field_from_grid(box_grid(32)), 0.5f);
    SilhouetteDescriptor ms = lfd_lite(sphere_mesh);
    SilhouetteDescriptor mb = lfd_lite(box_mesh);
    CHECK(lfd_lite_distance(ms, ms) == 0.0);
    CHECK(lfd_lite_distance(ms, mb) > 0.0);

    CHECK_THROWS_AS(lfd_lite(Mesh{}), ContractError);
    CHECK_THROWS_AS(lfd_lite(VoxelGrid::empty(3, 16)), ContractError);
    CHECK_THROWS_AS(lfd_lite(VoxelGrid::empty(2, 16)), ShapeError);
}
