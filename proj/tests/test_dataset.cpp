#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "imfield/dataset.hpp"

using namespace imfield;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* tag) {
        path = std::filesystem::temp_directory_path() /
               (std::string("imfield_ds_") + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("corpus shapes cycle the five primitive kinds deterministically") {
    CHECK(std::holds_alternative<Sphere>(corpus_shape(0, 3, 7).parts.at(0)));
    CHECK(std::holds_alternative<Box>(corpus_shape(1, 3, 7).parts.at(0)));
    CHECK(std::holds_alternative<Cylinder>(corpus_shape(2, 3, 7).parts.at(0)));
    CHECK(std::holds_alternative<Torus>(corpus_shape(3, 3, 7).parts.at(0)));
    CHECK(corpus_shape(4, 3, 7).parts.size() == 2);

    // Same arguments, same voxels; different index or seed, different shape.
    CHECK(rasterize(corpus_shape(3, 3, 7), 16).occ == rasterize(corpus_shape(3, 3, 7), 16).occ);
    CHECK(rasterize(corpus_shape(3, 3, 7), 16).occ != rasterize(corpus_shape(8, 3, 7), 16).occ);
    CHECK(rasterize(corpus_shape(3, 3, 7), 16).occ != rasterize(corpus_shape(3, 3, 8), 16).occ);
}

TEST_CASE("corpus shapes respect the margin invariant in 2d and 3d") {
    for (int dims : {2, 3})
        for (int i = 0; i < 25; ++i) {
            const ShapeSpec spec = corpus_shape(i, dims, 99);
            CHECK_NOTHROW(spec.validate());
            CHECK(rasterize(spec, 16).occupied_count() > 0);
        }
}

TEST_CASE("generate_dataset writes grids plus a manifest with the 80/20 split") {
    TempDir tmp("gen");
    generate_dataset(tmp.str(), 3, 10, 7, {16, 32});

    const Dataset ds = load_dataset(tmp.str());
    CHECK(ds.dims == 3);
    CHECK(ds.resolutions == std::vector<int>{16, 32});
    CHECK(ds.entries.size() == 10);
    CHECK(ds.split_ids(true) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(ds.split_ids(false) == std::vector<int>{8, 9});

    int files = 0;
    for (const auto& e : std::filesystem::directory_iterator(tmp.str()))
        files += e.path().extension() == ".imvx";
    CHECK(files == 20);

    const VoxelGrid g = load_dataset_grid(ds, 3, 32);
    CHECK(g.occ == rasterize(corpus_shape(3, 3, 7), 32).occ);
}

TEST_CASE("regeneration with the same seed is byte-identical") {
    TempDir a("rega"), b("regb");
    generate_dataset(a.str(), 3, 5, 11, {16});
    generate_dataset(b.str(), 3, 5, 11, {16});
    CHECK(read_file(a.str() + "/manifest.txt") == read_file(b.str() + "/manifest.txt"));
    CHECK(read_file(a.str() + "/shape_002_r16.imvx") == read_file(b.str() + "/shape_002_r16.imvx"));

    TempDir c("regc");
    generate_dataset(c.str(), 3, 5, 12, {16});
    CHECK(read_file(a.str() + "/shape_002_r16.imvx") != read_file(c.str() + "/shape_002_r16.imvx"));
}

TEST_CASE("dataset loading errors are actionable") {
    TempDir tmp("err");
    CHECK_THROWS_AS(load_dataset(tmp.str()), IoError);  // no manifest at all

    std::filesystem::create_directories(tmp.path);
    write_file(tmp.str() + "/manifest.txt", std::string("0 shape_000 train\n1 shape_001 banana\n"));
    CHECK_THROWS_WITH_AS(load_dataset(tmp.str()), doctest::Contains("line 2"), FormatError);

    generate_dataset(tmp.str(), 3, 2, 7, {16});
    const Dataset ds = load_dataset(tmp.str());
    CHECK_THROWS_WITH_AS(load_dataset_grid(ds, 0, 64), doctest::Contains("r64"), IoError);
    CHECK_THROWS_AS(ds.entry(99), ContractError);
}

TEST_CASE("a 2d corpus produces 2d grids") {
    TempDir tmp("flat");
    generate_dataset(tmp.str(), 2, 5, 7, {32});
    const Dataset ds = load_dataset(tmp.str());
    CHECK(ds.dims == 2);
    CHECK(load_dataset_grid(ds, 4, 32).dims == 2);
}
