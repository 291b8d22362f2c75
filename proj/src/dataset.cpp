#include "imfield/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

namespace imfield {
namespace {

std::string stem_for(int id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "shape_%03d", id);
    return buf;
}

}  // namespace

std::vector<int> Dataset::split_ids(bool train) const {
    std::vector<int> out;
    for (const auto& e : entries)
        if (e.train == train) out.push_back(e.id);
    return out;
}

std::string Dataset::grid_path(int id, int res) const {
    return dir + "/" + entry(id).stem + "_r" + std::to_string(res) + ".imvx";
}

const DatasetEntry& Dataset::entry(int id) const {
    for (const auto& e : entries)
        if (e.id == id) return e;
    throw ContractError("dataset has no shape id " + std::to_string(id));
}

ShapeSpec corpus_shape(int index, int dims, uint64_t seed) {
    if (index < 0) throw ContractError("corpus_shape: negative index");
    Rng rng = Rng(seed).child(uint64_t(index), 0xd5u);
    auto jitter = [&](double amount) {
        return std::array<double, 3>{0.5 + rng.uniform(-amount, amount),
                                     0.5 + rng.uniform(-amount, amount),
                                     dims == 3 ? 0.5 + rng.uniform(-amount, amount) : 0.5};
    };
    const int axis = dims == 2 ? 2 : int(rng.uniform_int(3));

    ShapeSpec spec;
    spec.dims = dims;
    switch (index % 5) {
        case 0:
            spec.parts = {Sphere{jitter(0.04), 0.22 + rng.uniform(0.0, 0.10)}};
            break;
        case 1:
            spec.parts = {Box{jitter(0.04),
                              {0.14 + rng.uniform(0.0, 0.10), 0.14 + rng.uniform(0.0, 0.10),
                               0.14 + rng.uniform(0.0, 0.10)}}};
            break;
        case 2:
            spec.parts = {Cylinder{jitter(0.04), axis, 0.13 + rng.uniform(0.0, 0.08),
                                   0.18 + rng.uniform(0.0, 0.10)}};
            break;
        case 3:
            spec.parts = {Torus{jitter(0.03), axis, 0.20 + rng.uniform(0.0, 0.07),
                                0.06 + rng.uniform(0.0, 0.04)}};
            break;
        default: {
            // Overlapping sphere pair: center gap 2*off < sum of radii.
            const std::array<double, 3> c = jitter(0.02);
            const double off = rng.uniform(0.10, 0.14);
            std::array<double, 3> a = c, b = c;
            a[size_t(axis == 2 && dims == 2 ? 0 : axis)] -= off;
            b[size_t(axis == 2 && dims == 2 ? 0 : axis)] += off;
            spec.parts = {Sphere{a, 0.15 + rng.uniform(0.0, 0.04)},
                          Sphere{b, 0.15 + rng.uniform(0.0, 0.04)}};
            break;
        }
    }
    spec.validate();
    return spec;
}

void generate_dataset(const std::string& dir, int dims, int count, uint64_t seed,
                      const std::vector<int>& resolutions) {
    if (count < 1) throw ContractError("generate_dataset: count must be positive");
    if (resolutions.empty()) throw ContractError("generate_dataset: no resolutions");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

    const int train_count = count * 4 / 5;
    std::ostringstream manifest;
    for (int id = 0; id < count; ++id) {
        const ShapeSpec spec = corpus_shape(id, dims, seed);
        const std::string stem = stem_for(id);
        for (int res : resolutions)
            save_imvx_file(rasterize(spec, res), dir + "/" + stem + "_r" + std::to_string(res) + ".imvx");
        manifest << id << " " << stem << " " << (id < train_count ? "train" : "test") << "\n";
    }
    write_file(dir + "/manifest.txt", manifest.str());
}

Dataset load_dataset(const std::string& dir) {
    const std::string manifest_path = dir + "/manifest.txt";
    const std::vector<uint8_t> bytes = read_file(manifest_path);

    Dataset ds;
    ds.dir = dir;
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        DatasetEntry e;
        std::string split;
        if (!(ls >> e.id >> e.stem >> split) || (split != "train" && split != "test"))
            throw FormatError(manifest_path + " line " + std::to_string(lineno) +
                              ": expected '<id> <stem> <split>', got '" + line + "'");
        e.train = split == "train";
        ds.entries.push_back(std::move(e));
    }
    if (ds.entries.empty()) throw FormatError(manifest_path + ": no entries");

    for (int res : {8, 16, 32, 64, 128})
        if (std::filesystem::exists(ds.grid_path(ds.entries.front().id, res)))
            ds.resolutions.push_back(res);
    if (ds.resolutions.empty())
        throw FormatError(manifest_path + ": no IMVX grids found for '" + ds.entries.front().stem + "'");
    ds.dims = load_imvx_file(ds.grid_path(ds.entries.front().id, ds.resolutions.front())).dims;
    return ds;
}

VoxelGrid load_dataset_grid(const Dataset& ds, int id, int res) {
    const std::string path = ds.grid_path(id, res);
    if (!std::filesystem::exists(path))
        throw IoError("dataset grid missing: " + path +
                      " (regenerate the dataset with this resolution included)");
    return load_imvx_file(path);
}

}  // namespace imfield
