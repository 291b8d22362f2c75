#pragma once

#include <string>
#include <vector>

#include "imfield/voxel.hpp"

namespace imfield {

struct DatasetEntry {
    int id = 0;
    std::string stem;  // files are <dir>/<stem>_r<res>.imvx
    bool train = true;
};

struct Dataset {
    std::string dir;
    int dims = 3;
    std::vector<int> resolutions;
    std::vector<DatasetEntry> entries;

    std::vector<int> split_ids(bool train) const;
    std::string grid_path(int id, int res) const;
    const DatasetEntry& entry(int id) const;
};

// Procedural corpus: index cycles sphere, box, cylinder, torus, two-sphere
// union, with seeded parameter jitter. Every spec satisfies the solid margin
// invariant.
ShapeSpec corpus_shape(int index, int dims, uint64_t seed);

// Rasterizes `count` corpus shapes at every resolution into `dir` and writes
// manifest.txt, one `<id> <stem> <split>` line per shape. The first 80% of
// ids form the train split. Deterministic: same arguments, same bytes.
void generate_dataset(const std::string& dir, int dims, int count, uint64_t seed,
                      const std::vector<int>& resolutions);

Dataset load_dataset(const std::string& dir);
VoxelGrid load_dataset_grid(const Dataset& ds, int id, int res);

}  // namespace imfield
