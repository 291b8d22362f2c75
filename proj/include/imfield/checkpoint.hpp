#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "imfield/params.hpp"
#include "imfield/tensor.hpp"

namespace imfield {

struct CheckpointMeta {
    uint32_t stage = 0;  // resolution reached (0 when not applicable)
    uint32_t epoch = 0;
    uint64_t seed = 0;
};

// Named f32 arrays plus a small trailing metadata block. Arrays are kept in
// a sorted map so serialization is deterministic.
struct Checkpoint {
    std::map<std::string, Tensor<float>> arrays;
    CheckpointMeta meta;

    bool has(const std::string& name) const { return arrays.count(name) != 0; }
    const Tensor<float>& at(const std::string& name) const;
};

// IMCK container: "IMCK", u32 version=1, u32 array count; per array u32 name
// length, UTF-8 name, u32 rank, u32 dims, f32 payload; then u32 stage,
// u32 epoch, u64 seed. All little-endian. load(save(x)) is byte-exact.
std::vector<uint8_t> save_imck(const Checkpoint& c);
Checkpoint load_imck(const std::vector<uint8_t>& bytes);

// File variants write to a temporary sibling and rename, so a crash never
// leaves a half-written checkpoint behind.
void save_imck_file(const Checkpoint& c, const std::string& path);
Checkpoint load_imck_file(const std::string& path);

// Parameter values go in under their own names; Adam moments under "opt.m."
// and "opt.v." prefixes, the shared step counter as the 1x1 array
// "opt.step". Round-tripping a store through these preserves training state
// exactly. Restoring treats only moment-bearing arrays as parameters;
// anything else in the file (embedded metadata, code tables, frozen network
// copies) is payload and stays out of the store.
Checkpoint checkpoint_from_store(const ParamStore& store, CheckpointMeta meta);
ParamStore store_from_checkpoint(const Checkpoint& c, AdamConfig adam = {});

}  // namespace imfield
