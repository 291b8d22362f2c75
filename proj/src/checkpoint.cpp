#include "imfield/checkpoint.hpp"

#include <cstring>
#include <filesystem>

#include "imfield/voxel.hpp"

namespace imfield {
namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

[[noreturn]] void imck_fail(size_t at, const std::string& why) {
    throw FormatError("IMCK at byte " + std::to_string(at) + ": " + why);
}

struct Reader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    void need(size_t count, const char* what) {
        if (pos + count > bytes.size()) imck_fail(pos, std::string("truncated ") + what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

}  // namespace

const Tensor<float>& Checkpoint::at(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw ContractError("checkpoint has no array '" + name + "'");
    return it->second;
}

std::vector<uint8_t> save_imck(const Checkpoint& c) {
    std::vector<uint8_t> out = {'I', 'M', 'C', 'K'};
    put_u32(out, 1);
    put_u32(out, uint32_t(c.arrays.size()));
    for (const auto& [name, t] : c.arrays) {
        if (name.empty()) throw ContractError("checkpoint array with empty name");
        put_u32(out, uint32_t(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, uint32_t(t.shape.size()));
        for (int d : t.shape) {
            if (d <= 0) throw ShapeError("checkpoint array '" + name + "' has dim " + std::to_string(d));
            put_u32(out, uint32_t(d));
        }
        for (float v : t.data) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    }
    put_u32(out, c.meta.stage);
    put_u32(out, c.meta.epoch);
    put_u64(out, c.meta.seed);
    return out;
}

Checkpoint load_imck(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), "IMCK", 4) != 0) imck_fail(0, "bad magic");
    r.pos = 4;
    uint32_t version = r.u32("version");
    if (version != 1) imck_fail(4, "unsupported version " + std::to_string(version));
    uint32_t count = r.u32("array count");

    Checkpoint c;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32("name length");
        if (name_len == 0 || name_len > 4096) imck_fail(r.pos - 4, "implausible name length");
        r.need(name_len, "name");
        std::string name(bytes.begin() + long(r.pos), bytes.begin() + long(r.pos + name_len));
        r.pos += name_len;

        uint32_t rank = r.u32("rank");
        if (rank == 0 || rank > 8) imck_fail(r.pos - 4, "implausible rank for '" + name + "'");
        std::vector<int> shape(rank);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            uint32_t dim = r.u32("dim");
            if (dim == 0 || dim > (1u << 28)) imck_fail(r.pos - 4, "implausible dim for '" + name + "'");
            shape[d] = int(dim);
            numel *= dim;
        }
        if (numel > (int64_t(1) << 30)) imck_fail(r.pos, "array '" + name + "' too large");

        std::vector<float> data(static_cast<size_t>(numel));
        for (int64_t e = 0; e < numel; ++e) {
            uint32_t bits = r.u32("payload");
            std::memcpy(&data[size_t(e)], &bits, 4);
        }
        if (!c.arrays.emplace(name, Tensor<float>(std::move(shape), std::move(data))).second)
            imck_fail(r.pos, "duplicate array '" + name + "'");
    }

    c.meta.stage = r.u32("stage");
    c.meta.epoch = r.u32("epoch");
    c.meta.seed = r.u64("seed");
    if (r.pos != bytes.size()) imck_fail(r.pos, "trailing bytes");
    return c;
}

void save_imck_file(const Checkpoint& c, const std::string& path) {
    const std::string tmp = path + ".tmp";
    write_file(tmp, save_imck(c));
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

Checkpoint load_imck_file(const std::string& path) {
    try {
        return load_imck(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

Checkpoint checkpoint_from_store(const ParamStore& store, CheckpointMeta meta) {
    Checkpoint c;
    c.meta = meta;
    for (const auto& e : store.entries()) {
        c.arrays.emplace(e.name, e.value);
        c.arrays.emplace("opt.m." + e.name, e.m);
        c.arrays.emplace("opt.v." + e.name, e.v);
    }
    c.arrays.emplace("opt.step", Tensor<float>::scalar(float(store.step())));
    return c;
}

ParamStore store_from_checkpoint(const Checkpoint& c, AdamConfig adam) {
    ParamStore store(adam);
    bool any = false;
    for (const auto& [name, t] : c.arrays) {
        // Parameters are exactly the arrays carrying optimizer state; other
        // arrays (embedded metadata, code tables, frozen copies) are payload.
        if (name.rfind("opt.", 0) == 0) continue;
        if (!c.has("opt.m." + name) || !c.has("opt.v." + name)) continue;
        auto& entry = store.add(name, t);
        entry.m = c.at("opt.m." + name);
        entry.v = c.at("opt.v." + name);
        if (!entry.m.same_shape(t) || !entry.v.same_shape(t))
            throw ShapeError("optimizer moments for '" + name + "' do not match the value shape");
        any = true;
    }
    if (any) store.set_step(int64_t(c.at("opt.step").data.at(0)));
    return store;
}

}  // namespace imfield
