#include "ifmlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "ifmlab/errors.hpp"

namespace ifm {

namespace {

constexpr char kMagic[4] = {'I', 'F', 'M', 'C'};
constexpr uint8_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

}  // namespace

void save_checkpoint(const CheckpointState& state, const std::string& path) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kVersion);
    put_u32(out, static_cast<uint32_t>(state.meta_json.size()));
    out.insert(out.end(), state.meta_json.begin(), state.meta_json.end());
    put_u32(out, static_cast<uint32_t>(state.arrays.size()));
    for (const NamedArray& a : state.arrays) {
        const uint16_t nl = static_cast<uint16_t>(a.name.size());
        out.push_back(static_cast<uint8_t>(nl));
        out.push_back(static_cast<uint8_t>(nl >> 8));
        out.insert(out.end(), a.name.begin(), a.name.end());
        out.push_back(static_cast<uint8_t>(a.dims.size()));
        for (int64_t d : a.dims) put_u32(out, static_cast<uint32_t>(d));
        const size_t bytes = a.data.size() * sizeof(float);
        const size_t off = out.size();
        out.resize(off + bytes);
        std::memcpy(out.data() + off, a.data.data(), bytes);
    }
    const uint32_t crc = static_cast<uint32_t>(crc32(0, out.data() + 4, static_cast<uInt>(out.size() - 4)));
    put_u32(out, crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoFailure("write failed: " + path);
}

CheckpointState load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open " + path);
    std::vector<uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (b.size() < 13 || std::memcmp(b.data(), kMagic, 4) != 0)
        throw VersionMismatch("not a checkpoint file: " + path);
    if (b[4] != kVersion) throw VersionMismatch("unsupported checkpoint version");
    const uint32_t stored = get_u32(b.data() + b.size() - 4);
    const uint32_t actual =
        static_cast<uint32_t>(crc32(0, b.data() + 4, static_cast<uInt>(b.size() - 8)));
    if (stored != actual) throw ChecksumMismatch("checkpoint CRC mismatch: " + path);

    size_t pos = 5;
    auto need = [&](size_t n) {
        if (pos + n > b.size() - 4) throw ChecksumMismatch("checkpoint truncated: " + path);
    };
    CheckpointState state;
    need(4);
    const uint32_t meta_len = get_u32(b.data() + pos);
    pos += 4;
    need(meta_len);
    state.meta_json.assign(b.begin() + static_cast<int64_t>(pos),
                           b.begin() + static_cast<int64_t>(pos + meta_len));
    pos += meta_len;
    need(4);
    const uint32_t count = get_u32(b.data() + pos);
    pos += 4;
    state.arrays.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedArray& a = state.arrays[i];
        need(2);
        const uint16_t nl = static_cast<uint16_t>(b[pos] | (b[pos + 1] << 8));
        pos += 2;
        need(nl);
        a.name.assign(b.begin() + static_cast<int64_t>(pos), b.begin() + static_cast<int64_t>(pos + nl));
        pos += nl;
        need(1);
        const uint8_t nd = b[pos++];
        int64_t total = 1;
        for (uint8_t d = 0; d < nd; ++d) {
            need(4);
            int64_t dim = get_u32(b.data() + pos);
            pos += 4;
            a.dims.push_back(dim);
            total *= dim;
        }
        need(static_cast<size_t>(total) * sizeof(float));
        a.data.resize(static_cast<size_t>(total));
        std::memcpy(a.data.data(), b.data() + pos, static_cast<size_t>(total) * sizeof(float));
        pos += static_cast<size_t>(total) * sizeof(float);
    }
    return state;
}

CheckpointState snapshot_arrays(std::vector<ParamRef<float>> refs, const std::string& meta_json) {
    CheckpointState state;
    state.meta_json = meta_json;
    for (const auto& r : refs) {
        NamedArray a;
        a.name = r.name;
        for (int d = 0; d < r.value->ndim; ++d) a.dims.push_back(r.value->dims[static_cast<size_t>(d)]);
        a.data.assign(r.value->data.begin(), r.value->data.end());
        state.arrays.push_back(std::move(a));
    }
    return state;
}

void restore_arrays(std::vector<ParamRef<float>> refs, const CheckpointState& state) {
    for (const auto& r : refs) {
        const NamedArray* found = nullptr;
        for (const NamedArray& a : state.arrays)
            if (a.name == r.name) {
                found = &a;
                break;
            }
        if (!found) throw VersionMismatch("checkpoint missing array " + r.name);
        int64_t total = 1;
        for (int64_t d : found->dims) total *= d;
        if (total != r.value->size()) throw VersionMismatch("shape mismatch for " + r.name);
        std::copy(found->data.begin(), found->data.end(), r.value->data.begin());
    }
}

}  // namespace ifm
