#include <cstring>
#include <fstream>

#include <zlib.h>

#include "ifmlab/dataset.hpp"
#include "json.hpp"

namespace ifm {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'N', '1'};
constexpr uint8_t kFormatVersion = 1;
constexpr size_t kHeaderBytes = 17;   // magic + version + count + height + width
constexpr size_t kRecordBytes = 1026; // digit + texture + 1024 pixels

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32le(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

}  // namespace

uint64_t write_split(const Split& split, const std::string& path) {
    std::vector<uint8_t> out;
    out.reserve(kHeaderBytes + split.size() * kRecordBytes + 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    out.push_back(kFormatVersion);
    put_u32le(out, static_cast<uint32_t>(split.size()));
    put_u32le(out, 32);
    put_u32le(out, 32);
    for (const ShiftedExample& ex : split) {
        out.push_back(ex.digit_label);
        out.push_back(ex.texture_label);
        out.insert(out.end(), ex.image.begin(), ex.image.end());
    }
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0, out.data() + kHeaderBytes, static_cast<uInt>(out.size() - kHeaderBytes)));
    put_u32le(out, crc);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoFailure("write failed: " + path);
    return out.size();
}

Split read_split(const std::string& path) {
    std::vector<uint8_t> b = read_file_bytes(path);
    if (b.size() < kHeaderBytes || std::memcmp(b.data(), kMagic, 4) != 0)
        throw BadHeader("not an SMN1 split file: " + path);
    if (b[4] != kFormatVersion) throw BadHeader("unsupported split format version");
    const uint32_t count = get_u32le(b.data() + 5);
    const uint32_t height = get_u32le(b.data() + 9);
    const uint32_t width = get_u32le(b.data() + 13);
    if (height != 32 || width != 32) throw BadHeader("unexpected record geometry");
    const size_t payload = static_cast<size_t>(count) * kRecordBytes;
    if (b.size() < kHeaderBytes + payload + 4)
        throw ChecksumMismatch("split file truncated: " + path);
    const uint32_t stored = get_u32le(b.data() + kHeaderBytes + payload);
    const uint32_t actual =
        static_cast<uint32_t>(crc32(0, b.data() + kHeaderBytes, static_cast<uInt>(payload)));
    if (stored != actual) throw ChecksumMismatch("split file CRC mismatch: " + path);

    Split split(count);
    const uint8_t* p = b.data() + kHeaderBytes;
    for (uint32_t i = 0; i < count; ++i) {
        split[i].digit_label = p[0];
        split[i].texture_label = p[1];
        std::memcpy(split[i].image.data(), p + 2, 1024);
        p += kRecordBytes;
    }
    return split;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    nlohmann::json j;
    j["seed"] = m.seed;
    j["source_kind"] = m.source_kind;
    j["digit_source"] = m.digit_source;
    j["texture_provenance"] = m.texture_provenance;
    j["split_sizes"] = {{"train", m.train_size}, {"val", m.val_size}, {"test", m.test_size}};
    j["format_version"] = m.format_version;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoFailure("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot open " + path);
    nlohmann::json j;
    f >> j;
    DatasetManifest m;
    m.seed = j.at("seed").get<uint64_t>();
    m.source_kind = j.at("source_kind").get<std::string>();
    m.digit_source = j.value("digit_source", std::string("idx"));
    m.texture_provenance = j.at("texture_provenance").get<std::vector<std::string>>();
    m.train_size = j.at("split_sizes").at("train").get<int64_t>();
    m.val_size = j.at("split_sizes").at("val").get<int64_t>();
    m.test_size = j.at("split_sizes").at("test").get<int64_t>();
    m.format_version = j.at("format_version").get<int>();
    return m;
}

}  // namespace ifm
