#include "ifmlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

namespace ifm {

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoFailure("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bytes;
}

std::vector<uint8_t> maybe_gunzip(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b) return bytes;
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw IoFailure("inflateInit failed");
    std::vector<uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::vector<uint8_t> buf(1 << 16);
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw TruncatedPayload("gzip stream corrupt or truncated");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

static uint32_t read_be32(const std::vector<uint8_t>& b, size_t off) {
    if (off + 4 > b.size()) throw TruncatedPayload("IDX header truncated");
    return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
           uint32_t(b[off + 3]);
}

LabeledImageSet parse_idx(const std::vector<uint8_t>& image_bytes,
                          const std::vector<uint8_t>& label_bytes) {
    const std::vector<uint8_t> img = maybe_gunzip(image_bytes);
    const std::vector<uint8_t> lab = maybe_gunzip(label_bytes);

    if (read_be32(img, 0) != 0x00000803u) throw BadMagic("image file magic != 0x00000803");
    if (read_be32(lab, 0) != 0x00000801u) throw BadMagic("label file magic != 0x00000801");

    LabeledImageSet out;
    out.count = read_be32(img, 4);
    out.rows = read_be32(img, 8);
    out.cols = read_be32(img, 12);
    const uint64_t need = 16 + uint64_t(out.count) * out.rows * out.cols;
    if (img.size() < need) throw TruncatedPayload("image payload shorter than declared");

    const int64_t label_count = read_be32(lab, 4);
    if (lab.size() < 8 + uint64_t(label_count)) throw TruncatedPayload("label payload shorter than declared");
    if (label_count != out.count) throw DimensionMismatch("image and label counts differ");

    out.pixels.assign(img.begin() + 16, img.begin() + static_cast<int64_t>(need));
    out.labels.assign(lab.begin() + 8, lab.begin() + 8 + label_count);
    for (uint8_t l : out.labels)
        if (l > 9) throw BadLabel("label outside 0..9");
    return out;
}

LabeledImageSet load_idx_files(const std::string& image_path, const std::string& label_path) {
    return parse_idx(read_file_bytes(image_path), read_file_bytes(label_path));
}

TextureBank build_texture_bank_procedural(uint64_t seed) {
    TextureBank bank;
    bank.source_kind = TextureSource::Procedural;
    bank.seed = seed;
    const int64_t size = 64;
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < 10; ++k) {
        TextureImage& t = bank.textures[static_cast<size_t>(k)];
        t.h = t.w = size;
        t.pixels.resize(static_cast<size_t>(size * size));
        Rng rng(mix_seed(seed, 0x7E, k));
        const double theta = k * 18.0 * pi / 180.0;
        const double period = 3.0 + k;
        const double fx = std::cos(theta) / period, fy = std::sin(theta) / period;
        for (int64_t y = 0; y < size; ++y) {
            for (int64_t x = 0; x < size; ++x) {
                double g = std::sin(2.0 * pi * (x * fx + y * fy));
                int v = g > 0.0 ? 180 : 60;
                v += static_cast<int>(rng.uniform_int(-20, 20));
                t.pixels[static_cast<size_t>(y * size + x)] =
                    static_cast<uint8_t>(std::clamp(v, 0, 255));
            }
        }
        bank.provenance.push_back("procedural");
    }
    return bank;
}

// Minimal binary PGM (P5) / PPM (P6) reader; color converts by luma weights.
static TextureImage load_pnm_gray(const std::string& path) {
    std::vector<uint8_t> b;
    try {
        b = read_file_bytes(path);
    } catch (const IoFailure&) {
        throw UnreadableImage("cannot read " + path);
    }
    size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < b.size() && (std::isspace(b[pos]) || b[pos] == '#')) {
            if (b[pos] == '#')
                while (pos < b.size() && b[pos] != '\n') ++pos;
            else
                ++pos;
        }
        std::string t;
        while (pos < b.size() && !std::isspace(b[pos])) t.push_back(static_cast<char>(b[pos++]));
        return t;
    };
    std::string magic = token();
    if (magic != "P5" && magic != "P6") throw UnreadableImage("unsupported image format: " + path);
    const bool color = magic == "P6";
    int64_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoll(token());
        h = std::stoll(token());
        maxval = std::stoll(token());
    } catch (...) {
        throw UnreadableImage("bad PNM header: " + path);
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw UnreadableImage("bad PNM dims: " + path);
    ++pos;  // single whitespace after maxval
    const size_t need = static_cast<size_t>(w * h) * (color ? 3 : 1);
    if (b.size() < pos + need) throw UnreadableImage("PNM payload truncated: " + path);
    TextureImage img;
    img.w = w;
    img.h = h;
    img.pixels.resize(static_cast<size_t>(w * h));
    if (!color) {
        std::memcpy(img.pixels.data(), b.data() + pos, need);
    } else {
        for (size_t i = 0; i < static_cast<size_t>(w * h); ++i) {
            const uint8_t* p = b.data() + pos + 3 * i;
            double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            img.pixels[i] = static_cast<uint8_t>(std::lround(std::clamp(y, 0.0, 255.0)));
        }
    }
    return img;
}

TextureBank build_texture_bank_external(const std::string& directory, uint64_t seed) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    if (fs::is_directory(directory)) {
        for (const auto& e : fs::directory_iterator(directory)) {
            if (!e.is_regular_file()) continue;
            std::string ext = e.path().extension().string();
            for (auto& c : ext) c = static_cast<char>(std::tolower(c));
            if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(e.path().string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.size() < 10)
        throw InsufficientTextures("need at least 10 texture images, found " +
                                   std::to_string(files.size()));
    Rng rng(mix_seed(seed, 0x5E1));
    for (size_t i = files.size() - 1; i > 0; --i)
        std::swap(files[i], files[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)))]);

    TextureBank bank;
    bank.source_kind = TextureSource::ExternalDirectory;
    bank.seed = seed;
    for (int k = 0; k < 10; ++k) {
        TextureImage img = load_pnm_gray(files[static_cast<size_t>(k)]);
        if (img.h < kPatch || img.w < kPatch)
            throw TextureTooSmall(files[static_cast<size_t>(k)] + " smaller than 32x32");
        bank.textures[static_cast<size_t>(k)] = std::move(img);
        bank.provenance.push_back(fs::path(files[static_cast<size_t>(k)]).filename().string());
    }
    return bank;
}

Patch crop_texture(const TextureBank& bank, int texture_id, Rng& rng) {
    const TextureImage& t = bank.textures.at(static_cast<size_t>(texture_id));
    if (t.h < kPatch || t.w < kPatch) throw TextureTooSmall("texture smaller than 32x32");
    const int64_t top = rng.uniform_int(0, t.h - kPatch);
    const int64_t left = rng.uniform_int(0, t.w - kPatch);
    Patch out;
    for (int64_t i = 0; i < kPatch; ++i)
        std::memcpy(out.data() + i * kPatch, t.pixels.data() + (top + i) * t.w + left, kPatch);
    return out;
}

Patch composite(const uint8_t* digit28, const Patch& patch) {
    Patch out = patch;
    for (int64_t i = 0; i < 28; ++i) {
        for (int64_t j = 0; j < 28; ++j) {
            uint8_t d = digit28[i * 28 + j];
            if (d >= kForegroundThreshold) out[(i + 2) * kPatch + (j + 2)] = d;
        }
    }
    return out;
}

namespace {

enum SplitId : uint64_t { kTrainSplit = 0, kValSplit = 1, kTestSplit = 2 };

ShiftedExample make_example(const LabeledImageSet& src, int64_t src_idx, const TextureBank& bank,
                            uint64_t seed, uint64_t split_id, int64_t example_idx, bool biased) {
    Rng rng(mix_seed(seed, split_id, static_cast<uint64_t>(example_idx)));
    ShiftedExample ex;
    ex.digit_label = src.labels[static_cast<size_t>(src_idx)];
    ex.texture_label =
        biased ? ex.digit_label : static_cast<uint8_t>(rng.uniform_int(0, 9));
    Patch patch = crop_texture(bank, ex.texture_label, rng);
    Patch img = composite(src.image(src_idx), patch);
    std::copy(img.begin(), img.end(), ex.image.begin());
    return ex;
}

}  // namespace

DatasetBundle build_splits(const LabeledImageSet& digits_train, const LabeledImageSet& digits_test,
                           const TextureBank& bank, uint64_t seed) {
    if (digits_train.count == 0 || digits_test.count == 0)
        throw EmptySource("digit source is empty");
    if (digits_train.rows != 28 || digits_train.cols != 28)
        throw DimensionMismatch("digit images must be 28x28");

    std::vector<int64_t> order(static_cast<size_t>(digits_train.count));
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
    Rng shuf(mix_seed(seed, 0x5F));
    for (size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<size_t>(shuf.uniform_int(0, static_cast<int64_t>(i)))]);

    const int64_t val_count = static_cast<int64_t>(
        std::llround(static_cast<double>(digits_train.count) / 5.0));

    DatasetBundle bundle;
    bundle.val.reserve(static_cast<size_t>(val_count));
    bundle.train.reserve(order.size() - static_cast<size_t>(val_count));
    for (int64_t p = 0; p < val_count; ++p)
        bundle.val.push_back(make_example(digits_train, order[static_cast<size_t>(p)], bank, seed,
                                          kValSplit, p, false));
    for (int64_t p = val_count; p < digits_train.count; ++p)
        bundle.train.push_back(make_example(digits_train, order[static_cast<size_t>(p)], bank, seed,
                                            kTrainSplit, p - val_count, true));
    bundle.test.reserve(static_cast<size_t>(digits_test.count));
    for (int64_t p = 0; p < digits_test.count; ++p)
        bundle.test.push_back(make_example(digits_test, p, bank, seed, kTestSplit, p, false));

    bundle.manifest.seed = seed;
    bundle.manifest.source_kind =
        bank.source_kind == TextureSource::Procedural ? "procedural" : "external_directory";
    bundle.manifest.texture_provenance = bank.provenance;
    bundle.manifest.train_size = static_cast<int64_t>(bundle.train.size());
    bundle.manifest.val_size = static_cast<int64_t>(bundle.val.size());
    bundle.manifest.test_size = static_cast<int64_t>(bundle.test.size());
    return bundle;
}

}  // namespace ifm
