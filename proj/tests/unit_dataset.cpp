#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "ifmlab/dataset.hpp"
#include "test_support.hpp"

using namespace ifm;
namespace ts = testsupport;

TEST_CASE("parse_idx zips images and labels") {
    const uint32_t n = 7;
    std::vector<uint8_t> pixels(n * 28 * 28);
    for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<uint8_t>(i % 251);
    std::vector<uint8_t> labels;
    for (uint32_t i = 0; i < n; ++i) labels.push_back(static_cast<uint8_t>(i % 10));

    auto set = parse_idx(ts::make_idx_images(n, 28, 28, pixels), ts::make_idx_labels(labels));
    CHECK(set.count == n);
    CHECK(set.rows == 28);
    CHECK(set.cols == 28);
    CHECK(set.labels == labels);
    CHECK(std::equal(pixels.begin(), pixels.end(), set.pixels.begin()));
}

TEST_CASE("parse_idx accepts gzip-compressed files") {
    const uint32_t n = 3;
    std::vector<uint8_t> pixels(n * 28 * 28, 42);
    std::vector<uint8_t> labels{1, 2, 3};
    auto set = parse_idx(ts::gzip_bytes(ts::make_idx_images(n, 28, 28, pixels)),
                         ts::gzip_bytes(ts::make_idx_labels(labels)));
    CHECK(set.count == 3);
    CHECK(set.labels == labels);
}

TEST_CASE("parse_idx empty files give an empty set") {
    auto set = parse_idx(ts::make_idx_images(0, 28, 28, {}), ts::make_idx_labels({}));
    CHECK(set.count == 0);
}

TEST_CASE("parse_idx error paths") {
    std::vector<uint8_t> pixels(50 * 28 * 28, 1);
    auto good_images = ts::make_idx_images(50, 28, 28, pixels);
    auto good_labels = ts::make_idx_labels(std::vector<uint8_t>(50, 4));

    SUBCASE("wrong image magic") {
        auto bad = good_images;
        bad[3] = 0x01;  // label magic in an image slot
        CHECK_THROWS_AS(parse_idx(bad, good_labels), BadMagic);
    }
    SUBCASE("declares more items than payload") {
        auto bad = ts::make_idx_images(100, 28, 28, pixels);  // only 50 items of pixels
        CHECK_THROWS_AS(parse_idx(bad, good_labels), TruncatedPayload);
    }
    SUBCASE("image and label counts differ") {
        auto labels49 = ts::make_idx_labels(std::vector<uint8_t>(49, 4));
        CHECK_THROWS_AS(parse_idx(good_images, labels49), DimensionMismatch);
    }
}

TEST_CASE("procedural texture bank is deterministic and diverse") {
    TextureBank a = build_texture_bank_procedural(7);
    TextureBank b = build_texture_bank_procedural(7);
    for (int k = 0; k < 10; ++k) {
        REQUIRE(a.textures[k].h >= 32);
        REQUIRE(a.textures[k].w >= 32);
        CHECK(a.textures[k].pixels == b.textures[k].pixels);
    }
    // mean absolute difference between texture 0 and texture 5 exceeds 10
    // gray levels (computed over the generated images)
    double sum = 0;
    for (size_t i = 0; i < a.textures[0].pixels.size(); ++i)
        sum += std::abs(int(a.textures[0].pixels[i]) - int(a.textures[5].pixels[i]));
    CHECK(sum / a.textures[0].pixels.size() > 10.0);

    TextureBank c = build_texture_bank_procedural(8);
    CHECK(a.textures[0].pixels != c.textures[0].pixels);
}

TEST_CASE("external texture bank requires ten readable images") {
    ts::TempDir dir;
    // nine tiny valid PGMs
    for (int i = 0; i < 9; ++i) {
        std::ofstream f(dir.file("t" + std::to_string(i) + ".pgm"), std::ios::binary);
        f << "P5\n40 40\n255\n";
        std::vector<char> px(1600, static_cast<char>(i * 20));
        f.write(px.data(), px.size());
    }
    CHECK_THROWS_AS(build_texture_bank_external(dir.path.string(), 1), InsufficientTextures);

    std::ofstream f(dir.file("t9.pgm"), std::ios::binary);
    f << "P5\n40 40\n255\n";
    std::vector<char> px(1600, 99);
    f.write(px.data(), px.size());
    f.close();
    TextureBank bank = build_texture_bank_external(dir.path.string(), 1);
    CHECK(bank.provenance.size() == 10);
    CHECK(bank.source_kind == TextureSource::ExternalDirectory);
}

TEST_CASE("crop_texture covers all corners uniformly") {
    TextureBank bank = build_texture_bank_procedural(3);

    SUBCASE("32x32 texture has a single crop equal to itself") {
        TextureBank tiny = bank;
        tiny.textures[0].h = tiny.textures[0].w = 32;
        tiny.textures[0].pixels.assign(32 * 32, 0);
        for (size_t i = 0; i < tiny.textures[0].pixels.size(); ++i)
            tiny.textures[0].pixels[i] = static_cast<uint8_t>(i % 256);
        Rng rng(5);
        Patch p = crop_texture(tiny, 0, rng);
        CHECK(std::equal(p.begin(), p.end(), tiny.textures[0].pixels.begin()));
    }
    SUBCASE("fixed rng gives identical crops") {
        Rng r1(11), r2(11);
        CHECK(crop_texture(bank, 4, r1) == crop_texture(bank, 4, r2));
    }
    SUBCASE("too small texture throws") {
        TextureBank tiny = bank;
        tiny.textures[2].h = 31;
        Rng rng(5);
        CHECK_THROWS_AS(crop_texture(tiny, 2, rng), TextureTooSmall);
    }
    SUBCASE("corner distribution is uniform over the 33x33 grid") {
        // 64x64 source with random pixels; each corner is identified by the
        // 3-byte signature (p[0,0], p[0,1], p[1,0]) of its crop.
        TextureBank marked = bank;
        marked.textures[0].h = marked.textures[0].w = 64;
        marked.textures[0].pixels.resize(64 * 64);
        std::mt19937 gen(1234);
        for (auto& px : marked.textures[0].pixels) px = static_cast<uint8_t>(gen() & 0xFF);
        auto signature = [&](int64_t top, int64_t left) {
            const auto& p = marked.textures[0].pixels;
            return (uint32_t(p[top * 64 + left]) << 16) | (uint32_t(p[top * 64 + left + 1]) << 8) |
                   uint32_t(p[(top + 1) * 64 + left]);
        };
        std::map<uint32_t, int64_t> corner_of;
        bool unique = true;
        for (int64_t t = 0; t < 33; ++t)
            for (int64_t l = 0; l < 33; ++l) {
                auto [it, fresh] = corner_of.emplace(signature(t, l), t * 33 + l);
                unique = unique && fresh;
            }
        REQUIRE(unique);

        Rng rng(777);
        std::vector<int64_t> counts(33 * 33, 0);
        for (int trial = 0; trial < 10000; ++trial) {
            Patch p = crop_texture(marked, 0, rng);
            const uint32_t sig =
                (uint32_t(p[0]) << 16) | (uint32_t(p[1]) << 8) | uint32_t(p[32]);
            auto it = corner_of.find(sig);
            REQUIRE(it != corner_of.end());
            counts[static_cast<size_t>(it->second)]++;
        }
        double stat = ts::uniform_histogram_chi_square(counts);
        CHECK(stat < ts::chi_square_quantile(0.99, 33.0 * 33.0 - 1.0));
    }
}

TEST_CASE("composite applies the threshold mask") {
    TextureBank bank = build_texture_bank_procedural(2);
    Rng rng(9);
    Patch patch = crop_texture(bank, 1, rng);

    SUBCASE("all-zero digit leaves the patch untouched") {
        std::vector<uint8_t> digit(784, 0);
        Patch out = composite(digit.data(), patch);
        CHECK(out == patch);
    }
    SUBCASE("all-255 digit keeps a 2 px patch border") {
        std::vector<uint8_t> digit(784, 255);
        Patch out = composite(digit.data(), patch);
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j) {
                const bool interior = i >= 2 && i < 30 && j >= 2 && j < 30;
                if (interior)
                    CHECK(out[i * 32 + j] == 255);
                else
                    CHECK(out[i * 32 + j] == patch[i * 32 + j]);
            }
    }
    SUBCASE("foreground pixel count equals pixels over the threshold") {
        LabeledImageSet digits = make_synthetic_digits(4, 31);
        const uint8_t* one = digits.image(2);
        int64_t over = 0;
        for (int i = 0; i < 784; ++i)
            if (one[i] >= kForegroundThreshold) ++over;
        // checkerboard patch so digit and patch values never collide
        Patch cb;
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j) cb[i * 32 + j] = ((i + j) % 2) ? 7 : 11;
        Patch out = composite(one, cb);
        int64_t changed = 0;
        for (int i = 0; i < 1024; ++i)
            if (out[i] != cb[i]) ++changed;
        CHECK(changed == over);
        // mask law: every output pixel is either the padded digit or the patch
        for (int i = 0; i < 32; ++i)
            for (int j = 0; j < 32; ++j) {
                uint8_t padded = 0;
                if (i >= 2 && i < 30 && j >= 2 && j < 30) padded = one[(i - 2) * 28 + (j - 2)];
                if (padded >= kForegroundThreshold)
                    CHECK(out[i * 32 + j] == padded);
                else
                    CHECK(out[i * 32 + j] == cb[i * 32 + j]);
            }
    }
}

TEST_CASE("build_splits partitions and labels correctly") {
    LabeledImageSet train = make_synthetic_digits(1000, 5);
    LabeledImageSet test = make_synthetic_digits(300, 6);
    TextureBank bank = build_texture_bank_procedural(1);
    DatasetBundle bundle = build_splits(train, test, bank, 42);

    CHECK(bundle.train.size() == 800);
    CHECK(bundle.val.size() == 200);  // round(1000/5)
    CHECK(bundle.test.size() == 300);

    for (const auto& ex : bundle.train) CHECK(ex.texture_label == ex.digit_label);

    // determinism: identical seed, bit-identical bundle
    DatasetBundle again = build_splits(train, test, bank, 42);
    CHECK(bundle.train == again.train);
    CHECK(bundle.val == again.val);
    CHECK(bundle.test == again.test);

    DatasetBundle other = build_splits(train, test, bank, 43);
    CHECK(bundle.train != other.train);

    SUBCASE("empty source throws") {
        LabeledImageSet empty;
        empty.rows = empty.cols = 28;
        CHECK_THROWS_AS(build_splits(empty, test, bank, 1), EmptySource);
    }
}

TEST_CASE("val texture labels are independent of digit labels") {
    LabeledImageSet train = make_synthetic_digits(12000, 15);
    LabeledImageSet test = make_synthetic_digits(100, 16);
    TextureBank bank = build_texture_bank_procedural(2);
    DatasetBundle bundle = build_splits(train, test, bank, 99);
    REQUIRE(bundle.val.size() == 2400);

    int64_t coincide = 0;
    std::vector<std::vector<int64_t>> table(10, std::vector<int64_t>(10, 0));
    for (const auto& ex : bundle.val) {
        if (ex.digit_label == ex.texture_label) ++coincide;
        table[ex.digit_label][ex.texture_label]++;
    }
    const double frac = static_cast<double>(coincide) / static_cast<double>(bundle.val.size());
    CHECK(frac > 0.07);
    CHECK(frac < 0.13);
    CHECK(ts::contingency_chi_square(table) < ts::chi_square_quantile(0.99, 81));
}

TEST_CASE("split files round-trip") {
    ts::TempDir dir;

    SUBCASE("empty split") {
        Split empty;
        const uint64_t bytes = write_split(empty, dir.file("e.smn1"));
        CHECK(bytes == 17 + 4);  // header plus trailing checksum
        CHECK(read_split(dir.file("e.smn1")).empty());
    }
    SUBCASE("single zero example") {
        ShiftedExample ex{};
        ex.image.fill(0);
        ex.digit_label = 3;
        ex.texture_label = 7;
        const uint64_t bytes = write_split({ex}, dir.file("one.smn1"));
        CHECK(bytes == 17 + 1026 + 4);
        Split back = read_split(dir.file("one.smn1"));
        REQUIRE(back.size() == 1);
        CHECK(back[0] == ex);
    }
    SUBCASE("seeded random split round-trips bit-exactly") {
        Rng rng(77);
        Split split(257);
        for (auto& ex : split) {
            for (auto& px : ex.image) px = static_cast<uint8_t>(rng.uniform_int(0, 255));
            ex.digit_label = static_cast<uint8_t>(rng.uniform_int(0, 9));
            ex.texture_label = static_cast<uint8_t>(rng.uniform_int(0, 9));
        }
        write_split(split, dir.file("r.smn1"));
        CHECK(read_split(dir.file("r.smn1")) == split);
        // identical input produces byte-identical files
        write_split(split, dir.file("r2.smn1"));
        CHECK(read_file_bytes(dir.file("r.smn1")) == read_file_bytes(dir.file("r2.smn1")));
    }
    SUBCASE("corruption is detected") {
        ShiftedExample ex{};
        ex.image.fill(9);
        write_split({ex}, dir.file("c.smn1"));
        auto bytes = read_file_bytes(dir.file("c.smn1"));
        bytes[40] ^= 0xFF;
        std::ofstream f(dir.file("c.smn1"), std::ios::binary | std::ios::trunc);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        f.close();
        CHECK_THROWS_AS(read_split(dir.file("c.smn1")), ChecksumMismatch);
    }
    SUBCASE("bad header is rejected") {
        std::ofstream f(dir.file("bad.smn1"), std::ios::binary);
        f << "NOPE" << std::string(20, '\0');
        f.close();
        CHECK_THROWS_AS(read_split(dir.file("bad.smn1")), BadHeader);
    }
}

TEST_CASE("manifest round-trips") {
    ts::TempDir dir;
    DatasetManifest m;
    m.seed = 123;
    m.source_kind = "procedural";
    m.digit_source = "synthetic";
    m.texture_provenance = {"procedural", "procedural"};
    m.train_size = 800;
    m.val_size = 200;
    m.test_size = 300;
    write_manifest(m, dir.file("manifest.json"));
    DatasetManifest back = read_manifest(dir.file("manifest.json"));
    CHECK(back.seed == m.seed);
    CHECK(back.source_kind == m.source_kind);
    CHECK(back.digit_source == m.digit_source);
    CHECK(back.train_size == m.train_size);
    CHECK(back.val_size == m.val_size);
    CHECK(back.test_size == m.test_size);
}

TEST_CASE("synthetic digits are deterministic and class-balanced enough") {
    LabeledImageSet a = make_synthetic_digits(500, 11);
    LabeledImageSet b = make_synthetic_digits(500, 11);
    CHECK(a.pixels == b.pixels);
    CHECK(a.labels == b.labels);
    std::array<int, 10> counts{};
    for (uint8_t l : a.labels) counts[l]++;
    for (int k = 0; k < 10; ++k) CHECK(counts[k] > 20);
    // glyphs have a sensible amount of ink
    for (int i = 0; i < 10; ++i) {
        int64_t ink = 0;
        for (int p = 0; p < 784; ++p)
            if (a.image(i)[p] >= kForegroundThreshold) ++ink;
        CHECK(ink > 30);
        CHECK(ink < 400);
    }
}
