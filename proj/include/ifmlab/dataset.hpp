#pragma once

// shiftedMNIST construction: digit images composited onto texture backgrounds
// where the texture class equals the digit class on every training example but
// is drawn independently on validation/test. Includes IDX ingestion, the
// texture bank (external directory or procedural gratings), the split file
// format and the build manifest.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace ifm {

struct LabeledImageSet {
    int64_t count = 0;
    int64_t rows = 0, cols = 0;
    std::vector<uint8_t> pixels;  // count * rows * cols, row-major
    std::vector<uint8_t> labels;  // count, values 0..9

    const uint8_t* image(int64_t i) const { return pixels.data() + i * rows * cols; }
};

// Parses an IDX image file and an IDX label file (raw or gzip) and zips them.
LabeledImageSet parse_idx(const std::vector<uint8_t>& image_bytes,
                          const std::vector<uint8_t>& label_bytes);
LabeledImageSet load_idx_files(const std::string& image_path, const std::string& label_path);
std::vector<uint8_t> read_file_bytes(const std::string& path);
std::vector<uint8_t> maybe_gunzip(const std::vector<uint8_t>& bytes);

enum class TextureSource { ExternalDirectory, Procedural };

struct TextureImage {
    int64_t h = 0, w = 0;
    std::vector<uint8_t> pixels;
};

struct TextureBank {
    TextureSource source_kind = TextureSource::Procedural;
    uint64_t seed = 0;
    std::array<TextureImage, 10> textures;       // index == texture class
    std::vector<std::string> provenance;         // file names, or "procedural"
};

// Ten deterministic gratings: texture k is a thresholded sinusoid at
// orientation k*18 degrees with spatial period 3+k px plus seeded uniform
// noise of amplitude 20.
TextureBank build_texture_bank_procedural(uint64_t seed);

// Selects 10 distinct images from a directory by seeded shuffle (PGM/PPM,
// converted to grayscale by standard luma weights).
TextureBank build_texture_bank_external(const std::string& directory, uint64_t seed);

constexpr int kPatch = 32;
using Patch = std::array<uint8_t, kPatch * kPatch>;

// Uniformly random 32x32 crop over all valid top-left corners.
Patch crop_texture(const TextureBank& bank, int texture_id, Rng& rng);

// Zero-pads the 28x28 digit by 2 px per side; output pixel keeps the digit
// intensity where the padded digit is >= 77, otherwise the patch pixel.
Patch composite(const uint8_t* digit28, const Patch& patch);
constexpr uint8_t kForegroundThreshold = 77;

struct ShiftedExample {
    std::array<uint8_t, 1024> image;  // 32x32
    uint8_t digit_label = 0;
    uint8_t texture_label = 0;
    bool operator==(const ShiftedExample&) const = default;
};

using Split = std::vector<ShiftedExample>;

struct DatasetManifest {
    uint64_t seed = 0;
    std::string source_kind;  // "procedural" or "external_directory"
    std::string digit_source; // "idx" or "synthetic"
    std::vector<std::string> texture_provenance;
    int64_t train_size = 0, val_size = 0, test_size = 0;
    int format_version = 1;
};

struct DatasetBundle {
    Split train, val, test;
    DatasetManifest manifest;
};

// Seeded partition of the digit source into 4/5 train and 1/5 val
// (|val| = round(count/5)), texture class forced equal to the digit class on
// train and drawn uniformly at random on val/test. Every example derives its
// own generator state from (seed, split id, example index).
DatasetBundle build_splits(const LabeledImageSet& digits_train, const LabeledImageSet& digits_test,
                           const TextureBank& bank, uint64_t seed);

// Split file format "SMN1" (see README): 17-byte header, 1026-byte records,
// trailing CRC32 of the record region.
uint64_t write_split(const Split& split, const std::string& path);
Split read_split(const std::string& path);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Deterministic synthetic handwritten digits (stroke skeletons with
// per-example jitter), the offline stand-in for the MNIST IDX files.
LabeledImageSet make_synthetic_digits(int64_t count, uint64_t seed);

}  // namespace ifm
