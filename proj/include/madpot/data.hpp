#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "madpot/matrix.hpp"
#include "madpot/rng.hpp"

namespace madpot {

// Synthetic benchmark: smooth noisy backgrounds, bright elliptic blobs as
// anomalies with exact pixel masks.
struct SyntheticSpec {
    int image_side = 64;
    int blur_passes = 3;
    int blur_radius = 2;
    int blob_count_min = 1;
    int blob_count_max = 3;
    double blob_radius_min = 4.0;
    double blob_radius_max = 10.0;
    double blob_intensity_min = 0.4;
    double blob_intensity_max = 0.7;
    double noise_amplitude = 0.3;
};

struct Sample {
    Matrix image;               // values in [0, 1]
    int label = 1;              // 1 normal, 0 abnormal
    std::optional<Matrix> mask; // binary; all-zero for normal samples
};

struct ManifestRecord {
    std::string image_path;  // relative to the manifest's directory
    std::optional<std::string> mask_path;
    int label = 1;
};

struct Manifest {
    std::vector<ManifestRecord> records;
};

// Writes out_dir/images/NNNN.pgm (+ masks/NNNN.pgm unless with_masks=false)
// and out_dir/manifest.jsonl; byte-identical for identical (spec, counts, seed).
Manifest generate_dataset(const SyntheticSpec& spec, int n_normal, int n_abnormal,
                          std::uint64_t seed, const std::filesystem::path& out_dir,
                          bool with_masks);

// Binary 8-bit PGM (P5, maxval 255); values map to v/255 on read.
Matrix read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Matrix& image);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Loads every record; mask values are thresholded to {0, 1}.
std::vector<Sample> load_samples(const std::filesystem::path& manifest_path);

// in-memory generation (shared by generate_dataset and tests)
Matrix synth_normal_image(const SyntheticSpec& spec, SplitMix64& rng);
struct BlobResult {
    Matrix image;
    Matrix mask;
};
BlobResult synth_abnormal_image(const SyntheticSpec& spec, SplitMix64& rng);

}  // namespace madpot
