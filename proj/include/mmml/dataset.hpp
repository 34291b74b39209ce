#pragma once

// Dataset ingestion and synthetic data generation. A dataset on disk is a
// manifest (JSON) mapping set files to class labels, plus one plain-text
// matrix file per image set: n rows by d columns, one vectorized image per
// row. A manifest entry may also point at a directory of PGM frames, which
// are decoded, bilinearly resized to sqrt(d) x sqrt(d) grayscale, and
// vectorized in raster order.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmml/set_model.hpp"

namespace mmml {

struct ManifestEntry {
    std::string path;  // relative to the manifest's directory
    std::string label;
    std::string set_id;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int d = 0;
    std::string source_note;
};

DatasetManifest load_manifest(const std::filesystem::path& manifest_file);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& manifest_file);

// Text set file, n rows x d columns. Values written with 17 significant
// digits round-trip bit-exactly.
Eigen::MatrixXd read_set_file(const std::filesystem::path& file, int expected_d);
void write_set_file(const std::filesystem::path& file, const Eigen::MatrixXd& samples);

// All frames of a directory of .pgm images (P2 or P5), resized to
// side x side, one column per frame, filename order.
Eigen::MatrixXd read_pgm_set_dir(const std::filesystem::path& dir, int side);

// Loads every set in the manifest. normalize_pixels divides intensities by
// 255. Rejects sets with fewer than two images.
std::vector<ImageSet> ingest(const std::filesystem::path& root,
                             const DatasetManifest& manifest,
                             bool normalize_pixels = false);

enum class SynthPreset {
    Gaussian,  // class covariances drift apart with `separation`
    Mixed,     // half the classes differ in spectrum, half in subspace orientation
};

struct SynthSpec {
    int classes = 5;
    int sets_per_class = 10;
    int images_per_set = 30;
    int d = 10;
    double separation = 10.0;
    std::uint64_t seed = 0;
    SynthPreset preset = SynthPreset::Gaussian;
};

// Deterministic synthetic image sets; the same spec always produces the
// same bytes. Labels are "class<k>", set ids "c<k>_s<j>".
std::vector<ImageSet> synth_generate(const SynthSpec& spec);

// Writes sets/<set_id>.txt files plus manifest.json under dir.
void write_dataset(const std::filesystem::path& dir,
                   const std::vector<ImageSet>& sets, const std::string& note);

}  // namespace mmml
