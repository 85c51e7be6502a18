#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reperfq/types.hpp"

namespace reperfq {

/// 8-bit RGB raster, used only for colormap output.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    size_t i = (static_cast<size_t>(y) * width + x) * 3;
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
};

/// On-disk description of one acquisition: an image list plus metadata,
/// optionally with reference phase labels for training/evaluation.
struct AcquisitionManifest {
  std::string patient_id;
  View view = View::AP;
  Stage stage = Stage::PreEVT;
  struct Entry {
    std::string file;  // relative to the manifest's directory
    std::optional<double> t;
  };
  std::vector<Entry> frames;
  std::optional<std::vector<int>> reference_labels;
};

// -- grayscale images ------------------------------------------------------

/// Reads a binary PGM (P5, maxval 255 or 65535) or a grayscale PNG and
/// scales intensities to [0,1] by the type maximum.
Frame load_image(const std::filesystem::path& path);

/// Quantizes to round(v * maxval) and writes a binary PGM. maxval must be
/// 255 or 65535; 16-bit samples are big-endian per the PGM convention.
void save_image(const Frame& field, const std::filesystem::path& path, int maxval = 255);

// -- manifests and acquisitions --------------------------------------------

AcquisitionManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const AcquisitionManifest& manifest, const std::filesystem::path& path);

/// Loads every frame referenced by the manifest, in manifest order.
Acquisition load_acquisition(const std::filesystem::path& manifest_path);

/// Writes frames as <stem>_NNN.pgm next to a fresh manifest at
/// dir/<stem>.manifest.json and returns the manifest path.
std::filesystem::path save_acquisition(const Acquisition& acq, const std::filesystem::path& dir,
                                       const std::string& stem, int maxval = 255,
                                       const std::optional<std::vector<int>>& reference_labels = {});

// -- masks ------------------------------------------------------------------

/// Any pixel > 0 counts as inside; fails with EmptyMask when none is.
BrainMask load_mask(const std::filesystem::path& path);
void save_mask(const BrainMask& mask, const std::filesystem::path& path);

// -- reports, labels, transforms, colormaps ---------------------------------

void save_report(const ScoreReport& report, const std::filesystem::path& path);
std::string report_to_json(const ScoreReport& report);

std::vector<PhaseLabel> load_labels(const std::filesystem::path& path);
void save_labels(const std::vector<PhaseLabel>& labels, const std::filesystem::path& path);

AffineTransform2D load_transform(const std::filesystem::path& path);
void save_transform(const AffineTransform2D& t, const std::filesystem::path& path);

/// Writes RGB output as PNG when the extension is .png, else binary PPM.
void save_rgb(const RgbImage& image, const std::filesystem::path& path);

/// Write-then-rename so concurrent readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace reperfq
