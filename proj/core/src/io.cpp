#include "reperfq/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace reperfq {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  require(!in.bad(), ErrorCode::IoError, "read failed for " + path.string());
  return ss.str();
}

// Skips PGM whitespace and '#' comment lines.
void skip_pgm_space(const std::string& data, size_t& pos) {
  while (pos < data.size()) {
    char c = data[pos];
    if (c == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
}

int read_pgm_int(const std::string& data, size_t& pos, const fs::path& path) {
  skip_pgm_space(data, pos);
  size_t start = pos;
  while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) ++pos;
  require(pos > start, ErrorCode::ParseError, "malformed PGM header in " + path.string());
  return std::stoi(data.substr(start, pos - start));
}

Frame load_pgm(const std::string& data, const fs::path& path) {
  require(data.size() > 2 && data[0] == 'P' && data[1] == '5', ErrorCode::UnsupportedPixelFormat,
          path.string() + " is not a binary PGM (P5)");
  size_t pos = 2;
  const int width = read_pgm_int(data, pos, path);
  const int height = read_pgm_int(data, pos, path);
  const int maxval = read_pgm_int(data, pos, path);
  require(maxval == 255 || maxval == 65535, ErrorCode::UnsupportedPixelFormat,
          path.string() + " has maxval " + std::to_string(maxval) + "; expected 255 or 65535");
  require(pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos])),
          ErrorCode::ParseError, "malformed PGM header in " + path.string());
  ++pos;  // single whitespace byte separates header and raster

  const size_t count = static_cast<size_t>(width) * height;
  const size_t bytes = count * (maxval == 255 ? 1 : 2);
  require(data.size() - pos >= bytes, ErrorCode::ParseError,
          path.string() + " is truncated");

  Frame frame(width, height);
  const unsigned char* raw = reinterpret_cast<const unsigned char*>(data.data() + pos);
  if (maxval == 255) {
    for (size_t i = 0; i < count; ++i) frame.intensities[i] = raw[i] / 255.0;
  } else {
    for (size_t i = 0; i < count; ++i) {
      const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      frame.intensities[i] = v / 65535.0;
    }
  }
  return frame;
}

Frame load_png(const fs::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "rb");
  require(fp != nullptr, ErrorCode::MissingFile, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorCode::IoError, "libpng initialization failed");
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorCode::ParseError, "libpng failed to decode " + path.string());
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    fail(ErrorCode::UnsupportedPixelFormat,
         path.string() + " is not single-channel grayscale");
  }
  int depth = png_get_bit_depth(png, info);
  if (depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> buffer(row_bytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + row_bytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  Frame frame(width, height);
  const double scale = depth == 8 ? 255.0 : 65535.0;
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = buffer.data() + row_bytes * y;
    for (int x = 0; x < width; ++x) {
      unsigned v = depth == 8 ? row[x]
                              : (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
      frame.at(x, y) = v / scale;
    }
  }
  return frame;
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  require(!j.is_discarded(), ErrorCode::ParseError, "invalid JSON in " + path.string());
  return j;
}

}  // namespace

Frame load_image(const fs::path& path) {
  require(fs::exists(path), ErrorCode::MissingFile, "no such file: " + path.string());
  if (path.extension() == ".png") return load_png(path);
  return load_pgm(read_file(path), path);
}

void save_image(const Frame& field, const fs::path& path, int maxval) {
  require(maxval == 255 || maxval == 65535, ErrorCode::InvalidConfig,
          "save_image maxval must be 255 or 65535");
  std::string out = "P5\n" + std::to_string(field.width) + " " +
                    std::to_string(field.height) + "\n" + std::to_string(maxval) + "\n";
  out.reserve(out.size() + field.size() * (maxval == 255 ? 1 : 2));
  for (double v : field.intensities) {
    const long q = std::lround(std::min(std::max(v, 0.0), 1.0) * maxval);
    if (maxval == 255) {
      out.push_back(static_cast<char>(q));
    } else {
      out.push_back(static_cast<char>((q >> 8) & 0xff));
      out.push_back(static_cast<char>(q & 0xff));
    }
  }
  write_file_atomic(path, out);
}

AcquisitionManifest load_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  require(j.is_object(), ErrorCode::ParseError, path.string() + ": manifest must be a JSON object");
  try {
    AcquisitionManifest m;
    m.patient_id = j.at("patient_id").get<std::string>();
    m.view = view_from_string(j.at("view").get<std::string>());
    m.stage = stage_from_string(j.at("stage").get<std::string>());
    for (const auto& f : j.at("frames")) {
      AcquisitionManifest::Entry e;
      e.file = f.at("file").get<std::string>();
      if (f.contains("t") && !f.at("t").is_null()) e.t = f.at("t").get<double>();
      m.frames.push_back(std::move(e));
    }
    require(!m.frames.empty(), ErrorCode::ParseError, path.string() + ": empty frame list");
    if (j.contains("reference_labels") && !j.at("reference_labels").is_null()) {
      m.reference_labels = j.at("reference_labels").get<std::vector<int>>();
      require(m.reference_labels->size() == m.frames.size(), ErrorCode::LabelLengthMismatch,
              path.string() + ": reference_labels length differs from frame count");
      for (int v : *m.reference_labels)
        require(v >= 0 && v < kPhaseCount, ErrorCode::ParseError,
                path.string() + ": phase label out of range");
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void save_manifest(const AcquisitionManifest& manifest, const fs::path& path) {
  json j;
  j["patient_id"] = manifest.patient_id;
  j["view"] = std::string(to_string(manifest.view));
  j["stage"] = std::string(to_string(manifest.stage));
  j["frames"] = json::array();
  for (const auto& f : manifest.frames) {
    json e;
    e["file"] = f.file;
    if (f.t) e["t"] = *f.t;
    j["frames"].push_back(e);
  }
  if (manifest.reference_labels) j["reference_labels"] = *manifest.reference_labels;
  write_file_atomic(path, j.dump(2) + "\n");
}

Acquisition load_acquisition(const fs::path& manifest_path) {
  const AcquisitionManifest m = load_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  Acquisition acq;
  acq.patient_id = m.patient_id;
  acq.view = m.view;
  acq.stage = m.stage;
  acq.frames.reserve(m.frames.size());
  for (const auto& entry : m.frames) {
    Frame f = load_image(base / entry.file);
    f.time_s = entry.t;
    acq.frames.push_back(std::move(f));
  }
  return acq;
}

fs::path save_acquisition(const Acquisition& acq, const fs::path& dir, const std::string& stem,
                          int maxval, const std::optional<std::vector<int>>& reference_labels) {
  require(fs::exists(dir), ErrorCode::IoError, "output directory does not exist: " + dir.string());
  AcquisitionManifest m;
  m.patient_id = acq.patient_id;
  m.view = acq.view;
  m.stage = acq.stage;
  m.reference_labels = reference_labels;
  char name[64];
  for (size_t i = 0; i < acq.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%s_%03zu.pgm", stem.c_str(), i);
    save_image(acq.frames[i], dir / name, maxval);
    m.frames.push_back({name, acq.frames[i].time_s});
  }
  const fs::path manifest_path = dir / (stem + ".manifest.json");
  save_manifest(m, manifest_path);
  return manifest_path;
}

BrainMask load_mask(const fs::path& path) {
  const Frame img = load_image(path);
  BrainMask mask(img.width, img.height);
  size_t inside = 0;
  for (size_t i = 0; i < img.size(); ++i) {
    if (img.intensities[i] > 0.0) {
      mask.inside[i] = 1;
      ++inside;
    }
  }
  require(inside > 0, ErrorCode::EmptyMask, path.string() + " has no pixel inside the mask");
  return mask;
}

void save_mask(const BrainMask& mask, const fs::path& path) {
  Frame img(mask.width, mask.height);
  for (size_t i = 0; i < mask.inside.size(); ++i) img.intensities[i] = mask.inside[i] ? 1.0 : 0.0;
  save_image(img, path, 255);
}

namespace {

json boundaries_to_json(const PhaseBoundaries& b) {
  json j;
  j["first_arterial"] = b.first_arterial ? json(*b.first_arterial) : json(nullptr);
  j["last_arterial"] = b.last_arterial ? json(*b.last_arterial) : json(nullptr);
  j["last_parenchymal"] = b.last_parenchymal ? json(*b.last_parenchymal) : json(nullptr);
  return j;
}

}  // namespace

std::string report_to_json(const ScoreReport& report) {
  json j;
  j["patient_id"] = report.patient_id;
  j["per_view"] = json::array();
  for (const auto& v : report.per_view) {
    json e;
    e["view"] = std::string(to_string(v.view));
    e["auto_tici"] = v.auto_tici;
    e["tdt_pre_pixels"] = v.tdt_pre_pixels;
    e["reperfused_pixels"] = v.reperfused_pixels;
    e["phase_boundaries"] = boundaries_to_json(v.boundaries_pre);
    e["registration_mi"] = v.registration_mi;
    j["per_view"].push_back(e);
  }
  j["combined_auto_tici"] = report.combined_auto_tici;
  if (report.seed) j["seed"] = *report.seed;
  return j.dump(2) + "\n";
}

void save_report(const ScoreReport& report, const fs::path& path) {
  write_file_atomic(path, report_to_json(report));
}

std::vector<PhaseLabel> load_labels(const fs::path& path) {
  const json j = parse_json_file(path);
  require(j.is_array(), ErrorCode::ParseError, path.string() + ": label file must be a JSON array");
  std::vector<PhaseLabel> labels;
  for (const auto& v : j) {
    require(v.is_number_integer(), ErrorCode::ParseError, path.string() + ": non-integer label");
    const int code = v.get<int>();
    require(code >= 0 && code < kPhaseCount, ErrorCode::ParseError,
            path.string() + ": label code " + std::to_string(code) + " out of range");
    labels.push_back(static_cast<PhaseLabel>(code));
  }
  return labels;
}

void save_labels(const std::vector<PhaseLabel>& labels, const fs::path& path) {
  json j = json::array();
  for (PhaseLabel l : labels) j.push_back(static_cast<int>(l));
  write_file_atomic(path, j.dump() + "\n");
}

AffineTransform2D load_transform(const fs::path& path) {
  const json j = parse_json_file(path);
  try {
    AffineTransform2D t;
    t.a11 = j.at("a11").get<double>();
    t.a12 = j.at("a12").get<double>();
    t.a21 = j.at("a21").get<double>();
    t.a22 = j.at("a22").get<double>();
    t.tx = j.at("tx").get<double>();
    t.ty = j.at("ty").get<double>();
    t.cx = j.at("cx").get<double>();
    t.cy = j.at("cy").get<double>();
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void save_transform(const AffineTransform2D& t, const fs::path& path) {
  json j;
  j["a11"] = t.a11;
  j["a12"] = t.a12;
  j["a21"] = t.a21;
  j["a22"] = t.a22;
  j["tx"] = t.tx;
  j["ty"] = t.ty;
  j["cx"] = t.cx;
  j["cy"] = t.cy;
  write_file_atomic(path, j.dump(2) + "\n");
}

namespace {

void save_ppm(const RgbImage& image, const fs::path& path) {
  std::string out = "P6\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  write_file_atomic(path, out);
}

void save_png_rgb(const RgbImage& image, const fs::path& path) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  require(fp != nullptr, ErrorCode::IoError, "cannot create " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::IoError, "libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    fail(ErrorCode::IoError, "libpng failed to encode " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() +
                                             static_cast<size_t>(y) * image.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace

void save_rgb(const RgbImage& image, const fs::path& path) {
  if (path.extension() == ".png") {
    save_png_rgb(image, path);
  } else {
    save_ppm(image, path);
  }
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::IoError, "cannot create " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    require(out.good(), ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  require(!ec, ErrorCode::IoError, "rename failed for " + path.string() + ": " + ec.message());
}

}  // namespace reperfq
