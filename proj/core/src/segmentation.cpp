#include "reperfq/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reperfq {
namespace seg {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

enum class Kernel { Smooth, FirstDerivative, SecondDerivative };

std::vector<double> gaussian_kernel(double sigma, Kernel kind) {
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) {
    const double x = i;
    const double g = std::exp(-x * x / (2.0 * sigma * sigma)) / (sigma * kSqrt2Pi);
    switch (kind) {
      case Kernel::Smooth: k[i + radius] = g; break;
      case Kernel::FirstDerivative: k[i + radius] = -x / (sigma * sigma) * g; break;
      case Kernel::SecondDerivative:
        k[i + radius] = (x * x / (sigma * sigma) - 1.0) / (sigma * sigma) * g;
        break;
    }
  }
  if (kind == Kernel::Smooth) {
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k) v /= sum;
  } else if (kind == Kernel::SecondDerivative) {
    // Zero DC response so a constant image yields an exactly flat Hessian.
    const double mean = std::accumulate(k.begin(), k.end(), 0.0) / k.size();
    for (double& v : k) v -= mean;
  } else {
    k[static_cast<size_t>(radius)] = 0.0;  // keep the odd symmetry exact
    for (int i = 1; i <= radius; ++i) k[radius - i] = -k[radius + i];
  }
  return k;
}

std::vector<double> convolve_rows(const std::vector<double>& in, int width, int height,
                                  const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> out(in.size());
  for (int y = 0; y < height; ++y) {
    const double* row = in.data() + static_cast<size_t>(y) * width;
    double* orow = out.data() + static_cast<size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += row[reflect_index(x + k, width)] * kernel[k + radius];
      }
      orow[x] = acc;
    }
  }
  return out;
}

std::vector<double> convolve_cols(const std::vector<double>& in, int width, int height,
                                  const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  std::vector<double> out(in.size());
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        acc += in[static_cast<size_t>(reflect_index(y + k, height)) * width + x] *
               kernel[k + radius];
      }
      out[static_cast<size_t>(y) * width + x] = acc;
    }
  }
  return out;
}

}  // namespace

void FrangiConfig::validate() const {
  require(!sigmas.empty(), ErrorCode::InvalidConfig, "frangi needs at least one scale");
  double prev = 0.0;
  for (double s : sigmas) {
    require(s >= 1.0, ErrorCode::InvalidConfig, "frangi scales must be >= 1");
    require(s > prev, ErrorCode::InvalidConfig, "frangi scales must be strictly increasing");
    prev = s;
  }
  require(blobness > 0.0, ErrorCode::InvalidConfig, "blobness must be positive");
  require(structureness_gamma > 0.0, ErrorCode::InvalidConfig, "gamma must be positive");
  require(response_threshold > 0.0 && response_threshold < 1.0, ErrorCode::InvalidConfig,
          "response threshold must be in (0,1)");
}

HessianEigenvalues hessian_at_scale(const Frame& image_0_255, double sigma) {
  require(sigma >= 1.0, ErrorCode::InvalidConfig, "sigma must be >= 1");
  const int w = image_0_255.width;
  const int h = image_0_255.height;
  const auto g = gaussian_kernel(sigma, Kernel::Smooth);
  const auto g1 = gaussian_kernel(sigma, Kernel::FirstDerivative);
  const auto g2 = gaussian_kernel(sigma, Kernel::SecondDerivative);

  const auto ixx = convolve_cols(convolve_rows(image_0_255.intensities, w, h, g2), w, h, g);
  const auto iyy = convolve_cols(convolve_rows(image_0_255.intensities, w, h, g), w, h, g2);
  const auto ixy = convolve_cols(convolve_rows(image_0_255.intensities, w, h, g1), w, h, g1);

  HessianEigenvalues out;
  out.width = w;
  out.height = h;
  out.lambda1.resize(image_0_255.size());
  out.lambda2.resize(image_0_255.size());
  const double norm = sigma * sigma;  // gamma normalization
  for (size_t i = 0; i < image_0_255.size(); ++i) {
    const double hxx = ixx[i] * norm;
    const double hyy = iyy[i] * norm;
    const double hxy = ixy[i] * norm;
    const double half_tr = 0.5 * (hxx + hyy);
    const double disc = std::sqrt(0.25 * (hxx - hyy) * (hxx - hyy) + hxy * hxy);
    const double e1 = half_tr + disc;
    const double e2 = half_tr - disc;
    if (std::abs(e1) <= std::abs(e2)) {
      out.lambda1[i] = e1;
      out.lambda2[i] = e2;
    } else {
      out.lambda1[i] = e2;
      out.lambda2[i] = e1;
    }
  }
  return out;
}

Frame frangi_vesselness(const Frame& image, const FrangiConfig& cfg) {
  cfg.validate();
  Frame scaled(image.width, image.height);
  for (size_t i = 0; i < image.size(); ++i) scaled.intensities[i] = image.intensities[i] * 255.0;

  Frame response(image.width, image.height, 0.0);
  const double two_beta_sq = 2.0 * cfg.blobness * cfg.blobness;
  const double two_gamma_sq = 2.0 * cfg.structureness_gamma * cfg.structureness_gamma;
  for (double sigma : cfg.sigmas) {
    const HessianEigenvalues eig = hessian_at_scale(scaled, sigma);
    for (size_t i = 0; i < response.size(); ++i) {
      const double l1 = eig.lambda1[i];
      const double l2 = eig.lambda2[i];
      if (l2 <= 0.0) continue;  // dark-on-bright polarity
      const double rb = l1 / l2;
      const double s_sq = l1 * l1 + l2 * l2;
      const double v = std::exp(-rb * rb / two_beta_sq) * (1.0 - std::exp(-s_sq / two_gamma_sq));
      if (v > response.intensities[i]) response.intensities[i] = v;
    }
  }
  return response;
}

double otsu_threshold(std::span<const double> values, int bins) {
  require(!values.empty(), ErrorCode::EmptyInput, "otsu needs at least one value");
  require(bins >= 2, ErrorCode::InvalidConfig, "otsu needs at least two bins");

  std::vector<int64_t> counts(bins, 0);
  for (double v : values) {
    int idx = static_cast<int>(std::clamp(v, 0.0, 1.0) * bins);
    if (idx >= bins) idx = bins - 1;
    ++counts[idx];
  }

  // Means over integer bin indices keep the accumulations exact, so any tie
  // is a true tie and resolves to the smallest edge.
  const int64_t total = static_cast<int64_t>(values.size());
  int64_t total_moment = 0;
  for (int i = 0; i < bins; ++i) total_moment += counts[i] * i;

  double best_bcv = 0.0;
  int best_edge = -1;
  int64_t n0 = 0, m0 = 0;
  for (int k = 1; k < bins; ++k) {
    n0 += counts[k - 1];
    m0 += counts[k - 1] * static_cast<int64_t>(k - 1);
    const int64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double dmu = static_cast<double>(m0) / n0 -
                       static_cast<double>(total_moment - m0) / n1;
    const double bcv = static_cast<double>(n0) * static_cast<double>(n1) * dmu * dmu;
    if (bcv > best_bcv) {
      best_bcv = bcv;
      best_edge = k;
    }
  }
  if (best_edge < 0) {
    return *std::min_element(values.begin(), values.end());  // single occupied bin
  }
  return static_cast<double>(best_edge) / bins;
}

SegmentationMap segment_minip(const Frame& minip, const FrangiConfig& cfg) {
  const Frame vesselness = frangi_vesselness(minip, cfg);
  SegmentationMap seg(minip.width, minip.height);
  std::vector<double> remaining;
  remaining.reserve(minip.size());
  for (size_t i = 0; i < minip.size(); ++i) {
    if (vesselness.intensities[i] > cfg.response_threshold) {
      seg.classes[i] = PixelClass::Vessel;
    } else {
      remaining.push_back(minip.intensities[i]);
    }
  }
  if (remaining.empty()) return seg;  // everything vessel

  const double threshold = otsu_threshold(remaining);
  for (size_t i = 0; i < minip.size(); ++i) {
    if (seg.classes[i] == PixelClass::Vessel) continue;
    seg.classes[i] =
        minip.intensities[i] < threshold ? PixelClass::Perfused : PixelClass::NonPerfused;
  }
  return seg;
}

RgbImage render_colormap(const SegmentationMap& seg, const Overlay& overlay) {
  const size_t n = seg.size();
  auto check = [&](size_t size, const char* what) {
    require(size == n, ErrorCode::DimensionMismatch,
            std::string(what) + " overlay does not match segmentation dimensions");
  };
  if (overlay.mask) check(overlay.mask->inside.size(), "mask");
  if (overlay.tdt) check(overlay.tdt->size(), "tdt");
  if (overlay.reperfused) check(overlay.reperfused->size(), "reperfused");

  RgbImage out(seg.width, seg.height);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      switch (seg.at(x, y)) {
        case PixelClass::Vessel: out.set(x, y, 220, 40, 40); break;
        case PixelClass::Perfused: out.set(x, y, 40, 180, 70); break;
        case PixelClass::NonPerfused: out.set(x, y, 50, 80, 200); break;
      }
    }
  }
  if (overlay.mask) {
    const BrainMask& m = *overlay.mask;
    for (int y = 0; y < seg.height; ++y) {
      for (int x = 0; x < seg.width; ++x) {
        if (!m.at(x, y)) continue;
        const bool boundary = x == 0 || y == 0 || x == seg.width - 1 || y == seg.height - 1 ||
                              !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) ||
                              !m.at(x, y + 1);
        if (boundary) out.set(x, y, 180, 0, 0);
      }
    }
  }
  if (overlay.tdt) {
    for (int y = 0; y < seg.height; ++y) {
      for (int x = 0; x < seg.width; ++x) {
        if ((*overlay.tdt)[static_cast<size_t>(y) * seg.width + x]) out.set(x, y, 255, 255, 255);
      }
    }
  }
  if (overlay.reperfused) {  // on top of every base class
    for (int y = 0; y < seg.height; ++y) {
      for (int x = 0; x < seg.width; ++x) {
        if ((*overlay.reperfused)[static_cast<size_t>(y) * seg.width + x]) {
          out.set(x, y, 255, 150, 40);
        }
      }
    }
  }
  return out;
}

}  // namespace seg
}  // namespace reperfq
