#include "reperfq/types.hpp"

#include <cmath>
#include <numeric>

namespace reperfq {

std::string_view to_string(View v) { return v == View::AP ? "AP" : "lateral"; }

std::string_view to_string(Stage s) { return s == Stage::PreEVT ? "pre" : "post"; }

View view_from_string(std::string_view s) {
  if (s == "AP") return View::AP;
  if (s == "lateral") return View::Lateral;
  fail(ErrorCode::ParseError, "unknown view '" + std::string(s) + "' (expected \"AP\" or \"lateral\")");
}

Stage stage_from_string(std::string_view s) {
  if (s == "pre") return Stage::PreEVT;
  if (s == "post") return Stage::PostEVT;
  fail(ErrorCode::ParseError, "unknown stage '" + std::string(s) + "' (expected \"pre\" or \"post\")");
}

AffineTransform2D AffineTransform2D::rotation(double radians, double cx, double cy) {
  AffineTransform2D t;
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  t.a11 = c;
  t.a12 = -s;
  t.a21 = s;
  t.a22 = c;
  t.cx = cx;
  t.cy = cy;
  return t;
}

AffineTransform2D AffineTransform2D::inverse() const {
  const double d = det();
  require(d != 0.0 && std::isfinite(d), ErrorCode::InvalidConfig,
          "affine transform is singular");
  AffineTransform2D inv;
  inv.a11 = a22 / d;
  inv.a12 = -a12 / d;
  inv.a21 = -a21 / d;
  inv.a22 = a11 / d;
  // Solve inv(A)*(p' - c - t) + c = p for the translation part.
  inv.tx = -(inv.a11 * tx + inv.a12 * ty);
  inv.ty = -(inv.a21 * tx + inv.a22 * ty);
  inv.cx = cx;
  inv.cy = cy;
  return inv;
}

AffineTransform2D AffineTransform2D::compose(const AffineTransform2D& other) const {
  // q = other(p), r = this(q); centers must agree for the closed form below.
  AffineTransform2D r;
  r.a11 = a11 * other.a11 + a12 * other.a21;
  r.a12 = a11 * other.a12 + a12 * other.a22;
  r.a21 = a21 * other.a11 + a22 * other.a21;
  r.a22 = a21 * other.a12 + a22 * other.a22;
  r.tx = a11 * other.tx + a12 * other.ty + tx;
  r.ty = a21 * other.tx + a22 * other.ty + ty;
  r.cx = cx;
  r.cy = cy;
  return r;
}

size_t BrainMask::count_inside() const {
  return static_cast<size_t>(std::accumulate(inside.begin(), inside.end(), int64_t{0}));
}

const Acquisition& validate_acquisition(const Acquisition& acq) {
  require(acq.frames.size() >= 6, ErrorCode::TooShort,
          "acquisition has " + std::to_string(acq.frames.size()) +
              " frames; at least 6 are required");
  const Frame& first = acq.frames.front();
  require(first.width >= 8 && first.height >= 8, ErrorCode::DimensionMismatch,
          "frames must be at least 8x8 pixels");
  std::optional<double> last_time;
  for (size_t i = 0; i < acq.frames.size(); ++i) {
    const Frame& f = acq.frames[i];
    require(f.same_shape(first), ErrorCode::DimensionMismatch,
            "frame " + std::to_string(i) + " is " + std::to_string(f.width) + "x" +
                std::to_string(f.height) + " but frame 0 is " +
                std::to_string(first.width) + "x" + std::to_string(first.height));
    require(f.intensities.size() == static_cast<size_t>(f.width) * f.height,
            ErrorCode::DimensionMismatch,
            "frame " + std::to_string(i) + " pixel buffer does not match its size");
    for (double v : f.intensities) {
      require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::OutOfRangeIntensity,
              "frame " + std::to_string(i) + " has an intensity outside [0,1]");
    }
    if (f.time_s) {
      require(!last_time || *f.time_s > *last_time, ErrorCode::NonMonotonicTimes,
              "frame times must be strictly increasing");
      last_time = f.time_s;
    }
  }
  return acq;
}

}  // namespace reperfq
