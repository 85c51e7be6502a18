#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "reperfq/io.hpp"
#include "reperfq/types.hpp"
#include "test_support.hpp"

using namespace reperfq;
using test::simple_acquisition;

TEST_CASE("minimal valid acquisition is accepted unchanged") {
  Acquisition acq = simple_acquisition(6, 16, 16, 0.5);
  const Acquisition& validated = validate_acquisition(acq);
  CHECK(&validated == &acq);
  CHECK_NOTHROW(validate_acquisition(validate_acquisition(acq)));  // idempotent
}

TEST_CASE("five frames are too short") {
  Acquisition acq = simple_acquisition(5);
  CHECK_THROWS_WITH_AS(validate_acquisition(acq), doctest::Contains("at least 6"), Error);
  try {
    validate_acquisition(acq);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
}

TEST_CASE("frames of differing sizes are rejected") {
  Acquisition acq = simple_acquisition(6);
  acq.frames[3] = Frame(16, 20, 0.5);
  try {
    validate_acquisition(acq);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("times must be strictly increasing") {
  Acquisition acq = simple_acquisition(6);
  for (size_t i = 0; i < acq.frames.size(); ++i) acq.frames[i].time_s = 0.5 * i;
  CHECK_NOTHROW(validate_acquisition(acq));
  acq.frames[4].time_s = acq.frames[3].time_s;
  try {
    validate_acquisition(acq);
    FAIL("expected NonMonotonicTimes");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonMonotonicTimes);
  }
}

TEST_CASE("intensities outside [0,1] are rejected") {
  Acquisition acq = simple_acquisition(6);
  acq.frames[2].at(3, 3) = 1.5;
  try {
    validate_acquisition(acq);
    FAIL("expected OutOfRangeIntensity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRangeIntensity);
  }
}

TEST_CASE("affine inverse undoes the mapping") {
  AffineTransform2D t;
  t.a11 = 1.1;
  t.a12 = -0.2;
  t.a21 = 0.15;
  t.a22 = 0.95;
  t.tx = 4.0;
  t.ty = -2.5;
  t.cx = 12.0;
  t.cy = 9.0;
  const AffineTransform2D inv = t.inverse();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 50; ++i) {
    const double x = u(rng), y = u(rng);
    double fx, fy, bx, by;
    t.apply(x, y, fx, fy);
    inv.apply(fx, fy, bx, by);
    CHECK(bx == doctest::Approx(x).epsilon(1e-12));
    CHECK(by == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("acquisition round-trips losslessly through manifest and PGM") {
  test::TempDir dir("roundtrip");
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> level(0, 255);

  Acquisition acq;
  acq.patient_id = "p42";
  acq.view = View::Lateral;
  acq.stage = Stage::PostEVT;
  for (int i = 0; i < 7; ++i) {
    Frame f(12, 10);
    for (double& v : f.intensities) v = level(rng) / 255.0;
    f.time_s = 0.4 * i;
    acq.frames.push_back(std::move(f));
  }

  const auto manifest = save_acquisition(acq, dir.path(), "seq");
  const Acquisition loaded = load_acquisition(manifest);
  CHECK(loaded.patient_id == acq.patient_id);
  CHECK(loaded.view == acq.view);
  CHECK(loaded.stage == acq.stage);
  REQUIRE(loaded.frames.size() == acq.frames.size());
  for (size_t i = 0; i < acq.frames.size(); ++i) {
    CHECK(loaded.frames[i].time_s == acq.frames[i].time_s);
    CHECK(loaded.frames[i].intensities == acq.frames[i].intensities);  // bit exact
  }
}
