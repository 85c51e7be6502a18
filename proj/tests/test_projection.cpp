#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "reperfq/projection.hpp"
#include "test_support.hpp"

using namespace reperfq;

TEST_CASE("minip of constant frames takes the lower one") {
  const std::vector<Frame> frames = {Frame(8, 8, 0.7), Frame(8, 8, 0.2)};
  const Frame out = minip(frames);
  for (double v : out.intensities) CHECK(v == 0.2);
}

TEST_CASE("minip of a single frame is that frame, times dropped") {
  Frame f(8, 8, 0.4);
  f.time_s = 1.5;
  const Frame out = minip(std::vector<Frame>{f});
  CHECK(out.intensities == f.intensities);
  CHECK(!out.time_s.has_value());
}

TEST_CASE("minip equals the fold oracle on random stacks") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, 10);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Frame> frames;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      Frame f(12, 9);
      for (double& v : f.intensities) v = u(rng);
      frames.push_back(std::move(f));
    }
    const Frame got = minip(frames);
    const Frame expected = test::fold_min(frames);
    CHECK(got.intensities == expected.intensities);
  }
}

TEST_CASE("minip is idempotent, order-invariant and monotone") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Frame> frames;
  for (int k = 0; k < 6; ++k) {
    Frame f(10, 10);
    for (double& v : f.intensities) v = u(rng);
    frames.push_back(std::move(f));
  }
  const Frame once = minip(frames);
  CHECK(minip(std::vector<Frame>{once}).intensities == once.intensities);

  std::vector<Frame> shuffled = frames;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(minip(shuffled).intensities == once.intensities);

  Frame extra(10, 10);
  for (double& v : extra.intensities) v = u(rng);
  std::vector<Frame> more = frames;
  more.push_back(extra);
  const Frame grown = minip(more);
  for (size_t i = 0; i < grown.intensities.size(); ++i) {
    CHECK(grown.intensities[i] <= once.intensities[i]);
  }
}

TEST_CASE("minip input errors") {
  try {
    minip({});
    FAIL("expected EmptyInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyInput);
  }
  const std::vector<Frame> bad = {Frame(8, 8, 0.5), Frame(8, 9, 0.5)};
  try {
    minip(bad);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}
