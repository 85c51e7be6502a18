#pragma once

#include <span>

#include "reperfq/types.hpp"

namespace reperfq {

/// Minimum-intensity projection: output pixel = min over frames at that
/// pixel. Time metadata is dropped. Throws EmptyInput / DimensionMismatch.
Frame minip(std::span<const Frame> frames);

}  // namespace reperfq
