#include "reperfq/projection.hpp"

#include <algorithm>

namespace reperfq {

Frame minip(std::span<const Frame> frames) {
  require(!frames.empty(), ErrorCode::EmptyInput, "minip needs at least one frame");
  const Frame& first = frames.front();
  Frame out(first.width, first.height);
  out.intensities = first.intensities;
  out.time_s.reset();
  for (size_t k = 1; k < frames.size(); ++k) {
    const Frame& f = frames[k];
    require(f.same_shape(first), ErrorCode::DimensionMismatch,
            "minip frames must share dimensions");
    for (size_t i = 0; i < out.intensities.size(); ++i) {
      out.intensities[i] = std::min(out.intensities[i], f.intensities[i]);
    }
  }
  return out;
}

}  // namespace reperfq
