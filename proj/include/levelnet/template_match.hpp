#pragma once

#include <vector>

#include "levelnet/image.hpp"

namespace levelnet {

struct MatchLocation {
  int x = 0;
  int y = 0;
  double score = 0.0;
};

/// Zero-mean normalized cross-correlation of `templ` against every valid
/// offset of `image`, channels pooled. Row-major, (H-h+1) x (W-w+1). Offsets
/// where either side has zero variance score 0.
std::vector<double> ncc_map(const Image& templ, const Image& image);

/// Offset of the best match of `frame` inside `level`. Ties within 1e-9 go to
/// the smallest y, then the smallest x. Throws FrameTooLargeError.
MatchLocation locate_in_level(const Image& frame, const Image& level);

}  // namespace levelnet
