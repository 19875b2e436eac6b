#pragma once

#include <array>
#include <vector>

#include "atr/numkit/matrix.hpp"
#include "atr/numkit/random_stream.hpp"

namespace atr::numkit {

struct Projection2d {
  Matrix coordinates;                // n x 2
  Matrix components;                 // 2 x d, unit rows
  std::array<double, 2> eigenvalues{};  // descending, of the sample covariance
  std::vector<double> mean;
};

inline constexpr int kPowerIterations = 200;

// Projects rows of `points` onto the top two principal axes. Axes come from
// power iteration with deflation, a fixed iteration count and a start vector
// drawn from `stream`; each axis is signed so its first nonzero entry is positive.
// Throws DegenerateProjectionError when the covariance has rank < 2.
Projection2d pca_2d(const Matrix& points, RandomStream& stream);

}  // namespace atr::numkit
