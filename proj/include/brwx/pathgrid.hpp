#pragma once

// A real-valued function on the uniform grid {j/G : 0 <= j <= G} of [0,1],
// with an optional importance weight. Rescaled tree paths, excursions, and
// meanders all live here.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace brwx {

struct PathGrid {
  int grid_size = 0;           // number of grid intervals G
  std::vector<double> values;  // values[j] at s = j/G, size G+1
  double weight = 1.0;

  double s(int j) const { return static_cast<double>(j) / grid_size; }

  // right-continuous step lookup
  double at(double t) const {
    if (t <= 0.0) return values.front();
    if (t >= 1.0) return values.back();
    auto j = static_cast<std::size_t>(std::floor(t * grid_size + 1e-12));
    return values[j];
  }

  // restriction to every `stride`-th point (grid coarsening)
  PathGrid coarsen(int stride) const {
    if (stride < 1 || grid_size % stride != 0) throw std::invalid_argument("coarsen: stride must divide G");
    PathGrid out;
    out.grid_size = grid_size / stride;
    out.weight = weight;
    out.values.reserve(static_cast<std::size_t>(out.grid_size) + 1);
    for (int j = 0; j <= grid_size; j += stride) out.values.push_back(values[static_cast<std::size_t>(j)]);
    return out;
  }
};

}  // namespace brwx
