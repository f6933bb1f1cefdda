#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ptl {

/// rows × k table of point indices; row i lists the neighborhood of query i.
struct NeighborIndex {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;

  NeighborIndex() = default;
  NeighborIndex(std::size_t rows_, std::size_t k_)
      : rows(rows_), k(k_), indices(rows_ * k_, 0) {}

  std::span<const std::uint32_t> row(std::size_t i) const { return {indices.data() + i * k, k}; }
  std::span<std::uint32_t> row(std::size_t i) { return {indices.data() + i * k, k}; }
  std::uint32_t at(std::size_t i, std::size_t j) const { return indices[i * k + j]; }

  /// Every row filled with its own index: the "center" side of a neighborhood.
  static NeighborIndex self(std::size_t rows, std::size_t k) {
    NeighborIndex out(rows, k);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < k; ++j) out.indices[i * k + j] = static_cast<std::uint32_t>(i);
    }
    return out;
  }

  friend bool operator==(const NeighborIndex&, const NeighborIndex&) = default;
};

}  // namespace ptl
