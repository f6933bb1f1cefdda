#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ptl/neighbor_index.hpp"

namespace ptl {

using Point3 = std::array<double, 3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
};

/// Greedy max-min subsampling. indices[0] = start; each later pick maximizes
/// its squared distance to the nearest already-picked point, lowest index on ties.
std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points, std::size_t m,
                                               std::size_t start = 0);

/// Index of the lexicographically smallest (x, y, z); the canonical FPS start.
std::size_t canonical_start(std::span<const Point3> points);

/// Euclidean k nearest references of each query, rows sorted by (distance, index).
NeighborIndex knn(std::span<const Point3> reference, std::span<const Point3> queries,
                  std::size_t k);

/// kNN of a point set against itself. Row i always starts with i, then the
/// remaining neighbors by (distance, index).
NeighborIndex knn_self(std::span<const Point3> points, std::size_t k);

/// Translates the centroid to the origin and scales the farthest point to radius 1.
/// A radius below 1e-12 leaves the scale at 1.
std::vector<Point3> normalize_cloud(std::span<const Point3> points);

double triangle_area(const Point3& a, const Point3& b, const Point3& c);

/// Area-weighted face choice and uniform barycentric sampling; pure in (mesh, n, seed).
std::vector<Point3> sample_mesh_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

}  // namespace ptl
