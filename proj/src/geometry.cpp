#include "ptl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ptl/error.hpp"
#include "ptl/random.hpp"

namespace ptl {

std::vector<std::size_t> farthest_point_sample(std::span<const Point3> points, std::size_t m,
                                               std::size_t start) {
  const std::size_t n = points.size();
  if (m == 0 || m > n) {
    throw ConfigError("farthest_point_sample: need 1 <= m <= N, got m=" + std::to_string(m) +
                      " N=" + std::to_string(n));
  }
  if (start >= n) {
    throw IndexError("farthest_point_sample: start " + std::to_string(start) + " >= N=" +
                     std::to_string(n));
  }
  std::vector<std::size_t> picked;
  picked.reserve(m);
  picked.push_back(start);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  taken[start] = true;
  std::size_t last = start;
  while (picked.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], points[last]));
      if (!taken[i] && nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    picked.push_back(best);
    taken[best] = true;
    last = best;
  }
  return picked;
}

std::size_t canonical_start(std::span<const Point3> points) {
  if (points.empty()) throw ConfigError("canonical_start: empty point set");
  return static_cast<std::size_t>(std::min_element(points.begin(), points.end()) - points.begin());
}

namespace {

void fill_row(std::span<const Point3> reference, const Point3& q, std::size_t k,
              std::vector<std::pair<double, std::uint32_t>>& scratch,
              std::span<std::uint32_t> row, std::int64_t self) {
  scratch.clear();
  for (std::size_t j = 0; j < reference.size(); ++j) {
    if (static_cast<std::int64_t>(j) == self) continue;
    scratch.emplace_back(squared_distance(q, reference[j]), static_cast<std::uint32_t>(j));
  }
  std::size_t offset = 0;
  if (self >= 0) row[offset++] = static_cast<std::uint32_t>(self);
  const std::size_t take = k - offset;
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(take),
                    scratch.end());
  for (std::size_t j = 0; j < take; ++j) row[offset + j] = scratch[j].second;
}

void check_k(std::size_t k, std::size_t n) {
  if (k == 0 || k > n) {
    throw ConfigError("knn: need 1 <= k <= N, got k=" + std::to_string(k) + " N=" +
                      std::to_string(n));
  }
}

}  // namespace

NeighborIndex knn(std::span<const Point3> reference, std::span<const Point3> queries,
                  std::size_t k) {
  check_k(k, reference.size());
  NeighborIndex out(queries.size(), k);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  scratch.reserve(reference.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    fill_row(reference, queries[i], k, scratch, out.row(i), -1);
  }
  return out;
}

NeighborIndex knn_self(std::span<const Point3> points, std::size_t k) {
  check_k(k, points.size());
  NeighborIndex out(points.size(), k);
  std::vector<std::pair<double, std::uint32_t>> scratch;
  scratch.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    fill_row(points, points[i], k, scratch, out.row(i), static_cast<std::int64_t>(i));
  }
  return out;
}

std::vector<Point3> normalize_cloud(std::span<const Point3> points) {
  if (points.empty()) throw ConfigError("normalize_cloud: empty point set");
  Point3 centroid{0.0, 0.0, 0.0};
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) centroid[a] += p[a];
  }
  for (int a = 0; a < 3; ++a) centroid[a] /= static_cast<double>(points.size());

  std::vector<Point3> out(points.begin(), points.end());
  double radius = 0.0;
  for (auto& p : out) {
    for (int a = 0; a < 3; ++a) p[a] -= centroid[a];
    radius = std::max(radius, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
  }
  if (radius >= 1e-12) {
    for (auto& p : out) {
      for (int a = 0; a < 3; ++a) p[a] /= radius;
    }
  }
  return out;
}

double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
  const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
  const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
  const double cx = uy * vz - uz * vy, cy = uz * vx - ux * vz, cz = ux * vy - uy * vx;
  return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

std::vector<Point3> sample_mesh_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  std::vector<double> areas;
  areas.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    for (auto v : f) {
      if (v >= mesh.vertices.size()) {
        throw IndexError("sample_mesh_surface: face references vertex " + std::to_string(v) +
                         " of " + std::to_string(mesh.vertices.size()));
      }
    }
    const double a = triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    areas.push_back(a);
    total += a;
  }
  if (!(total > 0.0)) throw ConfigError("sample_mesh_surface: mesh has zero total surface area");

  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick_face(areas.begin(), areas.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point3> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& f = mesh.faces[pick_face(rng)];
    double u = unit(rng), v = unit(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Point3& a = mesh.vertices[f[0]];
    const Point3& b = mesh.vertices[f[1]];
    const Point3& c = mesh.vertices[f[2]];
    Point3 p;
    for (int ax = 0; ax < 3; ++ax) p[ax] = a[ax] + u * (b[ax] - a[ax]) + v * (c[ax] - a[ax]);
    out.push_back(p);
  }
  return out;
}

}  // namespace ptl
