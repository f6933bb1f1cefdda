#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "ptl/error.hpp"
#include "ptl/geometry.hpp"

using namespace ptl;

namespace {

std::vector<Point3> line_points(std::initializer_list<double> xs) {
  std::vector<Point3> pts;
  for (double x : xs) pts.push_back({x, 0.0, 0.0});
  return pts;
}

Point3 centroid(const std::vector<Point3>& pts) {
  Point3 c{0, 0, 0};
  for (const auto& p : pts)
    for (int a = 0; a < 3; ++a) c[a] += p[a] / static_cast<double>(pts.size());
  return c;
}

double max_radius(const std::vector<Point3>& pts) {
  double r = 0.0;
  for (const auto& p : pts) r = std::max(r, std::sqrt(squared_distance(p, {0, 0, 0})));
  return r;
}

TriMesh unit_cube_mesh() {
  TriMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
  const std::uint32_t quads[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1},
                                     {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

}  // namespace

TEST(Fps, BaseCases) {
  std::mt19937_64 rng(1);
  const auto pts = oracle::random_cloud(rng, 12);
  EXPECT_EQ(farthest_point_sample(pts, 1, 7), std::vector<std::size_t>{7});
  auto all = farthest_point_sample(pts, 12, 3);
  EXPECT_EQ(all[0], 3u);
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> want(12);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(all, want);
  EXPECT_THROW(farthest_point_sample(pts, 13, 0), ConfigError);
  EXPECT_THROW(farthest_point_sample(pts, 0, 0), ConfigError);
  EXPECT_THROW(farthest_point_sample(pts, 2, 12), IndexError);
}

TEST(Fps, CollinearExample) {
  const auto pts = line_points({0, 1, 2, 3, 4});
  const std::vector<std::size_t> want{0, 4, 2};
  EXPECT_EQ(oracle::fps(pts, 3, 0), want);
  EXPECT_EQ(farthest_point_sample(pts, 3, 0), want);
}

TEST(Fps, TiesGoToLowestIndex) {
  // from x=0, points 1 and 2 are both at distance 1
  const auto pts = line_points({0, 1, -1});
  EXPECT_EQ(farthest_point_sample(pts, 2, 0), (std::vector<std::size_t>{0, 1}));
}

TEST(Fps, MatchesBruteForceOn200Clouds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + rng() % 64;
    const auto pts = oracle::random_cloud(rng, n);
    const std::size_t m = 1 + rng() % n;
    const std::size_t start = rng() % n;
    EXPECT_EQ(farthest_point_sample(pts, m, start), oracle::fps(pts, m, start)) << "seed " << seed;
  }
}

TEST(Fps, CanonicalStartIsLexicographicMin) {
  const std::vector<Point3> pts{{1, 0, 0}, {0, 2, 0}, {0, 1, 5}, {0, 1, 4}};
  EXPECT_EQ(canonical_start(pts), 3u);
}

TEST(Knn, SelfAtKOne) {
  std::mt19937_64 rng(2);
  const auto pts = oracle::random_cloud(rng, 20);
  const auto idx = knn(pts, pts, 1);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(idx.at(i, 0), i);
  const auto self = knn_self(pts, 1);
  EXPECT_EQ(self, idx);
}

TEST(Knn, DuplicatesTieTowardLowerIndex) {
  const std::vector<Point3> ref{{1, 1, 1}, {0, 0, 0}, {1, 1, 1}, {0, 0, 0}};
  const std::vector<Point3> q{{1, 1, 1}};
  const auto idx = knn(ref, q, 2);
  EXPECT_EQ(idx.at(0, 0), 0u);
  EXPECT_EQ(idx.at(0, 1), 2u);
  // the self row still starts with its own index
  const auto self = knn_self(ref, 2);
  EXPECT_EQ(self.at(2, 0), 2u);
  EXPECT_EQ(self.at(2, 1), 0u);
  EXPECT_EQ(self.at(3, 0), 3u);
  EXPECT_EQ(self.at(3, 1), 1u);
}

TEST(Knn, RejectsBadK) {
  std::mt19937_64 rng(3);
  const auto pts = oracle::random_cloud(rng, 5);
  EXPECT_THROW(knn(pts, pts, 6), ConfigError);
  EXPECT_THROW(knn_self(pts, 0), ConfigError);
}

TEST(Knn, FiftyPointsMatchesExhaustiveSort) {
  std::mt19937_64 rng(4);
  const auto pts = oracle::random_cloud(rng, 50);
  const auto got = knn(pts, pts, 8);
  const auto want = oracle::knn(pts, pts, 8, false);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(std::vector<std::uint32_t>(got.row(i).begin(), got.row(i).end()), want[i]);
  }
}

TEST(Knn, MatchesBruteForceOn200Clouds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const std::size_t n = 1 + rng() % 64;
    const std::size_t m = 1 + rng() % 16;
    const auto ref = oracle::random_cloud(rng, n);
    const auto q = oracle::random_cloud(rng, m);
    const std::size_t k = 1 + rng() % n;
    const auto got = knn(ref, q, k);
    const auto want = oracle::knn(ref, q, k, false);
    const auto self = knn_self(ref, k);
    const auto self_want = oracle::knn(ref, ref, k, true);
    for (std::size_t i = 0; i < m; ++i)
      ASSERT_EQ(std::vector<std::uint32_t>(got.row(i).begin(), got.row(i).end()), want[i]) << "seed " << seed;
    for (std::size_t i = 0; i < n; ++i)
      ASSERT_EQ(std::vector<std::uint32_t>(self.row(i).begin(), self.row(i).end()), self_want[i])
          << "seed " << seed;
  }
}

TEST(Knn, RowsSortedAndPermutationStable) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = oracle::random_cloud(rng, 40);
    const auto idx = knn_self(pts, 6);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 2; j < 6; ++j) {
        EXPECT_LE(squared_distance(pts[i], pts[idx.at(i, j - 1)]), squared_distance(pts[i], pts[idx.at(i, j)]));
      }
    }
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Point3> shuffled(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) shuffled[i] = pts[perm[i]];
    const auto sidx = knn_self(shuffled, 6);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::set<std::size_t> a, b;
      for (std::size_t j = 0; j < 6; ++j) {
        a.insert(idx.at(perm[i], j));
        b.insert(perm[sidx.at(i, j)]);
      }
      EXPECT_EQ(a, b);
    }
  }
}

TEST(Normalize, Examples) {
  std::vector<Point3> cube;
  for (int i = 0; i < 8; ++i) cube.push_back({10.0 * (i & 1), 10.0 * ((i >> 1) & 1), 10.0 * ((i >> 2) & 1)});
  const auto n = normalize_cloud(cube);
  const Point3 c = centroid(n);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(c[a], 0.0, 1e-12);
  for (const auto& p : n) EXPECT_NEAR(std::sqrt(squared_distance(p, {0, 0, 0})), 1.0, 1e-12);
  // closed form: corner (0,0,0) -> -(5,5,5)/(5*sqrt(3))
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(n[0][a], -1.0 / std::sqrt(3.0), 1e-12);

  const auto single = normalize_cloud(std::vector<Point3>{{3.5, -2.0, 9.0}});
  EXPECT_EQ(single[0], (Point3{0, 0, 0}));

  const auto coincident = normalize_cloud(std::vector<Point3>(4, Point3{1, 2, 3}));
  for (const auto& p : coincident) EXPECT_EQ(p, (Point3{0, 0, 0}));
}

TEST(Normalize, IdempotentAndTranslationInvariant) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = oracle::random_cloud(rng, 30, 3.0);
    const auto n = normalize_cloud(pts);
    const Point3 c = centroid(n);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(c[a], 0.0, 1e-9);
    EXPECT_LE(max_radius(n), 1.0 + 1e-9);
    const auto twice = normalize_cloud(n);
    const Point3 t{u(rng), u(rng), u(rng)};
    auto moved = pts;
    for (auto& p : moved)
      for (int a = 0; a < 3; ++a) p[a] += t[a];
    const auto nm = normalize_cloud(moved);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        EXPECT_NEAR(twice[i][a], n[i][a], 1e-12);
        EXPECT_NEAR(nm[i][a], n[i][a], 1e-9);
      }
    }
  }
}

TEST(MeshSampling, OneTriangleStaysOnPlane) {
  TriMesh m;
  m.vertices = {{1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
  m.faces = {{0, 1, 2}};
  const auto pts = sample_mesh_surface(m, 500, 9);
  ASSERT_EQ(pts.size(), 500u);
  for (const auto& p : pts) {
    // plane x + y/2 + z/3 = 1, inside the triangle
    EXPECT_NEAR(p[0] + p[1] / 2 + p[2] / 3, 1.0, 1e-9);
    for (int a = 0; a < 3; ++a) EXPECT_GE(p[a], -1e-12);
  }
}

TEST(MeshSampling, ZeroAreaFacesNeverChosen) {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}, {6, 6, 6}, {7, 7, 7}};
  m.faces = {{3, 4, 5}, {0, 1, 2}, {3, 3, 4}};
  for (const auto& p : sample_mesh_surface(m, 1000, 1)) EXPECT_EQ(p[2], 0.0);
  TriMesh flat;
  flat.vertices = {{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
  flat.faces = {{0, 1, 2}};
  EXPECT_THROW(sample_mesh_surface(flat, 10, 1), ConfigError);
}

TEST(MeshSampling, UnitCubeMean) {
  const auto pts = sample_mesh_surface(unit_cube_mesh(), 10000, 42);
  const Point3 c = centroid(pts);
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(c[a], 0.5, 0.05);
}

TEST(MeshSampling, PureInSeed) {
  const auto mesh = unit_cube_mesh();
  EXPECT_EQ(sample_mesh_surface(mesh, 300, 5), sample_mesh_surface(mesh, 300, 5));
  EXPECT_NE(sample_mesh_surface(mesh, 300, 5), sample_mesh_surface(mesh, 300, 6));
}

TEST(MeshSampling, AreaProportionalFaceChoice) {
  // two disjoint triangles with area ratio 1:3
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 5}, {3, 0, 5}, {0, 1, 5}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  EXPECT_DOUBLE_EQ(triangle_area(m.vertices[3], m.vertices[4], m.vertices[5]), 1.5);
  const auto pts = sample_mesh_surface(m, 20000, 3);
  const double upper = std::count_if(pts.begin(), pts.end(), [](const Point3& p) { return p[2] > 2.5; });
  EXPECT_NEAR(upper / 20000.0, 0.75, 0.02);
}
