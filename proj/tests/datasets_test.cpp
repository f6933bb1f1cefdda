#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "ptl/dataset.hpp"
#include "ptl/error.hpp"
#include "ptl/random.hpp"

using namespace ptl;
namespace fs = std::filesystem;

namespace {

const char* kTriangle = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

std::size_t error_line(std::string_view text) {
  try {
    parse_off(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ptl_datasets_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double chamfer(const std::vector<Point3>& a, const std::vector<Point3>& b) {
  auto one_side = [](const std::vector<Point3>& x, const std::vector<Point3>& y) {
    double s = 0.0;
    for (const auto& p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y) best = std::min(best, squared_distance(p, q));
      s += best;
    }
    return s / static_cast<double>(x.size());
  };
  return one_side(a, b) + one_side(b, a);
}

}  // namespace

TEST(Off, MinimalTriangle) {
  const TriMesh m = parse_off(kTriangle);
  ASSERT_EQ(m.vertices.size(), 3u);
  ASSERT_EQ(m.faces.size(), 1u);
  EXPECT_EQ(m.vertices[1], (Point3{1, 0, 0}));
  EXPECT_EQ(m.faces[0], (std::array<std::uint32_t, 3>{0, 1, 2}));
}

TEST(Off, GluedHeaderMatches) {
  const TriMesh a = parse_off(kTriangle);
  const TriMesh b = parse_off("OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  EXPECT_EQ(a.vertices, b.vertices);
  EXPECT_EQ(a.faces, b.faces);
}

TEST(Off, QuadFanTriangulated) {
  const TriMesh m = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n");
  ASSERT_EQ(m.faces.size(), 2u);
  EXPECT_EQ(m.faces[0], (std::array<std::uint32_t, 3>{0, 1, 2}));
  EXPECT_EQ(m.faces[1], (std::array<std::uint32_t, 3>{0, 2, 3}));
}

TEST(Off, CommentsAndBlankLines) {
  const TriMesh m = parse_off("OFF\n# made by hand\n\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n\n3 0 1 2\n");
  EXPECT_EQ(m.faces.size(), 1u);
}

TEST(Off, ErrorsCarryLineNumbers) {
  EXPECT_THROW(parse_off(""), ParseError);
  EXPECT_THROW(parse_off("PLY\n"), ParseError);
  EXPECT_EQ(error_line("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n"), 4u);
  EXPECT_EQ(error_line("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n"), 6u);
  EXPECT_GT(error_line("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"), 0u);
  EXPECT_GT(error_line("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n"), 0u);
}

TEST(Off, WriterRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int trial = 0; trial < 20; ++trial) {
    TriMesh m;
    const std::size_t nv = 3 + rng() % 30;
    for (std::size_t i = 0; i < nv; ++i) m.vertices.push_back({u(rng), u(rng), u(rng)});
    for (std::size_t f = 0; f < 1 + rng() % 40; ++f) {
      m.faces.push_back({static_cast<std::uint32_t>(rng() % nv), static_cast<std::uint32_t>(rng() % nv),
                         static_cast<std::uint32_t>(rng() % nv)});
    }
    const TriMesh back = parse_off(write_off(m));
    EXPECT_EQ(back.vertices, m.vertices);
    EXPECT_EQ(back.faces, m.faces);
  }
}

TEST(Pcld, RoundTripIsBitwise) {
  std::mt19937_64 rng(2);
  PointCloud c;
  c.label = 7;
  c.positions = oracle::random_cloud(rng, 33, 1e6);
  c.positions[0] = {-0.0, std::numeric_limits<double>::denorm_min(), 1.0 / 3.0};
  const PointCloud back = decode_pcld(encode_pcld(c));
  EXPECT_EQ(back.label, 7u);
  ASSERT_EQ(back.positions.size(), c.positions.size());
  for (std::size_t i = 0; i < c.positions.size(); ++i)
    for (int a = 0; a < 3; ++a)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back.positions[i][a]), std::bit_cast<std::uint64_t>(c.positions[i][a]));

  const fs::path dir = scratch_dir("pcld");
  write_pcld(dir / "c.pcld", c);
  EXPECT_EQ(read_pcld(dir / "c.pcld").positions, c.positions);
  fs::remove_all(dir);
}

TEST(Pcld, LayoutIsLittleEndian) {
  PointCloud c;
  c.label = 3;
  c.positions = {{1.0, 2.0, 3.0}};
  const std::string bytes = encode_pcld(c);
  ASSERT_EQ(bytes.size(), 4u + 12u + 24u);
  EXPECT_EQ(bytes.substr(0, 4), "PCLD");
  const std::string header("\x01\0\0\0\x03\0\0\0\x01\0\0\0", 12);
  EXPECT_EQ(bytes.substr(4, 12), header);
  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(bytes.substr(16, 8), std::string("\0\0\0\0\0\0\xF0\x3F", 8));
}

TEST(Pcld, CorruptInputs) {
  EXPECT_THROW(decode_pcld(""), FormatError);
  try {
    decode_pcld("");
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
  PointCloud two;
  two.positions = {{1, 2, 3}, {4, 5, 6}};
  const std::string full = encode_pcld(two);
  try {
    decode_pcld(full.substr(0, full.size() - 24));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  std::string v2 = full;
  v2[4] = 2;
  EXPECT_THROW(decode_pcld(v2), FormatError);
  EXPECT_THROW(decode_pcld(full + "x"), FormatError);
}

TEST(Synth, NamesAndIds) {
  ASSERT_EQ(synth_class_names().size(), kSynthClassCount);
  EXPECT_EQ(synth_class_id("torus"), 3u);
  EXPECT_THROW(synth_class_id("dodecahedron"), ConfigError);
  EXPECT_THROW(synth_generate(10, 0, 64), ConfigError);
  EXPECT_THROW(synth_generate(0, 0, 7), ConfigError);
}

TEST(Synth, NoiselessSphereHasEqualRadii) {
  const PointCloud c = synth_generate(synth_class_id("sphere"), 4, 200, 0.0);
  for (const auto& p : c.positions) EXPECT_NEAR(std::sqrt(squared_distance(p, {0, 0, 0})), 1.0, 1e-9);
}

TEST(Synth, DeterministicAndNormalized) {
  for (std::uint32_t cls = 0; cls < kSynthClassCount; ++cls) {
    const PointCloud a = synth_generate(cls, 11, 128);
    const PointCloud b = synth_generate(cls, 11, 128);
    EXPECT_EQ(a.positions, b.positions);
    EXPECT_EQ(a.label, cls);
    EXPECT_NE(a.positions, synth_generate(cls, 12, 128).positions);
    Point3 c{0, 0, 0};
    double r = 0.0;
    for (const auto& p : a.positions) {
      for (int ax = 0; ax < 3; ++ax) c[ax] += p[ax] / 128.0;
      r = std::max(r, std::sqrt(squared_distance(p, {0, 0, 0})));
    }
    for (int ax = 0; ax < 3; ++ax) EXPECT_NEAR(c[ax], 0.0, 1e-9);
    EXPECT_LE(r, 1.0 + 1e-9);
  }
}

TEST(Synth, ChamferNearestNeighborSeparatesFamilies) {
  // leave-one-out 1-NN over 100 clouds per family, 64 points each
  constexpr std::size_t per_class = 100, points = 64;
  std::vector<std::vector<Point3>> clouds;
  std::vector<std::uint32_t> labels;
  for (std::uint32_t cls = 0; cls < kSynthClassCount; ++cls) {
    for (std::size_t i = 0; i < per_class; ++i) {
      clouds.push_back(synth_generate(cls, derive_seed(77, {cls, i}), points).positions);
      labels.push_back(cls);
    }
  }
  const std::size_t n = clouds.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = chamfer(clouds[i], clouds[j]);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && dist[i * n + j] < dist[i * n + best]) best = j;
    correct += labels[best] == labels[i];
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(n);
  EXPECT_GE(acc, 0.95) << "1-NN accuracy " << acc;
}

TEST(Synth, DatasetIsBalancedAndRemapped) {
  SynthSpec spec;
  spec.classes = {synth_class_id("torus"), synth_class_id("line")};
  spec.per_class = 3;
  spec.points = 32;
  const Dataset train = make_synth_dataset(spec, Split::train);
  const Dataset test = make_synth_dataset(spec, Split::test);
  EXPECT_EQ(train.class_names, (std::vector<std::string>{"torus", "line"}));
  EXPECT_EQ(train.label_counts(), (std::vector<std::size_t>{3, 3}));
  for (std::size_t i = 0; i < train.items.size(); ++i)
    for (std::size_t j = 0; j < test.items.size(); ++j)
      EXPECT_NE(train.items[i].positions, test.items[j].positions);
}

TEST(Batches, SizesAndDeterminism) {
  SynthSpec spec;
  spec.classes = {0, 1};
  spec.per_class = 5;
  spec.points = 40;
  const Dataset ds = make_synth_dataset(spec, Split::train);
  BatchSpec bs;
  bs.batch_size = 4;
  bs.points_per_cloud = 16;
  bs.shuffle_seed = 9;
  const auto e0 = make_batches(ds, bs, 0);
  ASSERT_EQ(e0.size(), 3u);
  EXPECT_EQ(e0[0].labels.size(), 4u);
  EXPECT_EQ(e0[1].labels.size(), 4u);
  EXPECT_EQ(e0[2].labels.size(), 2u);
  EXPECT_EQ(e0[2].positions.shape(), (Shape{2, 16, 3}));

  std::set<std::size_t> seen;
  for (const auto& b : e0) seen.insert(b.items.begin(), b.items.end());
  EXPECT_EQ(seen.size(), 10u);

  const auto again = make_batches(ds, bs, 0);
  for (std::size_t i = 0; i < e0.size(); ++i) {
    EXPECT_EQ(e0[i].items, again[i].items);
    EXPECT_TRUE(bitwise_equal(e0[i].positions, again[i].positions));
  }
  const auto e1 = make_batches(ds, bs, 1);
  std::vector<std::size_t> o0, o1;
  for (const auto& b : e0) o0.insert(o0.end(), b.items.begin(), b.items.end());
  for (const auto& b : e1) o1.insert(o1.end(), b.items.begin(), b.items.end());
  EXPECT_NE(o0, o1);

  bs.shuffle = false;
  std::vector<std::size_t> ordered;
  for (const auto& b : make_batches(ds, bs, 3)) ordered.insert(ordered.end(), b.items.begin(), b.items.end());
  std::vector<std::size_t> want(10);
  for (std::size_t i = 0; i < 10; ++i) want[i] = i;
  EXPECT_EQ(ordered, want);

  EXPECT_THROW(make_batches(Dataset{}, bs, 0), ConfigError);
}

TEST(Batches, ResampleDrawsFromOriginal) {
  std::mt19937_64 rng(3);
  const auto pts = oracle::random_cloud(rng, 8);
  const auto up = resample_points(pts, 16, 5);
  ASSERT_EQ(up.size(), 16u);
  for (const auto& p : up) EXPECT_NE(std::find(pts.begin(), pts.end(), p), pts.end());
  const auto down = resample_points(pts, 5, 5);
  std::set<Point3> unique(down.begin(), down.end());
  EXPECT_EQ(unique.size(), 5u);
  for (const auto& p : down) EXPECT_NE(std::find(pts.begin(), pts.end(), p), pts.end());
  EXPECT_EQ(resample_points(pts, 16, 5), up);
}

TEST(DatasetDir, LoadsOffAndPcldWithSortedClasses) {
  const fs::path root = scratch_dir("dir");
  fs::create_directories(root / "b_tri" / "train");
  fs::create_directories(root / "a_cloud" / "train");
  fs::create_directories(root / "a_cloud" / "test");
  std::ofstream(root / "b_tri" / "train" / "t.off") << kTriangle;
  PointCloud c;
  c.positions = {{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
  write_pcld(root / "a_cloud" / "train" / "x.pcld", c);
  write_pcld(root / "a_cloud" / "test" / "y.pcld", c);

  const Dataset ds = load_dataset_dir(root, Split::train, 50, 1);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"a_cloud", "b_tri"}));
  ASSERT_EQ(ds.items.size(), 2u);
  EXPECT_EQ(ds.label_counts(), (std::vector<std::size_t>{1, 1}));
  for (const auto& item : ds.items) {
    if (item.label == 1) {
      EXPECT_EQ(item.positions.size(), 50u);
      for (const auto& p : item.positions) EXPECT_NEAR(p[2], 0.0, 1e-12);
    }
  }
  EXPECT_THROW(load_dataset_dir(root / "missing", Split::train, 50, 1), ConfigError);
  fs::remove_all(root);
}
