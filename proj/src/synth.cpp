#include <cmath>
#include <numbers>

#include "ptl/dataset.hpp"
#include "ptl/error.hpp"
#include "ptl/random.hpp"

namespace ptl {

namespace {

constexpr double kPi = std::numbers::pi;

using Unit = std::uniform_real_distribution<double>;

Point3 random_direction(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Point3 d{g(rng), g(rng), g(rng)};
    const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    if (n > 1e-12) return {d[0] / n, d[1] / n, d[2] / n};
  }
}

Point3 cross(const Point3& a, const Point3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Antipodal pairs (plus one 120° triple for odd n) so the centroid is exactly
// the sphere center and normalization preserves equal radii.
void sphere(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  std::size_t remaining = n;
  if (n % 2 == 1) {
    const Point3 p = random_direction(rng);
    Point3 axis = cross(p, random_direction(rng));
    const double an = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    for (auto& c : axis) c /= an;
    const Point3 q = cross(axis, p);  // unit, orthogonal to p within the great circle
    for (int t = 0; t < 3; ++t) {
      const double ang = 2.0 * kPi * t / 3.0;
      const double c = std::cos(ang), s = std::sin(ang);
      out.push_back({c * p[0] + s * q[0], c * p[1] + s * q[1], c * p[2] + s * q[2]});
    }
    remaining -= 3;
  }
  for (std::size_t i = 0; i < remaining / 2; ++i) {
    const Point3 d = random_direction(rng);
    out.push_back(d);
    out.push_back({-d[0], -d[1], -d[2]});
  }
}

void cube(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  Unit u(-1.0, 1.0);
  std::uniform_int_distribution<int> face(0, 5);
  for (std::size_t i = 0; i < n; ++i) {
    const int f = face(rng);
    Point3 p{u(rng), u(rng), u(rng)};
    p[f / 2] = (f % 2) ? 1.0 : -1.0;
    out.push_back(p);
  }
}

void cylinder(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  const double h = Unit(1.5, 2.5)(rng);
  const double side = 2.0 * kPi * h, cap = kPi;
  Unit u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * u(rng);
    const double pick = u(rng) * (side + 2.0 * cap);
    if (pick < side) {
      out.push_back({std::cos(a), std::sin(a), h * (u(rng) - 0.5)});
    } else {
      const double r = std::sqrt(u(rng));
      out.push_back({r * std::cos(a), r * std::sin(a), pick < side + cap ? -h / 2 : h / 2});
    }
  }
}

void torus(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  const double tube = Unit(0.25, 0.4)(rng);
  Unit u(0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    const double r = 1.0 + tube * std::cos(b);
    out.push_back({r * std::cos(a), r * std::sin(a), tube * std::sin(b)});
  }
}

void cone(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  const double h = Unit(1.5, 2.5)(rng);
  const double lateral = kPi * std::sqrt(1.0 + h * h), base = kPi;
  Unit u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * u(rng);
    const double r = std::sqrt(u(rng));
    if (u(rng) * (lateral + base) < lateral) {
      out.push_back({r * std::cos(a), r * std::sin(a), h * (1.0 - r)});
    } else {
      out.push_back({r * std::cos(a), r * std::sin(a), 0.0});
    }
  }
}

void plane(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  const double aspect = Unit(0.6, 1.0)(rng);
  Unit u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) out.push_back({u(rng), aspect * u(rng), 0.0});
}

void helix(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  const double turns = Unit(2.0, 4.0)(rng);
  const double pitch = Unit(0.4, 0.6)(rng);
  Unit u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 2.0 * kPi * turns * u(rng);
    out.push_back({std::cos(t), std::sin(t), pitch * t / (2.0 * kPi)});
  }
}

void plus_cross(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  Unit u(-1.0, 1.0);
  std::bernoulli_distribution which(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = u(rng);
    out.push_back(which(rng) ? Point3{s, 0.0, 0.0} : Point3{0.0, s, 0.0});
  }
}

void two_spheres(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  const double gap = Unit(0.8, 1.2)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 d = random_direction(rng);
    const double cx = (i % 2 == 0) ? gap : -gap;
    out.push_back({cx + 0.5 * d[0], 0.5 * d[1], 0.5 * d[2]});
  }
}

void line(Rng& rng, std::size_t n, std::vector<Point3>& out) {
  Unit u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) out.push_back({u(rng), 0.0, 0.0});
}

}  // namespace

const std::vector<std::string>& synth_class_names() {
  static const std::vector<std::string> names = {"sphere", "cube",  "cylinder", "torus",
                                                 "cone",   "plane", "helix",    "cross",
                                                 "two_spheres", "line"};
  return names;
}

std::uint32_t synth_class_id(std::string_view name) {
  const auto& names = synth_class_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<std::uint32_t>(i);
  }
  throw ConfigError("unknown synthetic class '" + std::string(name) + "'");
}

PointCloud synth_generate(std::uint32_t class_id, std::uint64_t seed, std::size_t n_points,
                          double sigma) {
  if (class_id >= kSynthClassCount) {
    throw ConfigError("unknown synthetic class id " + std::to_string(class_id));
  }
  if (n_points < 8) throw ConfigError("synth_generate: need at least 8 points");
  Rng rng(derive_seed(seed, {class_id}));
  std::vector<Point3> pts;
  pts.reserve(n_points);
  switch (class_id) {
    case 0: sphere(rng, n_points, pts); break;
    case 1: cube(rng, n_points, pts); break;
    case 2: cylinder(rng, n_points, pts); break;
    case 3: torus(rng, n_points, pts); break;
    case 4: cone(rng, n_points, pts); break;
    case 5: plane(rng, n_points, pts); break;
    case 6: helix(rng, n_points, pts); break;
    case 7: plus_cross(rng, n_points, pts); break;
    case 8: two_spheres(rng, n_points, pts); break;
    default: line(rng, n_points, pts); break;
  }
  if (sigma > 0.0) {
    std::normal_distribution<double> jitter(0.0, sigma);
    for (auto& p : pts) {
      for (auto& c : p) c += jitter(rng);
    }
  }
  PointCloud cloud;
  cloud.positions = normalize_cloud(pts);
  cloud.label = class_id;
  return cloud;
}

Dataset make_synth_dataset(const SynthSpec& spec, Split split) {
  if (spec.classes.empty()) throw ConfigError("synthetic dataset needs at least one class");
  if (spec.per_class == 0) throw ConfigError("synthetic dataset needs per_class >= 1");
  Dataset ds;
  ds.split = split;
  for (auto id : spec.classes) {
    if (id >= kSynthClassCount) throw ConfigError("unknown synthetic class id " + std::to_string(id));
    ds.class_names.push_back(synth_class_names()[id]);
  }
  const std::uint64_t split_tag = split == Split::train ? 0 : 1;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      PointCloud cloud = synth_generate(spec.classes[c], derive_seed(spec.seed, {split_tag, spec.classes[c], i}),
                                        spec.points, spec.sigma);
      cloud.label = static_cast<std::uint32_t>(c);
      ds.items.push_back(std::move(cloud));
    }
  }
  return ds;
}

}  // namespace ptl
