#include "ptl/dataset.hpp"

#include <algorithm>
#include <numeric>

#include "ptl/error.hpp"
#include "ptl/random.hpp"

namespace ptl {

namespace fs = std::filesystem;

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<std::size_t> Dataset::label_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& item : items) {
    if (item.label >= counts.size()) {
      throw ConfigError("label " + std::to_string(item.label) + " out of range for " +
                        std::to_string(class_names.size()) + " classes");
    }
    ++counts[item.label];
  }
  return counts;
}

Dataset load_dataset_dir(const fs::path& root, Split split, std::size_t points_per_mesh,
                         std::uint64_t seed) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root not found: " + root.string());
  Dataset ds;
  ds.split = split;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("no class directories under " + root.string());

  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    ds.class_names.push_back(class_dirs[c].filename().string());
    const fs::path split_dir = class_dirs[c] / std::string(split_name(split));
    if (!fs::is_directory(split_dir)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(split_dir)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".off" || ext == ".pcld")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      PointCloud cloud;
      if (file.extension() == ".pcld") {
        cloud = read_pcld(file);
      } else {
        const std::string rel = fs::relative(file, root).generic_string();
        const auto pts =
            sample_mesh_surface(read_off(file), points_per_mesh, derive_seed(seed, {stable_hash(rel)}));
        cloud.positions = normalize_cloud(pts);
      }
      if (cloud.positions.empty()) throw FormatError(file.string() + ": empty point cloud");
      cloud.label = static_cast<std::uint32_t>(c);
      ds.items.push_back(std::move(cloud));
    }
  }
  if (ds.items.empty()) {
    throw ConfigError("no .off/.pcld files for split '" +
                      std::string(split_name(split)) + "' under " + root.string());
  }
  return ds;
}

std::vector<Point3> resample_points(std::span<const Point3> points, std::size_t count,
                                    std::uint64_t seed) {
  if (points.empty()) throw ConfigError("resample_points: empty cloud");
  if (points.size() == count) return {points.begin(), points.end()};
  Rng rng(seed);
  std::vector<Point3> out;
  out.reserve(count);
  if (points.size() > count) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `count` slots become a uniform subset.
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
      out.push_back(points[order[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(points[pick(rng)]);
  }
  return out;
}

std::vector<Batch> make_batches(const Dataset& dataset, const BatchSpec& spec, std::size_t epoch) {
  if (dataset.items.empty()) throw ConfigError("make_batches: empty dataset");
  if (spec.batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
  if (spec.points_per_cloud == 0) throw ConfigError("make_batches: points_per_cloud must be >= 1");

  std::vector<std::size_t> order(dataset.items.size());
  std::iota(order.begin(), order.end(), 0);
  const std::uint64_t epoch_tag = spec.shuffle ? epoch : 0;
  if (spec.shuffle) {
    Rng rng(derive_seed(spec.shuffle_seed, {0x5eed, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
  }

  const std::size_t p = spec.points_per_cloud;
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
    const std::size_t b = std::min(spec.batch_size, order.size() - start);
    Batch batch;
    std::vector<double> flat;
    flat.reserve(b * p * 3);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t item = order[start + i];
      const auto pts = resample_points(dataset.items[item].positions, p,
                                       derive_seed(spec.shuffle_seed, {0xc10d, epoch_tag, item}));
      for (const auto& q : pts) flat.insert(flat.end(), q.begin(), q.end());
      batch.labels.push_back(dataset.items[item].label);
      batch.items.push_back(item);
    }
    batch.positions = Tensor(Shape{b, p, 3}, std::move(flat));
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace ptl
