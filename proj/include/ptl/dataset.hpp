#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ptl/geometry.hpp"
#include "ptl/tensor.hpp"

namespace ptl {

struct PointCloud {
  std::vector<Point3> positions;
  /// Optional per-point features, row-major positions.size() × feature_channels.
  std::vector<double> features;
  std::size_t feature_channels = 0;
  std::uint32_t label = 0;
};

enum class Split { train, test };
std::string_view split_name(Split split);

struct Dataset {
  std::vector<PointCloud> items;
  std::vector<std::string> class_names;
  Split split = Split::train;

  std::size_t num_classes() const { return class_names.size(); }
  /// Example count per label; throws if any label is out of range.
  std::vector<std::size_t> label_counts() const;
};

// ---- OFF meshes ------------------------------------------------------------

/// Parses OFF text, including the "OFF<nv> <nf> <ne>" glued header that some
/// ModelNet files carry. Polygons with more than three vertices are fan
/// triangulated. Errors carry the offending line number.
TriMesh parse_off(std::string_view text);
TriMesh read_off(const std::filesystem::path& path);
/// Emits OFF with round-trip (17 significant digit) coordinates.
std::string write_off(const TriMesh& mesh);

// ---- PCLD point-cloud container ---------------------------------------------
//
//   "PCLD" | u32 version = 1 | u32 label | u32 count | count × 3 × f64
//   all little-endian.

constexpr std::uint32_t kPcldVersion = 1;

std::string encode_pcld(const PointCloud& cloud);
PointCloud decode_pcld(std::string_view bytes);
void write_pcld(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_pcld(const std::filesystem::path& path);

// ---- synthetic shape families ------------------------------------------------

constexpr std::size_t kSynthClassCount = 10;
/// sphere, cube, cylinder, torus, cone, plane, helix, cross, two_spheres, line
const std::vector<std::string>& synth_class_names();
/// Class id for a family name; throws ConfigError for unknown names.
std::uint32_t synth_class_id(std::string_view name);

/// Points on the family's surface with N(0, sigma²) jitter, then normalized.
/// Deterministic in (class_id, seed, n_points, sigma).
PointCloud synth_generate(std::uint32_t class_id, std::uint64_t seed, std::size_t n_points,
                          double sigma = 0.02);

struct SynthSpec {
  std::vector<std::uint32_t> classes;  ///< family ids; label i is classes[i]
  std::size_t per_class = 10;
  std::size_t points = 256;
  double sigma = 0.02;
  std::uint64_t seed = 0;
};

/// Balanced dataset with labels remapped to 0..classes.size()-1.
Dataset make_synth_dataset(const SynthSpec& spec, Split split);

// ---- directory corpora --------------------------------------------------------

/// Loads root/<class_name>/<split>/<name>.(off|pcld). Classes are the sorted
/// subdirectory names. OFF meshes are surface-sampled to `points_per_mesh`
/// and normalized; the sampling seed is derived from `seed` and the file name.
Dataset load_dataset_dir(const std::filesystem::path& root, Split split,
                         std::size_t points_per_mesh, std::uint64_t seed);

// ---- batching ------------------------------------------------------------------

struct BatchSpec {
  std::size_t batch_size = 16;
  std::uint64_t shuffle_seed = 0;
  std::size_t points_per_cloud = 256;
  /// Off: dataset order, same resampling every epoch (evaluation).
  bool shuffle = true;
};

struct Batch {
  Tensor positions;  ///< B × P × 3
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> items;  ///< dataset indices, in batch order
};

/// One epoch of batches. The order is a permutation seeded by
/// (shuffle_seed, epoch); each cloud is resampled to exactly P points
/// (subsample without replacement when larger, with replacement when
/// smaller). The last short batch is kept.
std::vector<Batch> make_batches(const Dataset& dataset, const BatchSpec& spec, std::size_t epoch);

/// Deterministic resampling of one cloud to exactly `count` points.
std::vector<Point3> resample_points(std::span<const Point3> points, std::size_t count,
                                    std::uint64_t seed);

}  // namespace ptl
