#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptl/config.hpp"
#include "ptl/geometry.hpp"
#include "ptl/neighbor_index.hpp"
#include "ptl/tape.hpp"
#include "ptl/tensor.hpp"

namespace ptl {

enum class ModelKind { transformer, mlp };
enum class AttentionKind { vector, scalar };

std::string_view to_string(ModelKind kind);
std::string_view to_string(AttentionKind kind);

/// Architecture hyperparameters.
///
/// Transformer: a pointwise MLP lifts xyz to widths[0]; stage s runs a point
/// transformer layer at widths[s] followed by a transition down to
/// widths[min(s + 1, S - 1)]; a final transformer layer, global mean pool and
/// a two-layer head produce the logits. Neighborhood sizes are clamped to
/// the number of points left at each level.
struct ModelConfig {
  ModelKind kind = ModelKind::transformer;
  std::vector<std::size_t> widths{32, 64};
  std::size_t k = 16;
  double ratio = 0.25;
  std::size_t num_classes = 10;
  std::size_t head_hidden = 64;
  /// Hidden width of the position encoding MLP; 0 means "stage width".
  std::size_t pos_hidden = 0;
  AttentionKind attention = AttentionKind::vector;
  /// Hidden width of the MLP baseline's four dense layers.
  std::size_t mlp_hidden = 64;

  void validate() const;
  /// `model.*` keys.
  void write_to(KeyValues& kv) const;
  static ModelConfig read_from(const KeyValues& kv);
  /// Same architecture apart from the class count.
  bool same_backbone(const ModelConfig& other) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors in a fixed order.
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor tensor);
  void replace(std::string_view name, Tensor tensor);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }
  std::vector<std::string> names() const;
  std::vector<Tensor> tensors() const;

  /// Deep copy; the copies require grad like the originals.
  ParamStore clone() const;

 private:
  std::vector<Entry> entries_;
};

struct ModelParams {
  ModelConfig config;
  ParamStore tensors;

  ModelParams clone() const { return {config, tensors.clone()}; }
};

/// Expected (name, shape) of every parameter for `config`, in storage order.
std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config);

/// Classification head tensors are those prefixed "head.".
bool is_head_param(std::string_view name);

/// Uniform(-a, a) weights with a = sqrt(3 / fan_in) so Var = 1/fan_in; zero biases.
/// Each tensor draws from a stream keyed by (seed, name).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Fresh head for `new_num_classes`; backbone tensors are copied bitwise.
ModelParams reinit_head(const ModelParams& params, std::size_t new_num_classes, std::uint64_t seed);

/// Throws ConfigError listing missing/unexpected names, ShapeError on extents.
void validate_params(const ParamStore& store, const ModelConfig& config);

// ---- layers -------------------------------------------------------------------

struct Dense {
  Tensor weight;  ///< in × out
  Tensor bias;    ///< out
};

/// phi, psi, alpha: C×C; pos1: 3×C_pos, pos2: C_pos×C (position encoding);
/// gamma1, gamma2: C×C (attention MLP).
struct LayerParams {
  Dense phi, psi, alpha, pos1, pos2, gamma1, gamma2;
};

LayerParams layer_params(const ParamStore& store, const std::string& prefix);
Dense dense_params(const ParamStore& store, const std::string& prefix);

struct AttentionOutput {
  Tensor features;  ///< N × C
  Tensor weights;   ///< N × k × C (vector) or N × k × 1 (scalar)
};

/// Vector self-attention over each point's neighborhood:
///   delta_ij = pos2(relu(pos1(p_i - p_j)))
///   logits_ij = gamma2(relu(gamma1(phi(x_i) - psi(x_j) + delta_ij)))
///   w_ij = softmax over j, separately per channel
///   y_i = x_i + sum_j w_ij * (alpha(x_j) + delta_ij)
/// The scalar variant averages the logits over channels before the softmax.
AttentionOutput point_transformer_layer(Tape& tape, const Tensor& features,
                                        std::span<const Point3> positions,
                                        const NeighborIndex& neighbors, const LayerParams& params,
                                        AttentionKind kind = AttentionKind::vector);

struct TransitionDownOutput {
  Tensor features;  ///< M × C_out
  std::vector<Point3> positions;
  std::vector<std::size_t> centers;
};

/// M = ceil(ratio · N) FPS centers; each pools relu(lift(x)) channelwise by
/// max over its k nearest original points.
TransitionDownOutput transition_down(Tape& tape, const Tensor& features,
                                     std::span<const Point3> positions, double ratio,
                                     std::size_t k, const Dense& lift, std::size_t start);

std::size_t transition_count(std::size_t n, double ratio);

// ---- full models --------------------------------------------------------------

enum class StartPolicy { canonical, random };

struct ForwardOptions {
  /// canonical: lexicographically smallest point starts every FPS (eval).
  /// random: seeded random starts (training augmentation).
  StartPolicy start = StartPolicy::canonical;
  std::uint64_t seed = 0;
};

/// positions B × P × 3 -> logits B × num_classes.
Tensor forward_classifier(Tape& tape, const Tensor& positions, const ModelParams& params,
                          const ForwardOptions& options = {});

/// Logits [num_classes] for one cloud.
Tensor forward_cloud(Tape& tape, std::span<const Point3> points, const ModelParams& params,
                     const ForwardOptions& options = {}, std::uint64_t cloud_tag = 0);

constexpr std::size_t kRadialBins = 16;
constexpr std::size_t kMlpEmbedding = 6 + kRadialBins;

/// Centroid, per-axis variance and a 16-bin histogram of r / r_max (fractions).
std::vector<double> mlp_embedding(std::span<const Point3> points);

/// Four relu dense layers on the pooled embedding, then a two-layer head.
Tensor mlp_baseline_forward(Tape& tape, const Tensor& positions, const ModelParams& params);

/// Dispatches on params.config.kind.
Tensor forward_logits(Tape& tape, const Tensor& positions, const ModelParams& params,
                      const ForwardOptions& options = {});

std::vector<Point3> to_points(const Tensor& positions);

}  // namespace ptl
