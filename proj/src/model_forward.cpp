#include <algorithm>
#include <cmath>

#include "ptl/error.hpp"
#include "ptl/model.hpp"
#include "ptl/ops.hpp"
#include "ptl/random.hpp"

namespace ptl {

Dense dense_params(const ParamStore& store, const std::string& prefix) {
  return {store.at(prefix + ".weight"), store.at(prefix + ".bias")};
}

LayerParams layer_params(const ParamStore& store, const std::string& prefix) {
  return {dense_params(store, prefix + "phi"),    dense_params(store, prefix + "psi"),
          dense_params(store, prefix + "alpha"),  dense_params(store, prefix + "pos1"),
          dense_params(store, prefix + "pos2"),   dense_params(store, prefix + "gamma1"),
          dense_params(store, prefix + "gamma2")};
}

std::vector<Point3> to_points(const Tensor& positions) {
  if (positions.rank() != 2 || positions.dim(1) != 3) {
    throw ShapeError("expected N×3 positions, got " + shape_str(positions.shape()));
  }
  auto d = positions.data();
  std::vector<Point3> out(positions.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
  return out;
}

namespace {

Tensor points_tensor(std::span<const Point3> points) {
  std::vector<double> flat;
  flat.reserve(points.size() * 3);
  for (const auto& p : points) flat.insert(flat.end(), p.begin(), p.end());
  return Tensor(Shape{points.size(), 3}, std::move(flat));
}

Tensor apply(Tape& tape, const Tensor& x, const Dense& d) { return linear(tape, x, d.weight, d.bias); }

}  // namespace

AttentionOutput point_transformer_layer(Tape& tape, const Tensor& features,
                                        std::span<const Point3> positions,
                                        const NeighborIndex& neighbors, const LayerParams& params,
                                        AttentionKind kind) {
  if (features.rank() != 2) {
    throw ShapeError("point_transformer_layer: features must be N×C, got " +
                     shape_str(features.shape()));
  }
  const std::size_t n = features.dim(0);
  if (positions.size() != n || neighbors.rows != n) {
    throw ShapeError("point_transformer_layer: " + std::to_string(n) + " feature rows, " +
                     std::to_string(positions.size()) + " positions, " +
                     std::to_string(neighbors.rows) + " neighbor rows");
  }
  const NeighborIndex centers = NeighborIndex::self(n, neighbors.k);
  const Tensor pos = points_tensor(positions);

  // Position encoding of p_i - p_j; positions carry no gradient.
  const Tensor rel = sub(tape, gather_rows(tape, pos, centers), gather_rows(tape, pos, neighbors));
  const Tensor delta = apply(tape, relu(tape, apply(tape, rel, params.pos1)), params.pos2);

  const Tensor query = gather_rows(tape, apply(tape, features, params.phi), centers);
  const Tensor key = gather_rows(tape, apply(tape, features, params.psi), neighbors);
  const Tensor value = add(tape, gather_rows(tape, apply(tape, features, params.alpha), neighbors), delta);

  Tensor logits = add(tape, sub(tape, query, key), delta);
  logits = apply(tape, relu(tape, apply(tape, logits, params.gamma1)), params.gamma2);
  if (kind == AttentionKind::scalar) {
    logits = reshape(tape, reduce(tape, logits, 2, ReduceKind::mean), Shape{n, neighbors.k, 1});
  }
  const Tensor weights = softmax(tape, logits, 1);  // across neighbors, per channel
  const Tensor mixed = reduce(tape, mul(tape, value, weights), 1, ReduceKind::sum);
  return {add(tape, mixed, features), weights};
}

std::size_t transition_count(std::size_t n, double ratio) {
  // The epsilon keeps products like 0.1 * 30 from rounding up to an extra center.
  const auto m = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(m, 1, n);
}

TransitionDownOutput transition_down(Tape& tape, const Tensor& features,
                                     std::span<const Point3> positions, double ratio,
                                     std::size_t k, const Dense& lift, std::size_t start) {
  const std::size_t n = positions.size();
  if (features.rank() != 2 || features.dim(0) != n) {
    throw ShapeError("transition_down: features " + shape_str(features.shape()) + " vs " +
                     std::to_string(n) + " positions");
  }
  TransitionDownOutput out;
  out.centers = farthest_point_sample(positions, transition_count(n, ratio), start);
  out.positions.reserve(out.centers.size());
  for (auto c : out.centers) out.positions.push_back(positions[c]);
  const NeighborIndex groups = knn(positions, out.positions, std::min(k, n));
  const Tensor lifted = relu(tape, apply(tape, features, lift));
  out.features = reduce(tape, gather_rows(tape, lifted, groups), 1, ReduceKind::max);
  return out;
}

Tensor forward_cloud(Tape& tape, std::span<const Point3> points, const ModelParams& params,
                     const ForwardOptions& options, std::uint64_t cloud_tag) {
  const ModelConfig& cfg = params.config;
  if (cfg.kind != ModelKind::transformer) {
    throw ConfigError("forward_cloud: model kind is " + std::string(to_string(cfg.kind)));
  }
  if (points.size() < cfg.k) {
    throw ConfigError("cloud has " + std::to_string(points.size()) + " points, fewer than k=" +
                      std::to_string(cfg.k));
  }
  const ParamStore& ps = params.tensors;
  std::vector<Point3> pts(points.begin(), points.end());
  Tensor x = apply(tape, relu(tape, apply(tape, points_tensor(pts), dense_params(ps, "embed.fc1"))),
                   dense_params(ps, "embed.fc2"));

  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    const std::string stage = "stage" + std::to_string(s);
    const NeighborIndex nbr = knn_self(pts, std::min(cfg.k, pts.size()));
    x = point_transformer_layer(tape, x, pts, nbr, layer_params(ps, stage + ".attn."), cfg.attention)
            .features;
    std::size_t start = 0;
    if (options.start == StartPolicy::canonical) {
      start = canonical_start(pts);
    } else {
      Rng rng(derive_seed(options.seed, {cloud_tag, s}));
      start = std::uniform_int_distribution<std::size_t>(0, pts.size() - 1)(rng);
    }
    auto down = transition_down(tape, x, pts, cfg.ratio, cfg.k, dense_params(ps, stage + ".down"), start);
    x = down.features;
    pts = std::move(down.positions);
  }
  const NeighborIndex nbr = knn_self(pts, std::min(cfg.k, pts.size()));
  x = point_transformer_layer(tape, x, pts, nbr, layer_params(ps, "final.attn."), cfg.attention)
          .features;

  const Tensor pooled = reduce(tape, x, 0, ReduceKind::mean);
  const Tensor hidden = relu(tape, apply(tape, pooled, dense_params(ps, "head.fc1")));
  return apply(tape, hidden, dense_params(ps, "head.fc2"));
}

Tensor forward_classifier(Tape& tape, const Tensor& positions, const ModelParams& params,
                          const ForwardOptions& options) {
  if (positions.rank() != 3 || positions.dim(2) != 3) {
    throw ShapeError("forward_classifier: expected B×P×3 positions, got " +
                     shape_str(positions.shape()));
  }
  const std::size_t batch = positions.dim(0), p = positions.dim(1);
  const std::size_t classes = params.config.num_classes;
  auto d = positions.data();
  std::vector<Tensor> rows;
  rows.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<Point3> pts(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double* q = d.data() + (b * p + i) * 3;
      pts[i] = {q[0], q[1], q[2]};
    }
    rows.push_back(reshape(tape, forward_cloud(tape, pts, params, options, b), Shape{1, classes}));
  }
  return concat_rows(tape, rows);
}

std::vector<double> mlp_embedding(std::span<const Point3> points) {
  if (points.empty()) throw ConfigError("mlp_embedding: empty cloud");
  const double n = static_cast<double>(points.size());
  std::vector<double> e(kMlpEmbedding, 0.0);
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) e[a] += p[a] / n;
  }
  std::vector<double> radius(points.size());
  double rmax = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = points[i][a] - e[a];
      e[3 + a] += d * d / n;
      r2 += d * d;
    }
    radius[i] = std::sqrt(r2);
    rmax = std::max(rmax, radius[i]);
  }
  for (double r : radius) {
    std::size_t bin = 0;
    if (rmax >= 1e-12) {
      bin = std::min(kRadialBins - 1, static_cast<std::size_t>(r / rmax * kRadialBins));
    }
    e[6 + bin] += 1.0 / n;
  }
  return e;
}

Tensor mlp_baseline_forward(Tape& tape, const Tensor& positions, const ModelParams& params) {
  if (params.config.kind != ModelKind::mlp) {
    throw ConfigError("mlp_baseline_forward: model kind is " +
                      std::string(to_string(params.config.kind)));
  }
  if (positions.rank() != 3 || positions.dim(2) != 3) {
    throw ShapeError("mlp_baseline_forward: expected B×P×3 positions, got " +
                     shape_str(positions.shape()));
  }
  const std::size_t batch = positions.dim(0), p = positions.dim(1);
  auto d = positions.data();
  std::vector<double> flat;
  flat.reserve(batch * kMlpEmbedding);
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<Point3> pts(p);
    for (std::size_t i = 0; i < p; ++i) {
      const double* q = d.data() + (b * p + i) * 3;
      pts[i] = {q[0], q[1], q[2]};
    }
    const auto e = mlp_embedding(pts);
    flat.insert(flat.end(), e.begin(), e.end());
  }
  const ParamStore& ps = params.tensors;
  Tensor h(Shape{batch, kMlpEmbedding}, std::move(flat));
  for (int i = 1; i <= 4; ++i) {
    h = relu(tape, apply(tape, h, dense_params(ps, "mlp.fc" + std::to_string(i))));
  }
  h = relu(tape, apply(tape, h, dense_params(ps, "head.fc1")));
  return apply(tape, h, dense_params(ps, "head.fc2"));
}

Tensor forward_logits(Tape& tape, const Tensor& positions, const ModelParams& params,
                      const ForwardOptions& options) {
  if (params.config.kind == ModelKind::mlp) return mlp_baseline_forward(tape, positions, params);
  return forward_classifier(tape, positions, params, options);
}

}  // namespace ptl
