#include <algorithm>
#include <functional>

#include "ptl/error.hpp"
#include "ptl/gradcheck.hpp"
#include "ptl/model.hpp"
#include "ptl/ops.hpp"
#include "ptl/random.hpp"
#include "ptl/training.hpp"

namespace ptl {

namespace {

struct Case {
  std::vector<Tensor> leaves;
  ScalarFn fn;
};

using CaseBuilder = std::function<Case(Rng&)>;

Tensor randn(Rng& rng, Shape shape, bool requires_grad = true) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Contracts a tensor output with a fixed random weight so every entry matters.
Tensor project(Tape& tape, const Tensor& y, const Tensor& weight) {
  return sum_all(tape, mul(tape, y, weight));
}

Case unary(Rng& rng, Shape in, std::function<Tensor(Tape&, const Tensor&)> op) {
  Tensor x = randn(rng, in);
  Tape probe;
  Tensor shape_probe = op(probe, x.clone());
  Tensor w = randn(rng, shape_probe.shape(), false);
  return {{x}, [x, w, op](Tape& t) { return project(t, op(t, x), w); }};
}

Case binary_case(Rng& rng, std::function<Tensor(Tape&, const Tensor&, const Tensor&)> op) {
  Tensor a = randn(rng, {3, 4}), b = randn(rng, {3, 4}), c = randn(rng, {3, 1});
  Tensor w = randn(rng, {3, 4}, false);
  return {{a, b, c}, [=](Tape& t) { return project(t, op(t, op(t, a, b), c), w); }};
}

ModelParams random_params(const ModelConfig& config, Rng& rng) {
  ModelParams p = init_params(config, rng());
  std::normal_distribution<double> n(0.0, 0.1);
  for (const auto& [name, t] : p.tensors) {
    if (!name.ends_with(".bias")) continue;
    Tensor handle = t;
    for (auto& v : handle.mutable_data()) v = n(rng);
  }
  return p;
}

std::vector<Point3> random_cloud(Rng& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {d(rng), d(rng), d(rng)};
  return pts;
}

Tensor cloud_tensor(const std::vector<std::vector<Point3>>& clouds) {
  std::vector<double> flat;
  for (const auto& c : clouds) {
    for (const auto& p : c) flat.insert(flat.end(), p.begin(), p.end());
  }
  return Tensor(Shape{clouds.size(), clouds.front().size(), 3}, std::move(flat));
}

Case layer_case(Rng& rng, AttentionKind kind) {
  const std::size_t n = 8, k = 4, c = 4;
  ModelConfig cfg;
  cfg.widths = {c};
  cfg.num_classes = 2;
  ModelParams params = random_params(cfg, rng);
  const LayerParams lp = layer_params(params.tensors, "stage0.attn.");
  auto pts = random_cloud(rng, n);
  const NeighborIndex nbr = knn_self(pts, k);
  Tensor x = randn(rng, {n, c});
  Tensor w = randn(rng, {n, c}, false);
  std::vector<Tensor> leaves{x};
  for (const Dense* d : {&lp.phi, &lp.psi, &lp.alpha, &lp.pos1, &lp.pos2, &lp.gamma1, &lp.gamma2}) {
    leaves.push_back(d->weight);
    leaves.push_back(d->bias);
  }
  return {leaves, [=](Tape& t) {
            return project(t, point_transformer_layer(t, x, pts, nbr, lp, kind).features, w);
          }};
}

Case transition_case(Rng& rng) {
  const std::size_t n = 10;
  auto pts = random_cloud(rng, n);
  Tensor x = randn(rng, {n, 4});
  Dense lift{randn(rng, {4, 5}), randn(rng, {5})};
  Tensor w = randn(rng, {5, 5}, false);
  return {{x, lift.weight, lift.bias}, [=](Tape& t) {
            return project(t, transition_down(t, x, pts, 0.5, 3, lift, 0).features, w);
          }};
}

Case model_case(Rng& rng, ModelConfig cfg, std::size_t batch, std::size_t points) {
  ModelParams params = random_params(cfg, rng);
  std::vector<std::vector<Point3>> clouds;
  std::vector<std::uint32_t> labels;
  for (std::size_t b = 0; b < batch; ++b) {
    clouds.push_back(random_cloud(rng, points));
    labels.push_back(static_cast<std::uint32_t>(rng() % cfg.num_classes));
  }
  Tensor pos = cloud_tensor(clouds);
  return {params.tensors.tensors(), [=](Tape& t) {
            return cross_entropy(t, forward_logits(t, pos, params), labels);
          }};
}

const std::vector<std::pair<std::string, CaseBuilder>>& registry() {
  static const std::vector<std::pair<std::string, CaseBuilder>> cases = [] {
    std::vector<std::pair<std::string, CaseBuilder>> r;
    r.emplace_back("matmul", [](Rng& rng) {
      Tensor a = randn(rng, {3, 4}), b = randn(rng, {4, 2});
      Tensor w = randn(rng, {3, 2}, false);
      return Case{{a, b}, [=](Tape& t) { return project(t, matmul(t, a, b), w); }};
    });
    r.emplace_back("linear", [](Rng& rng) {
      Tensor x = randn(rng, {2, 3, 4}), wt = randn(rng, {4, 5}), b = randn(rng, {5});
      Tensor w = randn(rng, {2, 3, 5}, false);
      return Case{{x, wt, b}, [=](Tape& t) { return project(t, linear(t, x, wt, b), w); }};
    });
    r.emplace_back("add", [](Rng& rng) {
      return binary_case(rng, [](Tape& t, const Tensor& a, const Tensor& b) { return add(t, a, b); });
    });
    r.emplace_back("sub", [](Rng& rng) {
      return binary_case(rng, [](Tape& t, const Tensor& a, const Tensor& b) { return sub(t, a, b); });
    });
    r.emplace_back("mul", [](Rng& rng) {
      return binary_case(rng, [](Tape& t, const Tensor& a, const Tensor& b) { return mul(t, a, b); });
    });
    r.emplace_back("relu", [](Rng& rng) {
      return unary(rng, {4, 5}, [](Tape& t, const Tensor& x) { return relu(t, x); });
    });
    r.emplace_back("scale", [](Rng& rng) {
      return unary(rng, {4, 5}, [](Tape& t, const Tensor& x) { return scale(t, x, -1.7); });
    });
    r.emplace_back("softmax", [](Rng& rng) {
      return unary(rng, {3, 4, 5}, [](Tape& t, const Tensor& x) { return softmax(t, x, 1); });
    });
    r.emplace_back("reduce_sum", [](Rng& rng) {
      return unary(rng, {3, 4, 2}, [](Tape& t, const Tensor& x) { return reduce(t, x, 1, ReduceKind::sum); });
    });
    r.emplace_back("reduce_mean", [](Rng& rng) {
      return unary(rng, {3, 4, 2}, [](Tape& t, const Tensor& x) { return reduce(t, x, 0, ReduceKind::mean); });
    });
    r.emplace_back("reduce_max", [](Rng& rng) {
      return unary(rng, {3, 4, 2}, [](Tape& t, const Tensor& x) { return reduce(t, x, 1, ReduceKind::max); });
    });
    r.emplace_back("gather_rows", [](Rng& rng) {
      NeighborIndex idx(4, 3);
      for (auto& i : idx.indices) i = static_cast<std::uint32_t>(rng() % 6);
      return unary(rng, {6, 3}, [idx](Tape& t, const Tensor& x) { return gather_rows(t, x, idx); });
    });
    r.emplace_back("reshape", [](Rng& rng) {
      return unary(rng, {2, 6}, [](Tape& t, const Tensor& x) { return reshape(t, x, {3, 4}); });
    });
    r.emplace_back("concat_rows", [](Rng& rng) {
      Tensor a = randn(rng, {2, 3}), b = randn(rng, {1, 3}), c = randn(rng, {3, 3});
      Tensor w = randn(rng, {6, 3}, false);
      return Case{{a, b, c}, [=](Tape& t) { return project(t, concat_rows(t, {a, b, c}), w); }};
    });
    r.emplace_back("cross_entropy", [](Rng& rng) {
      Tensor x = randn(rng, {4, 5});
      std::vector<std::uint32_t> labels;
      for (int i = 0; i < 4; ++i) labels.push_back(static_cast<std::uint32_t>(rng() % 5));
      return Case{{x}, [=](Tape& t) { return cross_entropy(t, x, labels); }};
    });
    r.emplace_back("point_transformer_layer", [](Rng& rng) { return layer_case(rng, AttentionKind::vector); });
    r.emplace_back("point_transformer_layer_scalar", [](Rng& rng) { return layer_case(rng, AttentionKind::scalar); });
    r.emplace_back("transition_down", [](Rng& rng) { return transition_case(rng); });
    r.emplace_back("mlp_baseline", [](Rng& rng) {
      ModelConfig cfg;
      cfg.kind = ModelKind::mlp;
      cfg.mlp_hidden = 8;
      cfg.head_hidden = 8;
      cfg.num_classes = 3;
      return model_case(rng, cfg, 2, 16);
    });
    r.emplace_back("classifier_2stage", [](Rng& rng) {
      ModelConfig cfg;
      cfg.widths = {8, 8};
      cfg.k = 8;
      cfg.head_hidden = 8;
      cfg.num_classes = 3;
      return model_case(rng, cfg, 1, 32);
    });
    return r;
  }();
  return cases;
}

}  // namespace

const std::vector<std::string>& gradcheck_components() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, builder] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

std::vector<ComponentCheck> run_gradcheck_suite(std::size_t seeds, const std::string& sign_flip_op,
                                                double eps) {
  if (seeds == 0) throw ConfigError("gradcheck: seeds must be >= 1");
  std::vector<ComponentCheck> out;
  for (const auto& [name, builder] : registry()) {
    ComponentCheck check{name, {}};
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
      Rng rng(derive_seed(seed, {stable_hash(name)}));
      Case c = builder(rng);
      GradCheckOptions options;
      options.eps = eps;
      options.sign_flip_op = sign_flip_op;
      const GradCheckResult r = grad_check(c.fn, c.leaves, options);
      check.worst.max_relative_error = std::max(check.worst.max_relative_error, r.max_relative_error);
      check.worst.compared += r.compared;
      check.worst.skipped += r.skipped;
    }
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace ptl
