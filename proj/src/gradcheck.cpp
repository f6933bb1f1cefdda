#include "ptl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ptl/error.hpp"

namespace ptl {

namespace {

// One-sided quotients differ by ~|f''|·eps on smooth functions; a crossed kink
// shows up as an O(slope jump) gap.
constexpr double kKinkTolerance = 1e-3;

double evaluate(const ScalarFn& fn) {
  Tape tape;
  Tensor y = fn(tape);
  if (y.numel() != 1) throw ShapeError("grad_check: function must be scalar-valued");
  return y.item();
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& fn, std::vector<Tensor> leaves,
                           const GradCheckOptions& options) {
  std::vector<bool> saved_flags;
  for (auto& leaf : leaves) {
    saved_flags.push_back(leaf.requires_grad());
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }

  Tape tape;
  if (!options.sign_flip_op.empty()) tape.inject_sign_flip(options.sign_flip_op);
  Tensor loss = fn(tape);
  if (loss.rank() != 0) throw ShapeError("grad_check: function must return a rank-0 tensor");
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) {
    if (leaf.has_grad()) {
      analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());
    } else {
      analytic.emplace_back(leaf.numel(), 0.0);
    }
    leaf.set_requires_grad(false);  // numeric passes need no recording
  }

  const double eps = options.eps;
  const double f0 = evaluate(fn);
  GradCheckResult result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      if (std::abs(original) <= eps) {
        ++result.skipped;
        continue;
      }
      values[i] = original + eps;
      const double f_plus = evaluate(fn);
      values[i] = original - eps;
      const double f_minus = evaluate(fn);
      values[i] = original;

      const double forward_q = (f_plus - f0) / eps;
      const double backward_q = (f0 - f_minus) / eps;
      const double scale_q = std::max({1.0, std::abs(forward_q), std::abs(backward_q)});
      if (std::abs(forward_q - backward_q) > kKinkTolerance * scale_q) {
        ++result.skipped;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[l][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      result.max_relative_error = std::max(result.max_relative_error, err);
      ++result.compared;
    }
  }

  for (std::size_t l = 0; l < leaves.size(); ++l) leaves[l].set_requires_grad(saved_flags[l]);
  return result;
}

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& fn, const Tensor& x,
                  double eps) {
  Tensor leaf = x;
  GradCheckOptions options;
  options.eps = eps;
  return grad_check([&](Tape& tape) { return fn(tape, leaf); }, {leaf}, options)
      .max_relative_error;
}

}  // namespace ptl
