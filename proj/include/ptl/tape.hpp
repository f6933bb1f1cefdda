#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ptl/tensor.hpp"

namespace ptl {

/// Append-only record of differentiable operations.
///
/// Each recorded node owns a closure that maps the node output's gradient to
/// additive contributions on its inputs. backward() walks the nodes in strict
/// reverse order of recording. A tape is single-use: after backward() it
/// refuses further recording or a second backward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const double> upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a node. The closure must only accumulate into input gradients.
  void record(std::string op, Tensor output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad leaf.
  /// Leaf gradients accumulate across calls on different tapes.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  /// Op kinds in recording order.
  std::vector<std::string> ops() const;

  /// Test hook: negates the gradient flowing through every node of this op kind.
  void inject_sign_flip(std::string op) { fault_op_ = std::move(op); }

 private:
  struct Node {
    std::string op;
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::string fault_op_;
  bool consumed_ = false;
};

/// An op records a node iff at least one of its inputs requires grad.
bool any_requires_grad(std::initializer_list<const Tensor*> inputs);

}  // namespace ptl
