#include "ptl/tape.hpp"

#include "ptl/error.hpp"

namespace ptl {

void Tape::record(std::string op, Tensor output, BackwardFn backward) {
  if (consumed_) throw Error("tape already consumed by backward(); start a new tape");
  nodes_.push_back(Node{std::move(op), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error("backward() called twice on the same tape");
  if (loss.rank() != 0) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  bool found = false;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.same_storage(loss)) {
      found = true;
      break;
    }
  }
  if (!found) throw Error("loss was not produced by this tape");
  consumed_ = true;

  Tensor seed = loss;
  seed.grad_buffer()[0] += 1.0;

  std::vector<double> flipped;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // nothing flowed into this node
    std::span<const double> upstream = it->output.grad();
    if (!fault_op_.empty() && it->op == fault_op_) {
      flipped.assign(upstream.begin(), upstream.end());
      for (auto& g : flipped) g = -g;
      upstream = flipped;
    }
    it->backward(upstream);
  }
}

std::vector<std::string> Tape::ops() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.op);
  return out;
}

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

}  // namespace ptl
