#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ptl/tape.hpp"
#include "ptl/tensor.hpp"

namespace ptl {

/// Scalar-valued function of tensors already flagged requires_grad.
using ScalarFn = std::function<Tensor(Tape&)>;

struct GradCheckOptions {
  double eps = 1e-5;
  /// Forwarded to Tape::inject_sign_flip for the analytic pass (fault-injection tests).
  std::string sign_flip_op;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t compared = 0;
  /// Coordinates dropped by the kink rule.
  std::size_t skipped = 0;
};

/// Compares reverse-mode gradients of `fn` against central differences over
/// every coordinate of `leaves`.
///
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
/// A coordinate is skipped when its value lies within eps of 0 (relu kink), or
/// when the one-sided difference quotients disagree beyond what curvature at
/// this eps can explain (a kink crossed somewhere inside fn).
GradCheckResult grad_check(const ScalarFn& fn, std::vector<Tensor> leaves,
                           const GradCheckOptions& options = {});

/// Single-input form: fn receives x (flagged requires_grad) on a fresh tape.
double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& fn, const Tensor& x,
                  double eps = 1e-5);

}  // namespace ptl

namespace ptl {

struct ComponentCheck {
  std::string name;
  GradCheckResult worst;  ///< max error over seeds; compared/skipped are totals
};

/// Names checked by run_gradcheck_suite, in report order: every tape op kind,
/// the attention layer in both variants, transition down, the MLP baseline
/// and a full two-stage classifier.
const std::vector<std::string>& gradcheck_components();

/// Gradient checks of every component at seeds 1..seeds. A non-empty
/// `sign_flip_op` negates that op's backward in every analytic pass.
std::vector<ComponentCheck> run_gradcheck_suite(std::size_t seeds,
                                                const std::string& sign_flip_op = "",
                                                double eps = 1e-5);

}  // namespace ptl
