// Finite-difference validation of Transformer::ComputeGradients.

#ifndef DICTATTACH_GRADIENT_CHECK_H_
#define DICTATTACH_GRADIENT_CHECK_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dictattach/transformer.h"

namespace dictattach {

struct GradientCheckOptions {
  double step = 1e-5;
  // Denominator floor for the relative error |a - n| / max(|a| + |n|, floor).
  double floor = 1e-6;
  // Only tensors whose name starts with one of these prefixes; empty = all.
  std::vector<std::string> prefixes;
  // Test hook applied to the analytic gradients before comparison.
  std::function<void(TransformerParams<double>*)> corrupt;
};

struct TensorCheck {
  std::string name;
  size_t values = 0;
  double max_relative_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::vector<TensorCheck> tensors;

  const TensorCheck* Find(const std::string& name) const;
};

// Central differences of the mean per-token loss without dropout.
GradientCheckResult GradientCheck(const Transformer<double>& model,
                                  std::span<const TrainingExample* const> batch,
                                  const GradientCheckOptions& options = {});

}  // namespace dictattach

#endif  // DICTATTACH_GRADIENT_CHECK_H_
