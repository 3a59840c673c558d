#include "dictattach/gradient_check.h"

#include <algorithm>
#include <cmath>

namespace dictattach {

const TensorCheck* GradientCheckResult::Find(const std::string& name) const {
  for (const auto& tensor : tensors) {
    if (tensor.name == name) return &tensor;
  }
  return nullptr;
}

GradientCheckResult GradientCheck(const Transformer<double>& model,
                                  std::span<const TrainingExample* const> batch,
                                  const GradientCheckOptions& options) {
  TransformerParams<double> analytic =
      ZeroParams<double>(model.config(), model.vocab_size());
  model.ComputeGradients(batch, &analytic, nullptr);
  if (options.corrupt) options.corrupt(&analytic);

  Transformer<double> probe(model.config(), model.params());
  const auto mean_loss = [&]() {
    const LossStats stats = probe.ComputeGradients(batch, nullptr, nullptr);
    return stats.loss / static_cast<double>(stats.tokens);
  };

  const auto selected = [&](const std::string& name) {
    if (options.prefixes.empty()) return true;
    return std::any_of(options.prefixes.begin(), options.prefixes.end(),
                       [&](const std::string& p) { return name.rfind(p, 0) == 0; });
  };

  GradientCheckResult result;
  auto probe_slots = probe.params().Slots();
  const auto grad_slots = analytic.Slots();
  for (size_t s = 0; s < probe_slots.size(); ++s) {
    if (!selected(probe_slots[s].name)) continue;
    TensorCheck check;
    check.name = probe_slots[s].name;
    check.values = static_cast<size_t>(probe_slots[s].size());
    for (Eigen::Index i = 0; i < probe_slots[s].size(); ++i) {
      double& value = probe_slots[s].data[i];
      const double saved = value;
      value = saved + options.step;
      const double plus = mean_loss();
      value = saved - options.step;
      const double minus = mean_loss();
      value = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double exact = grad_slots[s].data[i];
      const double error = std::abs(exact - numeric) /
                           std::max(std::abs(exact) + std::abs(numeric), options.floor);
      check.max_relative_error = std::max(check.max_relative_error, error);
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(exact));
      check.max_abs_numeric = std::max(check.max_abs_numeric, std::abs(numeric));
    }
    if (check.max_relative_error >= result.max_relative_error) {
      result.max_relative_error = check.max_relative_error;
      result.worst_tensor = check.name;
    }
    result.tensors.push_back(std::move(check));
  }
  return result;
}

}  // namespace dictattach
