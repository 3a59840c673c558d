#include "dictattach/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

namespace dictattach {

void TrainConfig::Validate() const {
  if (batch_tokens == 0) throw std::invalid_argument("batch_tokens must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (clip_norm < 0.0) throw std::invalid_argument("clip_norm must be non-negative");
}

double LearningRate(const TrainConfig& config, size_t step) {
  const double s = static_cast<double>(std::max<size_t>(step, 1));
  if (config.warmup_steps == 0) return config.learning_rate;
  const double w = static_cast<double>(config.warmup_steps);
  return config.learning_rate * std::min(s / w, std::sqrt(w / s));
}

std::vector<std::vector<size_t>> MakeBatches(const std::vector<TrainingExample>& data,
                                             size_t batch_tokens, Rng* rng) {
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), *rng);
  const auto cost = [&](size_t i) {
    return data[i].source.num_rows() + data[i].target.size() + 1;
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return cost(a) < cost(b); });
  std::vector<std::vector<size_t>> batches;
  size_t tokens = 0;
  for (size_t index : order) {
    if (batches.empty() || tokens + cost(index) > batch_tokens) {
      batches.emplace_back();
      tokens = 0;
    }
    batches.back().push_back(index);
    tokens += cost(index);
  }
  std::shuffle(batches.begin(), batches.end(), *rng);
  return batches;
}

namespace {

template <typename T>
class Adam {
 public:
  Adam(const TrainConfig& config, const ModelConfig& model, size_t vocab)
      : config_(config),
        first_(ZeroParams<T>(model, vocab)),
        second_(ZeroParams<T>(model, vocab)) {}

  void Update(TransformerParams<T>* params, TransformerParams<T>* grads) {
    ++step_;
    auto p = params->Slots();
    auto g = grads->Slots();
    auto m = first_.Slots();
    auto v = second_.Slots();
    double norm_sq = 0.0;
    for (const auto& slot : g) {
      norm_sq += Eigen::Map<const Matrix<T>>(slot.data, slot.rows, slot.cols)
                     .template cast<double>()
                     .squaredNorm();
    }
    const double norm = std::sqrt(norm_sq);
    const double clip =
        (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;
    const double lr = LearningRate(config_, step_);
    const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    const T step_size = static_cast<T>(lr / correction1);
    const T inv_c2 = static_cast<T>(1.0 / correction2);
    const T eps = static_cast<T>(config_.epsilon);
    for (size_t s = 0; s < p.size(); ++s) {
      auto pv = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(p[s].data, p[s].size());
      auto gv = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(g[s].data, g[s].size());
      auto mv = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(m[s].data, m[s].size());
      auto vv = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(v[s].data, v[s].size());
      gv *= static_cast<T>(clip);
      mv = b1 * mv + (T(1) - b1) * gv;
      vv = b2 * vv + (T(1) - b2) * gv.square();
      pv -= step_size * mv / ((vv * inv_c2).sqrt() + eps);
    }
  }

  size_t step() const { return step_; }

 private:
  const TrainConfig& config_;
  TransformerParams<T> first_;
  TransformerParams<T> second_;
  size_t step_ = 0;
};

}  // namespace

template <typename T>
TrainResult Train(Transformer<T>* model, const std::vector<TrainingExample>& data,
                  const TrainConfig& config, const DevScorer<T>& scorer,
                  const EpochCallback<T>& on_epoch) {
  config.Validate();
  TrainResult result;
  if (config.epochs == 0) return result;
  if (data.empty()) throw std::invalid_argument("empty training data");

  const uint64_t seed = model->config().seed;
  Rng shuffle_rng(DeriveSeed(seed, "shuffle"));
  Rng dropout_rng(DeriveSeed(seed, "dropout"));
  Adam<T> adam(config, model->config(), model->vocab_size());
  TransformerParams<T> grads = ZeroParams<T>(model->config(), model->vocab_size());
  std::optional<TransformerParams<T>> best_params;
  double best_score = -std::numeric_limits<double>::infinity();

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    LossStats totals;
    const auto batches = MakeBatches(data, config.batch_tokens, &shuffle_rng);
    std::vector<const TrainingExample*> batch;
    for (const auto& indices : batches) {
      batch.clear();
      for (size_t i : indices) batch.push_back(&data[i]);
      grads.SetZero();
      const LossStats stats = model->ComputeGradients(batch, &grads, &dropout_rng);
      if (!std::isfinite(stats.loss)) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                               ", update " + std::to_string(adam.step() + 1) +
                               ": loss " + std::to_string(stats.loss) + " over " +
                               std::to_string(stats.tokens) + " tokens");
      }
      totals.Add(stats);
      adam.Update(&model->params(), &grads);
    }
    EpochReport report;
    report.epoch = epoch;
    report.train_loss = totals.loss / static_cast<double>(totals.tokens);
    report.train_nll = totals.nll / static_cast<double>(totals.tokens);
    report.updates = adam.step();
    if (scorer) {
      report.dev_score = scorer(*model);
      if (*report.dev_score > best_score) {
        best_score = *report.dev_score;
        best_params = model->params();
        result.best_epoch = epoch;
      }
    } else {
      result.best_epoch = epoch;
    }
    spdlog::info("epoch {}: loss {:.4f} nll {:.4f}{}", epoch, report.train_loss,
                 report.train_nll,
                 report.dev_score ? fmt::format(" dev {:.2f}", *report.dev_score) : "");
    result.epochs.push_back(report);
    if (on_epoch) on_epoch(report, *model);
  }
  if (best_params) model->params() = std::move(*best_params);
  return result;
}

template TrainResult Train<float>(Transformer<float>*, const std::vector<TrainingExample>&,
                                  const TrainConfig&, const DevScorer<float>&,
                                  const EpochCallback<float>&);
template TrainResult Train<double>(Transformer<double>*, const std::vector<TrainingExample>&,
                                   const TrainConfig&, const DevScorer<double>&,
                                   const EpochCallback<double>&);

}  // namespace dictattach
