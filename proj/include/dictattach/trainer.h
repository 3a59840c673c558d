// Adam training loop with token-count batching and best-dev selection.

#ifndef DICTATTACH_TRAINER_H_
#define DICTATTACH_TRAINER_H_

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dictattach/transformer.h"

namespace dictattach {

struct TrainConfig {
  size_t epochs = 20;
  // Source rows plus target tokens per batch (a single longer example still
  // forms its own batch).
  size_t batch_tokens = 2048;
  double learning_rate = 1e-3;  // peak, reached at the end of warmup
  size_t warmup_steps = 400;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  double clip_norm = 1.0;  // global gradient norm; 0 disables clipping

  void Validate() const;
};

// Learning rate at 1-based update `step`: linear warmup, then inverse sqrt.
double LearningRate(const TrainConfig& config, size_t step);

// Thrown when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochReport {
  size_t epoch = 0;         // 1-based
  double train_loss = 0.0;  // mean smoothed loss per target token
  double train_nll = 0.0;
  std::optional<double> dev_score;
  size_t updates = 0;
};

struct TrainResult {
  std::vector<EpochReport> epochs;
  // 1-based epoch whose parameters the model holds after training; empty
  // when no epoch ran.
  std::optional<size_t> best_epoch;
};

// Groups example indices into batches of similar length. Order depends only
// on `rng`.
std::vector<std::vector<size_t>> MakeBatches(const std::vector<TrainingExample>& data,
                                             size_t batch_tokens, Rng* rng);

template <typename T>
using DevScorer = std::function<double(const Transformer<T>&)>;

template <typename T>
using EpochCallback = std::function<void(const EpochReport&, const Transformer<T>&)>;

// Trains `model` in place. With a scorer, the model ends up holding the
// parameters of the epoch with the highest dev score (earliest on ties);
// otherwise those of the last epoch. All randomness derives from the model
// seed.
template <typename T>
TrainResult Train(Transformer<T>* model, const std::vector<TrainingExample>& data,
                  const TrainConfig& config, const DevScorer<T>& scorer = {},
                  const EpochCallback<T>& on_epoch = {});

}  // namespace dictattach

#endif  // DICTATTACH_TRAINER_H_
