// Small models and batches shared by the model-level tests.

#ifndef DICTATTACH_TESTS_MODEL_FIXTURES_H_
#define DICTATTACH_TESTS_MODEL_FIXTURES_H_

#include <random>
#include <vector>

#include "dictattach/transformer.h"

namespace dictattach::testing {

inline ModelConfig TinyConfig() {
  ModelConfig config;
  config.d_model = 16;
  config.encoder_layers = 2;
  config.decoder_layers = 2;
  config.heads = 2;
  config.ffn_dim = 32;
  config.dropout = 0.0;
  config.max_length = 32;
  config.label_smoothing = 0.1;
  config.seed = 3;
  return config;
}

// Random example over ids [4, vocab) with optional attachments.
inline TrainingExample RandomExample(std::mt19937* rng, size_t vocab,
                                     size_t source_length, size_t target_length,
                                     size_t attachments) {
  std::uniform_int_distribution<TokenId> id(4, static_cast<TokenId>(vocab - 1));
  TrainingExample example;
  for (size_t i = 0; i < source_length; ++i) example.source.tokens.push_back(id(*rng));
  for (size_t a = 0; a < attachments; ++a) {
    EncodedSource::Attachment attachment;
    attachment.pos = a % source_length;
    attachment.anchor = Vocabulary::kUnk;
    example.source.tokens[attachment.pos] = Vocabulary::kUnk;
    for (size_t q = 0; q < 2 + a; ++q) attachment.definition.push_back(id(*rng));
    example.source.attachments.push_back(attachment);
  }
  for (size_t i = 0; i < target_length; ++i) example.target.push_back(id(*rng));
  return example;
}

inline std::vector<const TrainingExample*> Pointers(
    const std::vector<TrainingExample>& data) {
  std::vector<const TrainingExample*> out;
  for (const auto& example : data) out.push_back(&example);
  return out;
}

}  // namespace dictattach::testing

#endif  // DICTATTACH_TESTS_MODEL_FIXTURES_H_
