// Versioned binary checkpoints.
//
// Layout: magic "DATTCKPT", u32 version, u64 header length, JSON header
// (model config, vocabulary size and hash, scalar type, tensor names and
// shapes, free-form metadata), then the raw tensor values in header order.

#ifndef DICTATTACH_CHECKPOINT_H_
#define DICTATTACH_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>

#include "dictattach/transformer.h"

namespace dictattach {

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  ModelConfig config;
  size_t vocab_size = 0;
  uint64_t vocab_hash = 0;
  std::string scalar;  // "float32" or "float64"
  std::map<std::string, std::string> metadata;
};

template <typename T>
void SaveCheckpoint(const std::string& path, const Transformer<T>& model,
                    uint64_t vocab_hash,
                    const std::map<std::string, std::string>& metadata = {});

CheckpointInfo ReadCheckpointInfo(const std::string& path);

// Throws std::runtime_error on a malformed file, a version or scalar-type
// mismatch, or (when `expected_vocab_hash` is non-zero) a vocabulary hash
// mismatch.
template <typename T>
Transformer<T> LoadCheckpoint(const std::string& path, uint64_t expected_vocab_hash = 0,
                              CheckpointInfo* info = nullptr);

}  // namespace dictattach

#endif  // DICTATTACH_CHECKPOINT_H_
