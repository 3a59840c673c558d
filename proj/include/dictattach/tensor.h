// Eigen aliases and seeding helpers used by the model code.

#ifndef DICTATTACH_TENSOR_H_
#define DICTATTACH_TENSOR_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace dictattach {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Named view of one parameter tensor, used to walk a parameter set in a
// fixed order (optimizer, checkpoints, gradient checks).
template <typename T>
struct TensorSlot {
  std::string name;
  T* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

using Rng = std::mt19937_64;

// Sub-seed for a labeled consumer of randomness (init, shuffling, dropout,
// bootstrap...), derived from the single experiment seed.
uint64_t DeriveSeed(uint64_t seed, std::string_view label);

}  // namespace dictattach

#endif  // DICTATTACH_TENSOR_H_
