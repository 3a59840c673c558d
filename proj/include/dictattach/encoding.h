// Input encodings for attached sentences.
//
// A base token f at position p is encoded as  s*WE[f] + PE[p].
// Token d at position q of the definition attached to anchor f at position p
// is encoded as  s*WE[f] + PE[p] + s*WE[d] + DPE[q],
// where s = sqrt(d_model), PE is sinusoidal and DPE is a learned table with
// one row per definition position. Positions p are 1-based (base token index
// + 1), as are definition positions q.

#ifndef DICTATTACH_ENCODING_H_
#define DICTATTACH_ENCODING_H_

#include <cstddef>
#include <vector>

#include "dictattach/attach.h"
#include "dictattach/tensor.h"
#include "dictattach/vocab.h"

namespace dictattach {

// Sinusoidal table with rows for positions 0..max_position.
// PE[p][2i] = sin(p / 10000^(2i/d)), PE[p][2i+1] = cos(p / 10000^(2i/d)).
template <typename T>
Matrix<T> SinusoidalTable(size_t max_position, size_t dim);

// Attached sentence mapped to vocabulary ids.
struct EncodedSource {
  struct Attachment {
    size_t pos = 0;  // 0-based base index
    TokenId anchor = Vocabulary::kUnk;
    std::vector<TokenId> definition;
  };
  std::vector<TokenId> tokens;
  std::vector<Attachment> attachments;

  size_t num_rows() const;
};

// Definition tokens outside the vocabulary become UNK here.
EncodedSource ToIds(const AttachedSentence& sentence, const Vocabulary& vocab);

// Where an encoded row came from.
struct RowProvenance {
  size_t base_index = 0;      // anchor index for definition rows
  size_t definition_pos = 0;  // 0 for base tokens, q (1-based) otherwise
  TokenId anchor = 0;         // base token id, or the anchor id
  TokenId token = 0;          // definition token id (definition rows only)

  bool is_definition() const { return definition_pos > 0; }
  bool operator==(const RowProvenance&) const = default;
};

template <typename T>
struct EncodedSequence {
  Matrix<T> rows;
  std::vector<RowProvenance> provenance;

  size_t size() const { return provenance.size(); }
};

template <typename T>
struct EmbeddingTables {
  const Matrix<T>* word = nullptr;                  // WE, vocab x d
  const Matrix<T>* definition_positions = nullptr;  // DPE, 50 x d
  const Matrix<T>* positions = nullptr;             // PE, (max_len + 1) x d
  T scale = T(1);

  Eigen::Index dim() const { return word->cols(); }
};

template <typename T>
RowVector<T> EncodeBaseToken(const EmbeddingTables<T>& tables, TokenId token,
                             size_t position);

// Throws std::out_of_range unless 1 <= definition_pos <= DPE rows.
template <typename T>
RowVector<T> EncodeDefinitionToken(const EmbeddingTables<T>& tables,
                                   TokenId anchor, size_t position,
                                   TokenId token, size_t definition_pos);

// Base rows in order, then definition rows ordered by anchor position and
// definition position. When the total exceeds `max_rows`, trailing
// definition rows are dropped (and counted in `*dropped_rows`); a base longer
// than `max_rows` throws std::invalid_argument.
template <typename T>
EncodedSequence<T> EncodeSentence(const EmbeddingTables<T>& tables,
                                  const EncodedSource& source, size_t max_rows,
                                  size_t* dropped_rows = nullptr);

// Scatters gradients of encoded rows back into WE and DPE.
template <typename T>
void AccumulateEncodingGradients(const std::vector<RowProvenance>& provenance,
                                 const Eigen::Ref<const Matrix<T>>& row_grads,
                                 T scale, Matrix<T>* word_grads,
                                 Matrix<T>* definition_grads);

}  // namespace dictattach

#endif  // DICTATTACH_ENCODING_H_
