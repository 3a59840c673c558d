#include "dictattach/encoding.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace dictattach {

template <typename T>
Matrix<T> SinusoidalTable(size_t max_position, size_t dim) {
  Matrix<T> table(max_position + 1, dim);
  for (size_t p = 0; p <= max_position; ++p) {
    for (size_t i = 0; i < dim; i += 2) {
      const double angle =
          static_cast<double>(p) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      table(p, i) = static_cast<T>(std::sin(angle));
      if (i + 1 < dim) table(p, i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return table;
}

size_t EncodedSource::num_rows() const {
  size_t rows = tokens.size();
  for (const auto& attachment : attachments) rows += attachment.definition.size();
  return rows;
}

EncodedSource ToIds(const AttachedSentence& sentence, const Vocabulary& vocab) {
  EncodedSource out;
  out.tokens = vocab.Encode(sentence.tokens);
  for (const auto& attachment : sentence.attachments) {
    out.attachments.push_back({attachment.pos, vocab.IdOf(attachment.anchor),
                               vocab.Encode(attachment.definition)});
  }
  std::stable_sort(out.attachments.begin(), out.attachments.end(),
                   [](const auto& a, const auto& b) { return a.pos < b.pos; });
  return out;
}

namespace {

template <typename T>
auto WordRow(const EmbeddingTables<T>& tables, TokenId token) {
  if (token < 0 || token >= tables.word->rows()) token = Vocabulary::kUnk;
  return tables.word->row(token);
}

}  // namespace

template <typename T>
RowVector<T> EncodeBaseToken(const EmbeddingTables<T>& tables, TokenId token,
                             size_t position) {
  if (position >= static_cast<size_t>(tables.positions->rows())) {
    throw std::out_of_range("position beyond the sinusoidal table");
  }
  return tables.scale * WordRow(tables, token) + tables.positions->row(position);
}

template <typename T>
RowVector<T> EncodeDefinitionToken(const EmbeddingTables<T>& tables,
                                   TokenId anchor, size_t position,
                                   TokenId token, size_t definition_pos) {
  if (definition_pos < 1 ||
      definition_pos > static_cast<size_t>(tables.definition_positions->rows())) {
    throw std::out_of_range("definition position must lie in [1, " +
                            std::to_string(tables.definition_positions->rows()) +
                            "]");
  }
  RowVector<T> row = EncodeBaseToken(tables, anchor, position);
  row += tables.scale * WordRow(tables, token);
  row += tables.definition_positions->row(definition_pos - 1);
  return row;
}

template <typename T>
EncodedSequence<T> EncodeSentence(const EmbeddingTables<T>& tables,
                                  const EncodedSource& source, size_t max_rows,
                                  size_t* dropped_rows) {
  const size_t base = source.tokens.size();
  if (base > max_rows) {
    throw std::invalid_argument("source has " + std::to_string(base) +
                                " tokens, above the maximum length " +
                                std::to_string(max_rows));
  }
  EncodedSequence<T> encoded;
  encoded.provenance.reserve(source.num_rows());
  for (size_t i = 0; i < base; ++i) {
    encoded.provenance.push_back({i, 0, source.tokens[i], 0});
  }
  size_t dropped = 0;
  for (const auto& attachment : source.attachments) {
    if (attachment.pos >= base) {
      throw std::invalid_argument("attachment anchor outside the sentence");
    }
    for (size_t q = 1; q <= attachment.definition.size(); ++q) {
      if (encoded.provenance.size() >= max_rows) {
        ++dropped;
        continue;
      }
      encoded.provenance.push_back(
          {attachment.pos, q, attachment.anchor, attachment.definition[q - 1]});
    }
  }
  if (dropped > 0) {
    spdlog::warn("encode: dropped {} definition rows beyond length {}", dropped,
                 max_rows);
  }
  if (dropped_rows != nullptr) *dropped_rows = dropped;

  encoded.rows.resize(static_cast<Eigen::Index>(encoded.provenance.size()),
                      tables.dim());
  for (size_t r = 0; r < encoded.provenance.size(); ++r) {
    const RowProvenance& row = encoded.provenance[r];
    encoded.rows.row(r) =
        row.is_definition()
            ? EncodeDefinitionToken(tables, row.anchor, row.base_index + 1,
                                    row.token, row.definition_pos)
            : EncodeBaseToken(tables, row.anchor, row.base_index + 1);
  }
  return encoded;
}

template <typename T>
void AccumulateEncodingGradients(const std::vector<RowProvenance>& provenance,
                                 const Eigen::Ref<const Matrix<T>>& row_grads,
                                 T scale, Matrix<T>* word_grads,
                                 Matrix<T>* definition_grads) {
  const auto clamp = [&](TokenId id) {
    return (id < 0 || id >= word_grads->rows()) ? Vocabulary::kUnk : id;
  };
  for (size_t r = 0; r < provenance.size(); ++r) {
    const RowProvenance& row = provenance[r];
    word_grads->row(clamp(row.anchor)) += scale * row_grads.row(r);
    if (row.is_definition()) {
      word_grads->row(clamp(row.token)) += scale * row_grads.row(r);
      definition_grads->row(row.definition_pos - 1) += row_grads.row(r);
    }
  }
}

#define DICTATTACH_INSTANTIATE_ENCODING(T)                                      \
  template Matrix<T> SinusoidalTable<T>(size_t, size_t);                        \
  template RowVector<T> EncodeBaseToken<T>(const EmbeddingTables<T>&, TokenId,  \
                                           size_t);                             \
  template RowVector<T> EncodeDefinitionToken<T>(                               \
      const EmbeddingTables<T>&, TokenId, size_t, TokenId, size_t);             \
  template EncodedSequence<T> EncodeSentence<T>(                                \
      const EmbeddingTables<T>&, const EncodedSource&, size_t, size_t*);        \
  template void AccumulateEncodingGradients<T>(                                 \
      const std::vector<RowProvenance>&, const Eigen::Ref<const Matrix<T>>&, T, \
      Matrix<T>*, Matrix<T>*);

DICTATTACH_INSTANTIATE_ENCODING(float)
DICTATTACH_INSTANTIATE_ENCODING(double)

}  // namespace dictattach
