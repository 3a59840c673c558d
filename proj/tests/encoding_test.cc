#include "dictattach/encoding.h"

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace dictattach {
namespace {

constexpr size_t kDim = 8;
constexpr size_t kVocab = 12;

// Scalar reference for the sinusoid.
double ReferencePe(size_t p, size_t j, size_t dim) {
  const double i2 = static_cast<double>(j - j % 2);
  const double angle = static_cast<double>(p) / std::pow(10000.0, i2 / dim);
  return j % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

struct Tables {
  Matrix<double> word = Matrix<double>::Zero(kVocab, kDim);
  Matrix<double> dpe = Matrix<double>::Zero(50, kDim);
  Matrix<double> pe = SinusoidalTable<double>(64, kDim);
  double scale = std::sqrt(static_cast<double>(kDim));

  EmbeddingTables<double> View() const { return {&word, &dpe, &pe, scale}; }

  void Randomize(uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < word.size(); ++i) word.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < dpe.size(); ++i) dpe.data()[i] = normal(rng);
  }
};

TEST(SinusoidTest, MatchesScalarReference) {
  const Matrix<double> table = SinusoidalTable<double>(20, 6);
  for (size_t p = 0; p <= 20; ++p) {
    for (size_t j = 0; j < 6; ++j) {
      EXPECT_NEAR(table(p, j), ReferencePe(p, j, 6), 1e-15);
    }
  }
  EXPECT_TRUE(SinusoidalTable<double>(20, 6) == table);
}

TEST(EncodeBaseTokenTest, ZeroEmbeddingGivesPositionEncoding) {
  const Tables t;
  EXPECT_TRUE(EncodeBaseToken(t.View(), 5, 3) == t.pe.row(3));
}

TEST(EncodeBaseTokenTest, MatchesIndependentSum) {
  Tables t;
  t.Randomize(1);
  const RowVector<double> row = EncodeBaseToken(t.View(), 7, 3);
  for (size_t j = 0; j < kDim; ++j) {
    EXPECT_NEAR(row(j), t.scale * t.word(7, j) + ReferencePe(3, j, kDim), 1e-12);
  }
}

TEST(EncodeBaseTokenTest, OutOfRangeIdUsesUnkRow) {
  Tables t;
  t.Randomize(2);
  EXPECT_TRUE(EncodeBaseToken(t.View(), 999, 1) ==
              EncodeBaseToken(t.View(), Vocabulary::kUnk, 1));
}

TEST(EncodeDefinitionTokenTest, FourTermSum) {
  Tables t;
  t.Randomize(3);
  // "Dead" (id 6) at q=2 attached to UNK at p=4.
  const RowVector<double> row =
      EncodeDefinitionToken(t.View(), Vocabulary::kUnk, 4, 6, 2);
  for (size_t j = 0; j < kDim; ++j) {
    const double expected = t.scale * t.word(Vocabulary::kUnk, j) +
                            ReferencePe(4, j, kDim) + t.scale * t.word(6, j) +
                            t.dpe(1, j);
    EXPECT_NEAR(row(j), expected, 1e-12);
  }
}

TEST(EncodeDefinitionTokenTest, AllZeroTablesGiveZero) {
  Tables t;
  t.pe.setZero();
  EXPECT_TRUE(EncodeDefinitionToken(t.View(), 4, 2, 5, 1).isZero(0));
}

TEST(EncodeDefinitionTokenTest, AnchorsDifferByPositionEncoding) {
  Tables t;
  t.Randomize(4);
  const RowVector<double> a = EncodeDefinitionToken(t.View(), Vocabulary::kUnk, 2, 9, 1);
  const RowVector<double> b = EncodeDefinitionToken(t.View(), Vocabulary::kUnk, 5, 9, 1);
  EXPECT_TRUE((a - b).isApprox(t.pe.row(2) - t.pe.row(5), 1e-12));
}

TEST(EncodeDefinitionTokenTest, DefinitionPositionRange) {
  const Tables t;
  EXPECT_THROW(EncodeDefinitionToken(t.View(), 1, 1, 5, 0), std::out_of_range);
  EXPECT_THROW(EncodeDefinitionToken(t.View(), 1, 1, 5, 51), std::out_of_range);
  EXPECT_NO_THROW(EncodeDefinitionToken(t.View(), 1, 1, 5, 50));
}

// 大家 都 知道 UNK 正在 死亡 with "the Dead Sea" attached at index 3.
EncodedSource FigureSource() {
  EncodedSource source;
  source.tokens = {4, 5, 6, Vocabulary::kUnk, 7, 8};
  source.attachments.push_back({3, Vocabulary::kUnk, {9, 10, 11}});
  return source;
}

TEST(EncodeSentenceTest, FigureLayout) {
  Tables t;
  t.Randomize(5);
  const EncodedSequence<double> seq = EncodeSentence(t.View(), FigureSource(), 64);
  ASSERT_EQ(seq.size(), 9u);
  ASSERT_EQ(seq.rows.rows(), 9);
  EXPECT_TRUE(seq.rows.row(0) == EncodeBaseToken(t.View(), 4, 1));
  for (size_t q = 1; q <= 3; ++q) {
    const RowProvenance& prov = seq.provenance[5 + q];
    EXPECT_EQ(prov.base_index, 3u);
    EXPECT_EQ(prov.definition_pos, q);
    EXPECT_TRUE(seq.rows.row(5 + q) ==
                EncodeDefinitionToken(t.View(), Vocabulary::kUnk, 4,
                                      static_cast<TokenId>(8 + q), q));
  }
}

TEST(EncodeSentenceTest, NoAttachmentsGivesBaseRows) {
  const Tables t;
  EncodedSource source = FigureSource();
  source.attachments.clear();
  EXPECT_EQ(EncodeSentence(t.View(), source, 64).size(), 6u);
}

TEST(EncodeSentenceTest, RowsDoNotDependOnOrder) {
  Tables t;
  t.Randomize(6);
  EncodedSource source = FigureSource();
  source.attachments.push_back({0, 4, {11}});
  const auto seq = EncodeSentence(t.View(), source, 64);
  // Each row is a function of its provenance alone.
  for (size_t r = 0; r < seq.size(); ++r) {
    const RowProvenance& p = seq.provenance[r];
    const RowVector<double> expected =
        p.is_definition()
            ? EncodeDefinitionToken(t.View(), p.anchor, p.base_index + 1, p.token,
                                    p.definition_pos)
            : EncodeBaseToken(t.View(), p.anchor, p.base_index + 1);
    EXPECT_TRUE(seq.rows.row(r) == expected);
  }
}

TEST(EncodeSentenceTest, OverlongDefinitionsAreDroppedFromTheEnd) {
  const Tables t;
  size_t dropped = 0;
  const auto seq = EncodeSentence(t.View(), FigureSource(), 7, &dropped);
  EXPECT_EQ(seq.size(), 7u);
  EXPECT_EQ(dropped, 2u);
  EXPECT_EQ(seq.provenance.back().definition_pos, 1u);
  EXPECT_THROW(EncodeSentence(t.View(), FigureSource(), 5), std::invalid_argument);
}

TEST(EncodeSentenceTest, BadAnchorIsRejected) {
  const Tables t;
  EncodedSource source = FigureSource();
  source.attachments[0].pos = 6;
  EXPECT_THROW(EncodeSentence(t.View(), source, 64), std::invalid_argument);
}

TEST(EncodingGradientTest, ScatterMatchesFiniteDifferences) {
  Tables t;
  t.Randomize(7);
  const EncodedSource source = FigureSource();
  // Loss = sum of rows weighted by a fixed random matrix.
  std::mt19937 rng(8);
  std::normal_distribution<double> normal;
  const auto base = EncodeSentence(t.View(), source, 64);
  Matrix<double> weights(base.rows.rows(), base.rows.cols());
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = normal(rng);
  const auto loss = [&] {
    return EncodeSentence(t.View(), source, 64).rows.cwiseProduct(weights).sum();
  };
  Matrix<double> word_grads = Matrix<double>::Zero(kVocab, kDim);
  Matrix<double> dpe_grads = Matrix<double>::Zero(50, kDim);
  AccumulateEncodingGradients<double>(base.provenance, weights, t.scale, &word_grads,
                                      &dpe_grads);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < t.word.size(); ++i) {
    const double saved = t.word.data()[i];
    t.word.data()[i] = saved + h;
    const double up = loss();
    t.word.data()[i] = saved - h;
    const double down = loss();
    t.word.data()[i] = saved;
    EXPECT_NEAR(word_grads.data()[i], (up - down) / (2 * h), 1e-6);
  }
  for (Eigen::Index i = 0; i < t.dpe.size(); ++i) {
    const double saved = t.dpe.data()[i];
    t.dpe.data()[i] = saved + h;
    const double up = loss();
    t.dpe.data()[i] = saved - h;
    const double down = loss();
    t.dpe.data()[i] = saved;
    EXPECT_NEAR(dpe_grads.data()[i], (up - down) / (2 * h), 1e-6);
  }
  // Only the first three definition positions are used.
  EXPECT_FALSE(dpe_grads.row(2).isZero(0));
  EXPECT_TRUE(dpe_grads.bottomRows(47).isZero(0));
}

TEST(ToIdsTest, UnknownDefinitionTokensBecomeUnk) {
  const std::vector<Sentence> train = {{"a", "b"}};
  const Vocabulary vocab = BuildVocab({&train}, {});
  const AttachedSentence s{{"a", "<unk>"}, {{1, "<unk>", {"b", "gunpowder"}}}};
  const EncodedSource ids = ToIds(s, vocab);
  ASSERT_EQ(ids.attachments.size(), 1u);
  EXPECT_EQ(ids.attachments[0].anchor, Vocabulary::kUnk);
  EXPECT_EQ(ids.attachments[0].definition,
            (std::vector<TokenId>{vocab.IdOf("b"), Vocabulary::kUnk}));
  EXPECT_EQ(ids.num_rows(), 4u);
}

}  // namespace
}  // namespace dictattach
