#include "dictattach/checkpoint.h"

#include <filesystem>
#include <fstream>
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "model_fixtures.h"
#include "test_util.h"

namespace dictattach {
namespace {

using testing::RandomExample;
using testing::TinyConfig;

template <typename T>
void ExpectSameParams(Transformer<T>& a, Transformer<T>& b) {
  auto sa = a.params().Slots();
  auto sb = b.params().Slots();
  ASSERT_EQ(sa.size(), sb.size());
  for (size_t i = 0; i < sa.size(); ++i) {
    ASSERT_EQ(sa[i].name, sb[i].name);
    ASSERT_EQ(sa[i].size(), sb[i].size());
    EXPECT_EQ(std::memcmp(sa[i].data, sb[i].data, sizeof(T) * sa[i].size()), 0) << sa[i].name;
  }
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  Transformer<float> model(TinyConfig(), 14);
  const auto path = (testing::TempDir() / "model.ckpt").string();
  SaveCheckpoint(path, model, 1234, {{"epoch", "3"}});
  CheckpointInfo info;
  Transformer<float> loaded = LoadCheckpoint<float>(path, 1234, &info);
  EXPECT_EQ(info.config, model.config());
  EXPECT_EQ(info.vocab_size, 14u);
  EXPECT_EQ(info.vocab_hash, 1234u);
  EXPECT_EQ(info.scalar, "float32");
  EXPECT_EQ(info.metadata.at("epoch"), "3");
  ExpectSameParams(model, loaded);

  std::mt19937 rng(1);
  const auto example = RandomExample(&rng, 14, 5, 3, 1);
  const std::vector<TokenId> prefix = {Vocabulary::kBos, 5, 6};
  const Matrix<float> a = model.Forward(model.Encode(example.source), prefix);
  const Matrix<float> b = loaded.Forward(loaded.Encode(example.source), prefix);
  EXPECT_TRUE(a == b);
}

TEST(CheckpointTest, DoublePrecisionRoundTrip) {
  Transformer<double> model(TinyConfig(), 10);
  const auto path = (testing::TempDir() / "model.ckpt").string();
  SaveCheckpoint(path, model, 7);
  Transformer<double> loaded = LoadCheckpoint<double>(path);
  ExpectSameParams(model, loaded);
  EXPECT_EQ(ReadCheckpointInfo(path).scalar, "float64");
}

TEST(CheckpointTest, MismatchesAreRejected) {
  Transformer<float> model(TinyConfig(), 10);
  const auto path = (testing::TempDir() / "model.ckpt").string();
  SaveCheckpoint(path, model, 99);
  EXPECT_THROW(LoadCheckpoint<float>(path, 98), std::runtime_error);
  EXPECT_THROW(LoadCheckpoint<double>(path), std::runtime_error);
  EXPECT_NO_THROW(LoadCheckpoint<float>(path, 99));
}

TEST(CheckpointTest, CorruptFilesAreRejected) {
  const auto dir = testing::TempDir();
  Transformer<float> model(TinyConfig(), 10);
  const auto path = (dir / "model.ckpt").string();
  SaveCheckpoint(path, model, 1);

  // Truncated data section.
  std::filesystem::copy_file(path, dir / "short.ckpt");
  std::filesystem::resize_file(dir / "short.ckpt", std::filesystem::file_size(path) - 8);
  EXPECT_THROW(LoadCheckpoint<float>((dir / "short.ckpt").string()), std::runtime_error);

  // Wrong magic.
  {
    std::ofstream out(dir / "bad.ckpt", std::ios::binary);
    out << "NOTACKPT and some more bytes";
  }
  EXPECT_THROW(ReadCheckpointInfo((dir / "bad.ckpt").string()), std::runtime_error);

  // Unsupported version.
  std::filesystem::copy_file(path, dir / "version.ckpt");
  {
    std::fstream io(dir / "version.ckpt", std::ios::binary | std::ios::in | std::ios::out);
    io.seekp(8);
    const uint32_t version = kCheckpointVersion + 1;
    io.write(reinterpret_cast<const char*>(&version), sizeof(version));
  }
  EXPECT_THROW(LoadCheckpoint<float>((dir / "version.ckpt").string()), std::runtime_error);

  EXPECT_THROW(ReadCheckpointInfo((dir / "missing.ckpt").string()), std::runtime_error);
}

}  // namespace
}  // namespace dictattach
