#include "dictattach/checkpoint.h"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <type_traits>

#include "json.hpp"

namespace dictattach {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'T', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
std::string ScalarName() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

nlohmann::ordered_json ConfigToJson(const ModelConfig& c) {
  return {{"d_model", c.d_model},         {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers}, {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},         {"dropout", c.dropout},
          {"max_length", c.max_length},   {"label_smoothing", c.label_smoothing},
          {"seed", c.seed}};
}

ModelConfig ConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<size_t>();
  c.encoder_layers = j.at("encoder_layers").get<size_t>();
  c.decoder_layers = j.at("decoder_layers").get<size_t>();
  c.heads = j.at("heads").get<size_t>();
  c.ffn_dim = j.at("ffn_dim").get<size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.max_length = j.at("max_length").get<size_t>();
  c.label_smoothing = j.at("label_smoothing").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

struct RawCheckpoint {
  nlohmann::json header;
  std::streampos data_offset;
};

RawCheckpoint ReadHeader(std::ifstream& in, const std::string& path) {
  char magic[8];
  uint32_t version = 0;
  uint64_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw std::runtime_error(path + ": truncated header");
  RawCheckpoint raw;
  try {
    raw.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": bad header: " + e.what());
  }
  raw.data_offset = in.tellg();
  return raw;
}

CheckpointInfo InfoFromHeader(const nlohmann::json& header) {
  CheckpointInfo info;
  info.config = ConfigFromJson(header.at("config"));
  info.vocab_size = header.at("vocab_size").get<size_t>();
  info.vocab_hash = header.at("vocab_hash").get<uint64_t>();
  info.scalar = header.at("scalar").get<std::string>();
  info.metadata = header.at("metadata").get<std::map<std::string, std::string>>();
  return info;
}

}  // namespace

template <typename T>
void SaveCheckpoint(const std::string& path, const Transformer<T>& model,
                    uint64_t vocab_hash, const std::map<std::string, std::string>& metadata) {
  auto params = model.params();  // copy: Slots() needs mutable access
  const auto slots = params.Slots();
  nlohmann::ordered_json header;
  header["config"] = ConfigToJson(model.config());
  header["vocab_size"] = model.vocab_size();
  header["vocab_hash"] = vocab_hash;
  header["scalar"] = ScalarName<T>();
  header["metadata"] = metadata;
  auto tensors = nlohmann::json::array();
  for (const auto& slot : slots) {
    tensors.push_back({{"name", slot.name}, {"rows", slot.rows}, {"cols", slot.cols}});
  }
  header["tensors"] = std::move(tensors);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const uint32_t version = kCheckpointVersion;
  const uint64_t length = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& slot : slots) {
    out.write(reinterpret_cast<const char*>(slot.data),
              static_cast<std::streamsize>(slot.size() * sizeof(T)));
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

CheckpointInfo ReadCheckpointInfo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return InfoFromHeader(ReadHeader(in, path).header);
}

template <typename T>
Transformer<T> LoadCheckpoint(const std::string& path, uint64_t expected_vocab_hash,
                              CheckpointInfo* info_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const RawCheckpoint raw = ReadHeader(in, path);
  const CheckpointInfo info = InfoFromHeader(raw.header);
  if (info.scalar != ScalarName<T>()) {
    throw std::runtime_error(path + ": stored as " + info.scalar + ", requested " +
                             ScalarName<T>());
  }
  if (expected_vocab_hash != 0 && info.vocab_hash != expected_vocab_hash) {
    throw std::runtime_error(path + ": checkpoint was trained with a different vocabulary");
  }
  info.config.Validate();
  TransformerParams<T> params = ZeroParams<T>(info.config, info.vocab_size);
  auto slots = params.Slots();
  const auto& tensors = raw.header.at("tensors");
  if (tensors.size() != slots.size()) {
    throw std::runtime_error(path + ": tensor count does not match the config");
  }
  for (size_t i = 0; i < slots.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != slots[i].name ||
        tensors[i].at("rows").get<Eigen::Index>() != slots[i].rows ||
        tensors[i].at("cols").get<Eigen::Index>() != slots[i].cols) {
      throw std::runtime_error(path + ": unexpected tensor " +
                               tensors[i].at("name").get<std::string>());
    }
    in.read(reinterpret_cast<char*>(slots[i].data),
            static_cast<std::streamsize>(slots[i].size() * sizeof(T)));
  }
  if (!in) throw std::runtime_error(path + ": truncated tensor data");
  if (info_out != nullptr) *info_out = info;
  return Transformer<T>(info.config, std::move(params));
}

template void SaveCheckpoint<float>(const std::string&, const Transformer<float>&, uint64_t,
                                    const std::map<std::string, std::string>&);
template void SaveCheckpoint<double>(const std::string&, const Transformer<double>&, uint64_t,
                                     const std::map<std::string, std::string>&);
template Transformer<float> LoadCheckpoint<float>(const std::string&, uint64_t,
                                                  CheckpointInfo*);
template Transformer<double> LoadCheckpoint<double>(const std::string&, uint64_t,
                                                    CheckpointInfo*);

}  // namespace dictattach
