#pragma once

// Checkpoint file: a JSON header describing the model config and the tensor
// table (stable field names, shapes, serialization order), followed by each
// tensor's raw little-endian 64-bit floats. Loading a checkpoint restores
// parameters bit-exactly, so a probe forward pass reproduces logits exactly.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgdlab/errors.hpp"
#include "cgdlab/model.hpp"

namespace cgd::engine {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'C', 'G', 'D', 'L', 'A', 'B', 'v', '1'};

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
  return nlohmann::ordered_json{{"vocab_size", c.vocab_size},
                                {"d_model", c.d_model},
                                {"n_layers", c.n_layers},
                                {"n_heads", c.n_heads},
                                {"d_ff", c.d_ff},
                                {"max_seq_len", c.max_seq_len},
                                {"seed", c.seed},
                                {"tied_embeddings", c.tied_embeddings}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tied_embeddings = j.at("tied_embeddings").get<bool>();
  return c;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
  nlohmann::ordered_json header;
  header["config"] = config_to_json(p.config);
  auto& table = header["tensors"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    table.push_back({{"name", p.names[i]}, {"shape", p.tensors[i].shape}});
  }
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t hlen = head.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Tensor& t : p.tensors) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("checkpoint not found: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kCheckpointMagic))
    throw MalformedLine("not a checkpoint file: " + path);
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string head(hlen, '\0');
  in.read(head.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw MalformedLine("truncated checkpoint header: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedLine("checkpoint header is not valid JSON: " + std::string(e.what()));
  }
  const ModelConfig cfg = config_from_json(header.at("config"));
  ModelParams p = init_params(cfg, InitMode::kZeros);
  const auto& table = header.at("tensors");
  if (table.size() != p.tensors.size())
    throw MalformedLine("checkpoint tensor table size mismatch in " + path);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    const std::string name = table[i].at("name").get<std::string>();
    if (name != p.names[i])
      throw MalformedLine("checkpoint tensor " + std::to_string(i) + " named '" + name +
                          "', expected '" + p.names[i] + "'");
    const auto shape = table[i].at("shape").get<std::vector<std::size_t>>();
    if (shape != p.tensors[i].shape)
      throw MalformedLine("checkpoint tensor '" + name + "' has unexpected shape");
    in.read(reinterpret_cast<char*>(p.tensors[i].data.data()),
            static_cast<std::streamsize>(p.tensors[i].data.size() * sizeof(double)));
    if (!in) throw MalformedLine("truncated tensor data in checkpoint: " + path);
  }
  return p;
}

}  // namespace cgd::engine
