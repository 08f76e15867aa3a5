#pragma once

// Character-level tokenizer over a fixed task alphabet plus five special
// delimiter tokens. The table is static so every run, corpus and checkpoint
// shares the same ids:
//
//   id 0  <|prompt|>    id 1  <|initial|>   id 2  <|critique|>
//   id 3  <|answer|>    id 4  <|eos|>
//   id 5+ one id per character of kCharset, in charset order.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgdlab/errors.hpp"

namespace cgd::training {

inline constexpr std::string_view kCharset =
    " \n()*+,-.:=[]^0123456789"
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ";

inline constexpr std::array<std::string_view, 5> kSpecialNames = {
    "<|prompt|>", "<|initial|>", "<|critique|>", "<|answer|>", "<|eos|>"};

class Tokenizer {
 public:
  enum Special : int { kPrompt = 0, kInitial = 1, kCritique = 2, kAnswer = 3, kEos = 4 };

  Tokenizer() {
    char_to_id_.fill(-1);
    for (std::size_t i = 0; i < kCharset.size(); ++i)
      char_to_id_[static_cast<unsigned char>(kCharset[i])] =
          kNumSpecials + static_cast<int>(i);
  }

  static constexpr int kNumSpecials = 5;

  int vocab_size() const { return kNumSpecials + static_cast<int>(kCharset.size()); }

  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  int char_id(char c) const {
    const int id = char_to_id_[static_cast<unsigned char>(c)];
    if (id < 0)
      throw TokenOutOfVocab(std::string("character '") + c + "' (code " +
                            std::to_string(static_cast<int>(static_cast<unsigned char>(c))) +
                            ") is not in the task alphabet");
    return id;
  }

  std::vector<int> encode_text(std::string_view text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(char_id(c));
    return ids;
  }

  // Inverse of encode_text for character ids. Special tokens are skipped by
  // default, or rendered as their literal names with keep_special.
  std::string decode(std::span<const int> ids, bool keep_special = false) const {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
      if (id < 0 || id >= vocab_size())
        throw TokenOutOfVocab("decode: id " + std::to_string(id) + " out of range");
      if (id < kNumSpecials) {
        if (keep_special) out += kSpecialNames[static_cast<std::size_t>(id)];
        continue;
      }
      out += kCharset[static_cast<std::size_t>(id - kNumSpecials)];
    }
    return out;
  }

 private:
  std::array<int, 256> char_to_id_{};
};

inline const Tokenizer& tokenizer() {
  static const Tokenizer instance;
  return instance;
}

}  // namespace cgd::training
