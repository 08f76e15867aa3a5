#pragma once

// Teacher-oracle data augmentation: for every input problem, sample an
// initial answer from the student, collect the teacher critique and refined
// answer, and emit exactly one record. Also: exact-count stratified mixture
// subsampling, and the line-delimited corpus format.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgdlab/errors.hpp"
#include "cgdlab/model.hpp"
#include "cgdlab/rng.hpp"
#include "cgdlab/taskworld.hpp"
#include "cgdlab/tokenizer.hpp"

namespace cgd::datagen {

struct AugmentedRecord {
  std::string prompt;          // x
  std::string initial_answer;  // y'
  std::string critique;        // c (text, ending in a conclusion marker line)
  std::string refined_answer;  // y^
  bool label_correct = false;  // verdict on y', consistent with the critique marker
  std::uint64_t problem_seed = 0;
  taskworld::TaskKind task_kind = taskworld::TaskKind::kChainedArithmetic;
  taskworld::Difficulty difficulty;

  bool operator==(const AugmentedRecord&) const = default;
};

struct GenSettings {
  double temperature = 0.8;  // student sampling temperature for initial answers
  int max_new = 80;
  double corruption_rate = 0.0;
  taskworld::CorruptMode corrupt_mode = taskworld::CorruptMode::kNonsense;
};

struct Provenance {
  std::string student_checkpoint;
  GenSettings gen_config;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<AugmentedRecord> records;
  Provenance provenance;

  std::size_t count_correct() const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.label_correct ? 1 : 0;
    return n;
  }
};

namespace detail {

// Character text of a sampled continuation, cut at the first special token
// the student emitted (delimiters are structure, not content).
inline std::string decode_until_special(const training::Tokenizer& tok,
                                        const std::vector<int>& ids) {
  std::vector<int> cut;
  for (int id : ids) {
    if (tok.is_special(id)) break;
    cut.push_back(id);
  }
  return tok.decode(cut);
}

}  // namespace detail

// Runs the augmentation loop over `problems`. One record per problem, in
// input order. Per-record seeds derive from the master seed and the record
// index, so the result is independent of any evaluation order. A generation
// that fails to terminate is retried once and then accepted truncated; the
// teacher grades whatever text came out, so no record is ever dropped.
inline Corpus augment(const std::vector<taskworld::Problem>& problems,
                      const engine::ModelParams& student, const GenSettings& gen,
                      std::uint64_t seed, const std::string& student_checkpoint_id) {
  if (problems.empty()) throw ConfigError("augment: no input problems");
  const training::Tokenizer& tok = training::tokenizer();
  Corpus corpus;
  corpus.provenance = {student_checkpoint_id, gen, seed};
  corpus.records.reserve(problems.size());

  for (std::size_t i = 0; i < problems.size(); ++i) {
    const taskworld::Problem& p = problems[i];
    const std::uint64_t rs = derive_seed(seed, i);

    std::vector<int> prompt_tokens;
    prompt_tokens.push_back(training::Tokenizer::kPrompt);
    const std::vector<int> x_ids = tok.encode_text(p.prompt_text);
    prompt_tokens.insert(prompt_tokens.end(), x_ids.begin(), x_ids.end());
    prompt_tokens.push_back(training::Tokenizer::kAnswer);

    engine::DecodeConfig decode{gen.temperature, derive_seed(rs, "draw-a")};
    engine::GenerationResult r =
        engine::generate(student, prompt_tokens, gen.max_new, decode, training::Tokenizer::kEos);
    if (r.stop != engine::StopReason::kEos) {
      decode.seed = derive_seed(rs, "draw-b");
      r = engine::generate(student, prompt_tokens, gen.max_new, decode, training::Tokenizer::kEos);
    }
    std::string initial = detail::decode_until_special(tok, r.tokens);
    if (initial.empty()) initial = "(blank)";

    const taskworld::Critique c0 = taskworld::critique(p, initial);
    const std::string refined = taskworld::refine(p, initial, c0);
    taskworld::Critique c = c0;
    if (gen.corruption_rate > 0.0) {
      Rng corrupt_draw(derive_seed(rs, "corrupt-draw"));
      if (corrupt_draw.uniform01() < gen.corruption_rate)
        c = taskworld::corrupt_critique(c0, gen.corrupt_mode, derive_seed(rs, "corrupt-seed"));
    }
    const std::optional<bool> marker = taskworld::conclusion_marker(c.text);
    if (!marker) throw ConfigError("augment: critique lost its conclusion marker");

    AugmentedRecord rec;
    rec.prompt = p.prompt_text;
    rec.initial_answer = initial;
    rec.critique = c.text;
    rec.refined_answer = refined;
    rec.label_correct = *marker;
    rec.problem_seed = p.seed;
    rec.task_kind = p.kind;
    rec.difficulty = p.difficulty;
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

// Exact-count stratified subsample: round(rho*n) correct-labeled records and
// n - round(rho*n) incorrect-labeled ones, drawn uniformly without
// replacement, then shuffled. Reports available counts when a stratum is too
// small.
inline Corpus apply_mixture(const Corpus& corpus, double correct_fraction, std::size_t target_size,
                            std::uint64_t seed) {
  if (!(correct_fraction >= 0.0 && correct_fraction <= 1.0))
    throw ConfigError("apply_mixture: correct_fraction must lie in [0, 1]");
  if (target_size == 0) throw ConfigError("apply_mixture: target_size must be positive");
  const std::size_t want_correct =
      static_cast<std::size_t>(std::llround(correct_fraction * static_cast<double>(target_size)));
  const std::size_t want_incorrect = target_size - want_correct;

  std::vector<std::size_t> correct_idx, incorrect_idx;
  for (std::size_t i = 0; i < corpus.records.size(); ++i)
    (corpus.records[i].label_correct ? correct_idx : incorrect_idx).push_back(i);
  if (correct_idx.size() < want_correct || incorrect_idx.size() < want_incorrect)
    throw InsufficientStratum(
        "apply_mixture: need " + std::to_string(want_correct) + " correct and " +
        std::to_string(want_incorrect) + " incorrect records, corpus has " +
        std::to_string(correct_idx.size()) + " and " + std::to_string(incorrect_idx.size()));

  Rng rng_correct(derive_seed(seed, "stratum-correct"));
  Rng rng_incorrect(derive_seed(seed, "stratum-incorrect"));
  rng_correct.shuffle(correct_idx);
  rng_incorrect.shuffle(incorrect_idx);
  std::vector<std::size_t> chosen(correct_idx.begin(),
                                  correct_idx.begin() + static_cast<std::ptrdiff_t>(want_correct));
  chosen.insert(chosen.end(), incorrect_idx.begin(),
                incorrect_idx.begin() + static_cast<std::ptrdiff_t>(want_incorrect));
  Rng rng_order(derive_seed(seed, "mixture-order"));
  rng_order.shuffle(chosen);

  Corpus out;
  out.provenance = corpus.provenance;
  out.records.reserve(chosen.size());
  for (std::size_t i : chosen) out.records.push_back(corpus.records[i]);
  return out;
}

// ----- corpus file format ----------------------------------------------
//
// One JSON object per line with exactly the fields prompt, initial_answer,
// critique, refined_answer, label, problem_seed, task_kind, difficulty.
// Provenance lives in a sidecar file <corpus>.meta with the fields
// student_checkpoint, gen_config, seed.

inline nlohmann::ordered_json record_to_json(const AugmentedRecord& r) {
  return nlohmann::ordered_json{
      {"prompt", r.prompt},
      {"initial_answer", r.initial_answer},
      {"critique", r.critique},
      {"refined_answer", r.refined_answer},
      {"label", r.label_correct ? "correct" : "incorrect"},
      {"problem_seed", r.problem_seed},
      {"task_kind", taskworld::to_string(r.task_kind)},
      {"difficulty",
       {{"min_steps", r.difficulty.min_steps},
        {"max_steps", r.difficulty.max_steps},
        {"operand_min", r.difficulty.operand_min},
        {"operand_max", r.difficulty.operand_max}}}};
}

inline AugmentedRecord record_from_json(const nlohmann::json& j) {
  AugmentedRecord r;
  r.prompt = j.at("prompt").get<std::string>();
  r.initial_answer = j.at("initial_answer").get<std::string>();
  r.critique = j.at("critique").get<std::string>();
  r.refined_answer = j.at("refined_answer").get<std::string>();
  const std::string label = j.at("label").get<std::string>();
  if (label != "correct" && label != "incorrect")
    throw MalformedLine("field 'label' must be 'correct' or 'incorrect'");
  r.label_correct = label == "correct";
  r.problem_seed = j.at("problem_seed").get<std::uint64_t>();
  r.task_kind = taskworld::task_kind_from_string(j.at("task_kind").get<std::string>());
  const auto& d = j.at("difficulty");
  r.difficulty.min_steps = d.at("min_steps").get<int>();
  r.difficulty.max_steps = d.at("max_steps").get<int>();
  r.difficulty.operand_min = d.at("operand_min").get<int>();
  r.difficulty.operand_max = d.at("operand_max").get<int>();
  return r;
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open corpus for writing: " + path);
  for (const AugmentedRecord& r : corpus.records) out << record_to_json(r).dump() << "\n";
  if (!out) throw std::runtime_error("corpus write failed: " + path);

  nlohmann::ordered_json meta{
      {"student_checkpoint", corpus.provenance.student_checkpoint},
      {"gen_config",
       {{"temperature", corpus.provenance.gen_config.temperature},
        {"max_new", corpus.provenance.gen_config.max_new},
        {"corruption_rate", corpus.provenance.gen_config.corruption_rate},
        {"corrupt_mode", taskworld::to_string(corpus.provenance.gen_config.corrupt_mode)}}},
      {"seed", corpus.provenance.seed}};
  std::ofstream meta_out(path + ".meta", std::ios::binary | std::ios::trunc);
  if (!meta_out) throw std::runtime_error("cannot open corpus meta for writing: " + path);
  meta_out << meta.dump(2) << "\n";
}

inline Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("corpus not found: " + path);
  Corpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      corpus.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine("corpus " + path + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const MalformedLine& e) {
      throw MalformedLine("corpus " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  std::ifstream meta_in(path + ".meta", std::ios::binary);
  if (meta_in) {
    try {
      nlohmann::json meta = nlohmann::json::parse(meta_in);
      corpus.provenance.student_checkpoint = meta.at("student_checkpoint").get<std::string>();
      const auto& g = meta.at("gen_config");
      corpus.provenance.gen_config.temperature = g.at("temperature").get<double>();
      corpus.provenance.gen_config.max_new = g.at("max_new").get<int>();
      corpus.provenance.gen_config.corruption_rate = g.at("corruption_rate").get<double>();
      corpus.provenance.gen_config.corrupt_mode =
          taskworld::corrupt_mode_from_string(g.at("corrupt_mode").get<std::string>());
      corpus.provenance.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine("corpus meta " + path + ".meta: " + e.what());
    }
  }
  return corpus;
}

}  // namespace cgd::datagen
