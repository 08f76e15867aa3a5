#pragma once

// Evaluation metrics and training diagnostics: exact match, conclusion-marker
// format drift, refined-answer-start entropy, with/without-critique gradient
// norms, attention flow over prompt sections, counterfactual-critique
// robustness, Bayesian posterior consistency. Probes are read-only over model
// parameters; per-record computations aggregate in fixed index order.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgdlab/datagen.hpp"
#include "cgdlab/errors.hpp"
#include "cgdlab/model.hpp"
#include "cgdlab/stats.hpp"
#include "cgdlab/taskworld.hpp"
#include "cgdlab/tokenizer.hpp"
#include "cgdlab/training.hpp"

namespace cgd::probes {

// ----- shared helpers ----------------------------------------------------

// Prompt-only evaluation context: <|prompt|> x <|answer|>.
inline std::vector<int> eval_prompt_tokens(const std::string& prompt_text) {
  const training::Tokenizer& tok = training::tokenizer();
  std::vector<int> ids{training::Tokenizer::kPrompt};
  const auto x = tok.encode_text(prompt_text);
  ids.insert(ids.end(), x.begin(), x.end());
  ids.push_back(training::Tokenizer::kAnswer);
  return ids;
}

// Full critique-conditioned context up to and including <|answer|>:
// <|prompt|> x <|initial|> y' <|critique|> c <|answer|>.
inline std::vector<int> refine_context_tokens(const std::string& prompt,
                                              const std::string& initial,
                                              const std::string& critique) {
  const training::Tokenizer& tok = training::tokenizer();
  std::vector<int> ids{training::Tokenizer::kPrompt};
  auto app = [&](const std::string& s) {
    const auto v = tok.encode_text(s);
    ids.insert(ids.end(), v.begin(), v.end());
  };
  app(prompt);
  ids.push_back(training::Tokenizer::kInitial);
  app(initial);
  ids.push_back(training::Tokenizer::kCritique);
  app(critique);
  ids.push_back(training::Tokenizer::kAnswer);
  return ids;
}

// Value of the last "Answer:" line, if any.
inline std::optional<std::string> parse_final_answer(const std::string& text) {
  const std::size_t pos = text.rfind("Answer:");
  if (pos == std::string::npos) return std::nullopt;
  std::string rest = text.substr(pos + 7);
  const std::size_t nl = rest.find('\n');
  if (nl != std::string::npos) rest = rest.substr(0, nl);
  std::size_t b = 0, e = rest.size();
  while (b < e && rest[b] == ' ') ++b;
  while (e > b && (rest[e - 1] == ' ' || rest[e - 1] == '\r')) --e;
  if (b == e) return std::nullopt;
  return rest.substr(b, e - b);
}

// ----- exact match --------------------------------------------------------

struct EvalRow {
  std::size_t index = 0;
  std::string task_kind;
  bool correct = false;
  std::string parsed;
  std::string gold;
};

struct EvalReport {
  double exact_match_accuracy = 0.0;
  std::size_t n = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_task;  // kind -> {n, correct}
  std::vector<EvalRow> rows;
};

// Scores already-generated answer texts against gold answers, string-exactly
// on the parsed final answer line. Unparseable output counts as wrong.
inline EvalReport score_outputs(const std::vector<taskworld::Problem>& problems,
                                const std::vector<std::string>& outputs) {
  if (problems.size() != outputs.size())
    throw ShapeError("score_outputs: one output per problem required");
  EvalReport rep;
  rep.n = problems.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    EvalRow row;
    row.index = i;
    row.task_kind = taskworld::to_string(problems[i].kind);
    row.gold = problems[i].gold_answer;
    row.parsed = parse_final_answer(outputs[i]).value_or("");
    row.correct = !row.parsed.empty() && row.parsed == row.gold;
    auto& bucket = rep.per_task[row.task_kind];
    bucket.first += 1;
    bucket.second += row.correct ? 1 : 0;
    correct += row.correct ? 1 : 0;
    rep.rows.push_back(std::move(row));
  }
  rep.exact_match_accuracy =
      rep.n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(rep.n);
  return rep;
}

// Generates prompt-only answers and scores them. Returns the raw generated
// texts alongside the report so drift can be measured on the same outputs.
// Greedy decoding (the default) makes the whole evaluation deterministic.
inline std::pair<EvalReport, std::vector<std::string>> exact_match(
    const engine::ModelParams& params, const std::vector<taskworld::Problem>& problems,
    int max_new, const engine::DecodeConfig& decode = {}) {
  const training::Tokenizer& tok = training::tokenizer();
  std::vector<std::string> outputs;
  outputs.reserve(problems.size());
  for (const auto& p : problems) {
    const auto gen =
        engine::generate(params, eval_prompt_tokens(p.prompt_text), max_new, decode,
                         training::Tokenizer::kEos);
    outputs.push_back(tok.decode(gen.tokens));
  }
  return {score_outputs(problems, outputs), outputs};
}

// ----- format drift --------------------------------------------------------

struct DriftReport {
  double drift_rate = 0.0;  // fraction of outputs containing a conclusion marker
  std::size_t n = 0;
  std::vector<bool> leaked;
  double mean_output_chars = 0.0;  // auxiliary, not acceptance-bearing
};

inline DriftReport format_drift_rate(const std::vector<std::string>& outputs) {
  DriftReport rep;
  rep.n = outputs.size();
  std::size_t hits = 0;
  double chars = 0;
  for (const std::string& s : outputs) {
    const bool leak = s.find(taskworld::kConclusionRight) != std::string::npos ||
                      s.find(taskworld::kConclusionWrong) != std::string::npos;
    rep.leaked.push_back(leak);
    hits += leak ? 1 : 0;
    chars += static_cast<double>(s.size());
  }
  rep.drift_rate = rep.n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(rep.n);
  rep.mean_output_chars = rep.n == 0 ? 0.0 : chars / static_cast<double>(rep.n);
  return rep;
}

// ----- entropy probe --------------------------------------------------------

struct EntropyReport {
  std::vector<double> per_record;  // nats
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t n = 0;
  int window = 1;
};

inline double shannon_entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double q : probs) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

// Shannon entropy (nats) of the next-token distribution at the start of the
// refined answer: one forward pass on x||y'||c up to and including the
// <|answer|> delimiter. window > 1 averages over the first `window` target
// positions by teacher-forcing the record's refined answer.
inline EntropyReport entropy_probe(const engine::ModelParams& params,
                                   const std::vector<datagen::AugmentedRecord>& records,
                                   int window = 1) {
  if (window < 1) throw ConfigError("entropy_probe: window must be >= 1");
  const training::Tokenizer& tok = training::tokenizer();
  EntropyReport rep;
  rep.window = window;
  rep.n = records.size();
  const std::size_t V = params.config.vocab_size;
  for (const auto& r : records) {
    std::vector<int> ctx = refine_context_tokens(r.prompt, r.initial_answer, r.critique);
    const std::size_t base = ctx.size();
    if (window > 1) {
      const auto tail = tok.encode_text(r.refined_answer);
      for (int i = 0; i + 1 < window && static_cast<std::size_t>(i) < tail.size(); ++i)
        ctx.push_back(tail[static_cast<std::size_t>(i)]);
    }
    const engine::Tensor logits = engine::forward(params, ctx);
    double h_sum = 0.0;
    std::size_t h_n = 0;
    for (std::size_t pos = base - 1; pos < ctx.size(); ++pos) {
      const auto probs = engine::softmax({logits.data.data() + pos * V, V});
      h_sum += shannon_entropy(probs);
      ++h_n;
    }
    rep.per_record.push_back(h_sum / static_cast<double>(h_n));
  }
  if (!rep.per_record.empty()) {
    rep.mean = stats::mean(rep.per_record);
    rep.std_dev = stats::sample_std(rep.per_record);
  }
  return rep;
}

// ----- gradient-norm probe ---------------------------------------------------

enum class GradCondition { kWithCritique, kWithoutCritique };

// Full-parameter L2 gradient norm of the refined-answer loss for one record,
// with the critique present (CGD rendering) or absent (CGDNoCritique
// rendering). One forward and backward pass; no optimizer step.
inline double grad_norm_probe(const engine::ModelParams& params,
                              const datagen::AugmentedRecord& record, GradCondition condition) {
  const training::Objective obj = condition == GradCondition::kWithCritique
                                      ? training::Objective::kCgd
                                      : training::Objective::kCgdNoCritique;
  const auto ex =
      training::render(record, "", obj, training::tokenizer(), params.config.max_seq_len);
  engine::Graph g;
  const int loss = training::build_masked_nll(g, params, ex);
  engine::GradTable grads = engine::make_grads(params);
  g.backward(loss, grads);
  return engine::grad_l2_norm(grads);
}

struct GradNormReport {
  std::vector<double> with_critique;
  std::vector<double> without_critique;
  double mean_with = 0.0, mean_without = 0.0;
  double std_with = 0.0, std_without = 0.0;
  std::size_t n = 0;
};

inline GradNormReport grad_norm_report(const engine::ModelParams& params,
                                       const std::vector<datagen::AugmentedRecord>& records) {
  GradNormReport rep;
  rep.n = records.size();
  for (const auto& r : records) {
    rep.with_critique.push_back(grad_norm_probe(params, r, GradCondition::kWithCritique));
    rep.without_critique.push_back(grad_norm_probe(params, r, GradCondition::kWithoutCritique));
  }
  if (!rep.with_critique.empty()) {
    rep.mean_with = stats::mean(rep.with_critique);
    rep.mean_without = stats::mean(rep.without_critique);
    rep.std_with = stats::sample_std(rep.with_critique);
    rep.std_without = stats::sample_std(rep.without_critique);
  }
  return rep;
}

// ----- attention flow ---------------------------------------------------------

// Generation phases over the generated-token index: token 1, the first 25%,
// the middle 50%, and the last 25%.
enum class Phase { kToken1, kEarly, kMiddle, kLate };

inline std::string to_string(Phase p) {
  switch (p) {
    case Phase::kToken1: return "token1";
    case Phase::kEarly: return "early";
    case Phase::kMiddle: return "middle";
    case Phase::kLate: return "late";
  }
  throw ConfigError("unknown phase");
}

struct AttentionFlowRow {
  std::size_t layer = 0;
  Phase phase = Phase::kToken1;
  double problem_pct = 0.0;
  double student_answer_pct = 0.0;
  double critique_pct = 0.0;
  std::size_t n_tokens = 0;
};

struct AttentionFlowReport {
  std::vector<AttentionFlowRow> rows;  // layer-major, phase-minor
  std::size_t generated_tokens = 0;
};

// Attention flow of one record: generate greedily with capture on, and for
// each generated token aggregate the head-averaged attention row over the
// three context sections (Problem = <|prompt|> and x, StudentAnswer =
// <|initial|> and y', Critique = <|critique|> and c), renormalized to sum to
// 100. The <|answer|> delimiter and previously generated tokens are outside
// the three sections and excluded by the renormalization.
inline AttentionFlowReport attention_flow(const engine::ModelParams& params,
                                          const datagen::AugmentedRecord& record, int max_new) {
  const training::Tokenizer& tok = training::tokenizer();
  const auto x_ids = tok.encode_text(record.prompt);
  const auto y_ids = tok.encode_text(record.initial_answer);
  const auto c_ids = tok.encode_text(record.critique);
  const std::size_t problem_end = 1 + x_ids.size();                 // [0, problem_end)
  const std::size_t student_end = problem_end + 1 + y_ids.size();   // [problem_end, student_end)
  const std::size_t critique_end = student_end + 1 + c_ids.size();  // [student_end, critique_end)

  const std::vector<int> ctx =
      refine_context_tokens(record.prompt, record.initial_answer, record.critique);
  std::vector<engine::AttentionCapture> captures;
  const auto gen = engine::generate(params, ctx, max_new, {}, training::Tokenizer::kEos, &captures);
  const std::size_t G = captures.size();
  AttentionFlowReport rep;
  rep.generated_tokens = G;
  if (G == 0) return rep;

  const std::size_t n_layers = params.config.n_layers;
  const std::size_t q1 = std::max<std::size_t>(1, G / 4);
  const std::size_t q3 = std::max(q1, (3 * G) / 4);
  auto phase_of = [&](std::size_t i) {
    if (i == 0) return Phase::kToken1;
    if (i < q1) return Phase::kEarly;
    if (i < q3) return Phase::kMiddle;
    return Phase::kLate;
  };

  struct Acc {
    double p = 0, s = 0, c = 0;
    std::size_t n = 0;
  };
  std::vector<std::array<Acc, 4>> acc(n_layers);
  for (std::size_t i = 0; i < G; ++i) {
    const engine::AttentionCapture& cap = captures[i];
    const std::size_t L = cap.seq_len;
    const std::size_t row = L - 1;  // the position that produced this token
    const auto ph = static_cast<std::size_t>(phase_of(i));
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
      const std::vector<double>& m = cap.layer_attn[layer];
      double mass_p = 0, mass_s = 0, mass_c = 0;
      for (std::size_t j = 0; j < problem_end; ++j) mass_p += m[row * L + j];
      for (std::size_t j = problem_end; j < student_end; ++j) mass_s += m[row * L + j];
      for (std::size_t j = student_end; j < critique_end; ++j) mass_c += m[row * L + j];
      const double total = mass_p + mass_s + mass_c;
      if (total <= 0.0) continue;
      acc[layer][ph].p += 100.0 * mass_p / total;
      acc[layer][ph].s += 100.0 * mass_s / total;
      acc[layer][ph].c += 100.0 * mass_c / total;
      acc[layer][ph].n += 1;
    }
  }
  for (std::size_t layer = 0; layer < n_layers; ++layer) {
    for (std::size_t ph = 0; ph < 4; ++ph) {
      const Acc& a = acc[layer][ph];
      if (a.n == 0) continue;
      AttentionFlowRow row;
      row.layer = layer;
      row.phase = static_cast<Phase>(ph);
      row.problem_pct = a.p / static_cast<double>(a.n);
      row.student_answer_pct = a.s / static_cast<double>(a.n);
      row.critique_pct = a.c / static_cast<double>(a.n);
      row.n_tokens = a.n;
      rep.rows.push_back(row);
    }
  }
  (void)gen;
  return rep;
}

// ----- counterfactual probe -----------------------------------------------------

struct CounterfactualOutcome {
  bool factual_correct = false;
  bool counterfactual_correct = false;
};

inline CounterfactualOutcome counterfactual_outcome_from_texts(const taskworld::Problem& problem,
                                                               const std::string& factual_text,
                                                               const std::string& counter_text) {
  return {taskworld::verify(problem, factual_text).correct,
          taskworld::verify(problem, counter_text).correct};
}

// Samples an initial answer from the model, then compares greedy refinements
// under the teacher's factual critique and under a nonsensical critique.
inline CounterfactualOutcome counterfactual_probe(const engine::ModelParams& params,
                                                  const taskworld::Problem& problem,
                                                  double initial_temperature, int max_new,
                                                  std::uint64_t seed) {
  const training::Tokenizer& tok = training::tokenizer();
  const auto gen_initial =
      engine::generate(params, eval_prompt_tokens(problem.prompt_text), max_new,
                       {initial_temperature, derive_seed(seed, "initial")},
                       training::Tokenizer::kEos);
  std::string initial = tok.decode(gen_initial.tokens);
  if (initial.empty()) initial = "(blank)";
  const taskworld::Critique factual = taskworld::critique(problem, initial);
  const taskworld::Critique nonsense = taskworld::corrupt_critique(
      factual, taskworld::CorruptMode::kNonsense, derive_seed(seed, "nonsense"));

  auto refine_with = [&](const taskworld::Critique& c) {
    const auto ctx = refine_context_tokens(problem.prompt_text, initial, c.text);
    const auto gen = engine::generate(params, ctx, max_new, {}, training::Tokenizer::kEos);
    return tok.decode(gen.tokens);
  };
  return counterfactual_outcome_from_texts(problem, refine_with(factual), refine_with(nonsense));
}

// 2x2 outcome table over a problem fixture.
struct CounterfactualTable {
  std::size_t both_correct = 0;      // factual correct, counterfactual correct
  std::size_t factual_only = 0;      // factual correct, counterfactual derailed
  std::size_t counterfactual_only = 0;
  std::size_t neither = 0;
  std::size_t n = 0;
  std::vector<CounterfactualOutcome> rows;

  void add(const CounterfactualOutcome& o) {
    rows.push_back(o);
    n += 1;
    if (o.factual_correct && o.counterfactual_correct) both_correct += 1;
    else if (o.factual_correct) factual_only += 1;
    else if (o.counterfactual_correct) counterfactual_only += 1;
    else neither += 1;
  }
};

// ----- Bayesian consistency -----------------------------------------------------

struct BayesCase {
  std::vector<double> prior;        // sums to 1
  std::vector<double> likelihood;   // nonnegative, not all zero
  std::vector<double> target_posterior;
};

struct BayesResult {
  std::vector<double> posterior;
  double kl_target_vs_computed = 0.0;
};

// Posterior = normalize(prior * likelihood), elementwise, plus
// KL(target || computed) when a target is given.
inline BayesResult bayes_posterior(const BayesCase& c) {
  if (c.prior.size() != c.likelihood.size())
    throw ShapeError("bayes_posterior: prior/likelihood size mismatch");
  if (c.prior.empty()) throw ShapeError("bayes_posterior: empty case");
  double prior_sum = 0.0;
  for (double p : c.prior) {
    if (p < 0.0) throw ShapeError("bayes_posterior: negative prior mass");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9)
    throw ShapeError("bayes_posterior: prior must sum to 1");
  for (double w : c.likelihood) {
    if (w < 0.0) throw ShapeError("bayes_posterior: negative likelihood weight");
  }
  BayesResult r;
  r.posterior.resize(c.prior.size());
  double z = 0.0;
  for (std::size_t i = 0; i < c.prior.size(); ++i) {
    r.posterior[i] = c.prior[i] * c.likelihood[i];
    z += r.posterior[i];
  }
  if (z <= 0.0) throw ShapeError("bayes_posterior: zero normalizer");
  for (double& v : r.posterior) v /= z;
  if (!c.target_posterior.empty()) {
    if (c.target_posterior.size() != r.posterior.size())
      throw ShapeError("bayes_posterior: target posterior size mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < r.posterior.size(); ++i) {
      const double t = c.target_posterior[i];
      if (t > 0.0) {
        if (r.posterior[i] <= 0.0) {
          kl = std::numeric_limits<double>::infinity();
          break;
        }
        kl += t * std::log(t / r.posterior[i]);
      }
    }
    r.kl_target_vs_computed = kl;
  }
  return r;
}

// ----- report files ---------------------------------------------------------
//
// Every report persists as line-delimited JSON rows plus a *_summary.json;
// the CLI's report command consumes only these files.

namespace io {

inline void write_lines(const std::string& path, const std::vector<nlohmann::ordered_json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  for (const auto& r : rows) out << r.dump() << "\n";
}

inline void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << "\n";
}

inline std::vector<nlohmann::json> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("report not found: " + path);
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine("report " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("report not found: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedLine("report " + path + ": " + e.what());
  }
}

}  // namespace io

inline void write_eval_report(const EvalReport& rep, const std::string& rows_path,
                              const std::string& summary_path) {
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& r : rep.rows)
    rows.push_back({{"index", r.index},
                    {"task_kind", r.task_kind},
                    {"correct", r.correct},
                    {"parsed", r.parsed},
                    {"gold", r.gold}});
  io::write_lines(rows_path, rows);
  nlohmann::ordered_json per_task;
  for (const auto& [kind, counts] : rep.per_task)
    per_task[kind] = {{"n", counts.first}, {"correct", counts.second}};
  io::write_json(summary_path, {{"n", rep.n},
                                {"exact_match_accuracy", rep.exact_match_accuracy},
                                {"per_task", per_task}});
}

inline void write_drift_report(const DriftReport& rep, const std::string& rows_path,
                               const std::string& summary_path) {
  std::vector<nlohmann::ordered_json> rows;
  for (std::size_t i = 0; i < rep.leaked.size(); ++i)
    rows.push_back({{"index", i}, {"leaked", static_cast<bool>(rep.leaked[i])}});
  io::write_lines(rows_path, rows);
  io::write_json(summary_path, {{"n", rep.n},
                                {"drift_rate", rep.drift_rate},
                                {"mean_output_chars", rep.mean_output_chars}});
}

inline void write_entropy_report(const EntropyReport& rep, const std::string& rows_path,
                                 const std::string& summary_path) {
  std::vector<nlohmann::ordered_json> rows;
  for (std::size_t i = 0; i < rep.per_record.size(); ++i)
    rows.push_back({{"index", i}, {"entropy", rep.per_record[i]}});
  io::write_lines(rows_path, rows);
  io::write_json(summary_path,
                 {{"n", rep.n}, {"mean", rep.mean}, {"std", rep.std_dev}, {"window", rep.window}});
}

inline void write_grad_norm_report(const GradNormReport& rep, const std::string& rows_path,
                                   const std::string& summary_path) {
  std::vector<nlohmann::ordered_json> rows;
  for (std::size_t i = 0; i < rep.with_critique.size(); ++i)
    rows.push_back({{"index", i},
                    {"with_critique", rep.with_critique[i]},
                    {"without_critique", rep.without_critique[i]}});
  io::write_lines(rows_path, rows);
  io::write_json(summary_path, {{"n", rep.n},
                                {"mean_with", rep.mean_with},
                                {"mean_without", rep.mean_without},
                                {"std_with", rep.std_with},
                                {"std_without", rep.std_without}});
}

inline void write_attention_report(const std::vector<AttentionFlowReport>& reps,
                                   const std::string& rows_path,
                                   const std::string& summary_path) {
  // aggregate across records per (layer, phase), weighted by token counts
  struct Acc {
    double p = 0, s = 0, c = 0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::size_t, std::string>, Acc> acc;
  for (const auto& rep : reps) {
    for (const auto& row : rep.rows) {
      Acc& a = acc[{row.layer, to_string(row.phase)}];
      const double w = static_cast<double>(row.n_tokens);
      a.p += row.problem_pct * w;
      a.s += row.student_answer_pct * w;
      a.c += row.critique_pct * w;
      a.n += row.n_tokens;
    }
  }
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& [key, a] : acc) {
    if (a.n == 0) continue;
    const double w = static_cast<double>(a.n);
    rows.push_back({{"layer", key.first},
                    {"phase", key.second},
                    {"problem_pct", a.p / w},
                    {"student_answer_pct", a.s / w},
                    {"critique_pct", a.c / w},
                    {"n_tokens", a.n}});
  }
  io::write_lines(rows_path, rows);
  io::write_json(summary_path, {{"n_records", reps.size()}});
}

inline void write_counterfactual_report(const CounterfactualTable& table,
                                        const std::string& rows_path,
                                        const std::string& summary_path) {
  std::vector<nlohmann::ordered_json> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    rows.push_back({{"index", i},
                    {"factual_correct", table.rows[i].factual_correct},
                    {"counterfactual_correct", table.rows[i].counterfactual_correct}});
  io::write_lines(rows_path, rows);
  io::write_json(summary_path, {{"n", table.n},
                                {"both_correct", table.both_correct},
                                {"factual_only", table.factual_only},
                                {"counterfactual_only", table.counterfactual_only},
                                {"neither", table.neither}});
}

}  // namespace cgd::probes
