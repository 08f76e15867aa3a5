#pragma once

// Synthetic multi-step reasoning tasks with a rule-based teacher oracle.
// The teacher verifies answers step by step, writes critiques that locate
// the first wrong step, and produces refined answers in the canonical
// grammar. Every operation is a pure function of its inputs and seeds.
//
// Canonical answer grammar (shared bit-exactly with evaluation):
//   step <k>: <expr>=<value>        one line per step
//   Answer: <value>                 final line
// Critique marker lines: "Conclusion: right." / "Conclusion: wrong."

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cgdlab/errors.hpp"
#include "cgdlab/rng.hpp"

namespace cgd::taskworld {

inline constexpr std::string_view kAnswerPrefix = "Answer: ";
inline constexpr std::string_view kConclusionRight = "Conclusion: right.";
inline constexpr std::string_view kConclusionWrong = "Conclusion: wrong.";

enum class TaskKind { kChainedArithmetic, kListSortTrace, kModularEval };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kChainedArithmetic: return "chained-arithmetic";
    case TaskKind::kListSortTrace: return "list-sort-trace";
    case TaskKind::kModularEval: return "modular-eval";
  }
  throw ConfigError("unknown task kind");
}

inline TaskKind task_kind_from_string(std::string_view s) {
  if (s == "chained-arithmetic") return TaskKind::kChainedArithmetic;
  if (s == "list-sort-trace") return TaskKind::kListSortTrace;
  if (s == "modular-eval") return TaskKind::kModularEval;
  throw ConfigError("unknown task kind: " + std::string(s));
}

// Step count and operand range. Step counts below 2 are rejected; operands
// stay within [0, 99] so every intermediate value fits in two digits.
struct Difficulty {
  int min_steps = 2;
  int max_steps = 3;
  int operand_min = 2;
  int operand_max = 9;

  void validate() const {
    if (min_steps < 2 || max_steps < min_steps)
      throw ConfigError("difficulty: need 2 <= min_steps <= max_steps");
    if (operand_min < 0 || operand_max < operand_min || operand_max > 99)
      throw ConfigError("difficulty: need 0 <= operand_min <= operand_max <= 99");
  }

  bool operator==(const Difficulty&) const = default;
};

struct Step {
  std::string expr;
  std::string value;
};

struct Problem {
  TaskKind kind = TaskKind::kChainedArithmetic;
  Difficulty difficulty;
  std::uint64_t seed = 0;
  std::string prompt_text;
  std::vector<Step> gold_steps;
  std::string gold_answer;
};

struct Verdict {
  bool correct = false;
  std::optional<int> first_wrong_step;       // 1-based; gold_steps.size()+1 = answer line
  std::optional<std::string> expected_value;  // gold value at that step
};

struct Critique {
  std::string text;  // body lines followed by exactly one conclusion marker line
  bool verdict_right = false;
  std::optional<int> first_wrong_step;
  std::optional<std::string> correction_hint;
};

namespace detail {

inline std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string remove_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != ' ' && c != '\t') out += c;
  }
  return out;
}

// Lines stripped of surrounding whitespace, with empty lines dropped from
// both ends (interior empty lines are kept and count against the format).
inline std::vector<std::string> clean_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = (nl == std::string_view::npos) ? text.size() : nl;
    lines.push_back(strip(text.substr(pos, end - pos)));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  while (!lines.empty() && lines.front().empty()) lines.erase(lines.begin());
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

struct ParsedStep {
  int index = 0;
  std::string expr;
  std::string value;
};

inline std::optional<ParsedStep> parse_step_line(const std::string& line) {
  constexpr std::string_view prefix = "step";
  if (line.rfind(prefix, 0) != 0) return std::nullopt;
  std::size_t i = prefix.size();
  while (i < line.size() && line[i] == ' ') ++i;
  std::size_t digits_begin = i;
  while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
  if (i == digits_begin) return std::nullopt;
  ParsedStep out;
  try {
    out.index = std::stoi(line.substr(digits_begin, i - digits_begin));
  } catch (...) {
    return std::nullopt;
  }
  while (i < line.size() && line[i] == ' ') ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  ++i;
  const std::size_t eq = line.find('=', i);
  if (eq == std::string::npos) return std::nullopt;
  out.expr = strip(std::string_view(line).substr(i, eq - i));
  out.value = strip(std::string_view(line).substr(eq + 1));
  if (out.expr.empty() || out.value.empty()) return std::nullopt;
  return out;
}

template <class T>
inline std::string join(const std::vector<T>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace detail

// Whether a critique-style text ends with a conclusion marker line, and if so
// which one.
inline std::optional<bool> conclusion_marker(std::string_view text) {
  const auto lines = detail::clean_lines(text);
  if (lines.empty()) return std::nullopt;
  if (lines.back() == kConclusionRight) return true;
  if (lines.back() == kConclusionWrong) return false;
  return std::nullopt;
}

// Deterministic problem sampler. The gold derivation is produced together
// with the prompt, so it is correct by construction.
inline Problem sample_problem(TaskKind kind, const Difficulty& diff, std::uint64_t seed) {
  diff.validate();
  Rng rng(derive_seed(seed, "problem"));
  Problem p;
  p.kind = kind;
  p.difficulty = diff;
  p.seed = seed;
  const int k = static_cast<int>(rng.range(diff.min_steps, diff.max_steps));

  switch (kind) {
    case TaskKind::kChainedArithmetic: {
      int v = static_cast<int>(rng.range(diff.operand_min, diff.operand_max));
      std::string expr_acc = std::to_string(v);
      for (int i = 0; i < k - 1; ++i) {
        const int a = static_cast<int>(rng.range(diff.operand_min, diff.operand_max));
        const bool can_add = v + a <= 99;
        const bool can_sub = v - a >= 0;
        char op;
        if (can_add && can_sub) op = rng.below(2) ? '-' : '+';
        else op = can_add ? '+' : '-';
        const int nv = (op == '+') ? v + a : v - a;
        p.gold_steps.push_back(
            {std::to_string(v) + op + std::to_string(a), std::to_string(nv)});
        expr_acc = "(" + expr_acc + op + std::to_string(a) + ")";
        v = nv;
      }
      const int m = static_cast<int>(rng.range(3, 12));
      p.gold_steps.push_back(
          {std::to_string(v) + " mod " + std::to_string(m), std::to_string(v % m)});
      p.prompt_text = expr_acc + " mod " + std::to_string(m);
      p.gold_answer = std::to_string(v % m);
      break;
    }
    case TaskKind::kListSortTrace: {
      std::vector<int> values;
      for (int i = 0; i < k; ++i)
        values.push_back(static_cast<int>(rng.range(diff.operand_min, diff.operand_max)));
      p.prompt_text = "sort [" + detail::join(values, ",") + "]";
      std::vector<int> remaining = values;
      std::vector<int> sorted;
      while (!remaining.empty()) {
        p.gold_steps.push_back({"min(" + detail::join(remaining, ",") + ")", ""});
        const auto it = std::min_element(remaining.begin(), remaining.end());
        p.gold_steps.back().value = std::to_string(*it);
        sorted.push_back(*it);
        remaining.erase(it);
      }
      p.gold_answer = "[" + detail::join(sorted, ",") + "]";
      break;
    }
    case TaskKind::kModularEval: {
      const int base = static_cast<int>(rng.range(std::max(2, diff.operand_min),
                                                  std::max(2, diff.operand_max)));
      const int m = static_cast<int>(rng.range(3, 12));
      int v = base;
      for (int i = 0; i < k; ++i) {
        const int nv = (v * base) % m;
        p.gold_steps.push_back({"(" + std::to_string(v) + "*" + std::to_string(base) + ") mod " +
                                    std::to_string(m),
                                std::to_string(nv)});
        v = nv;
      }
      p.prompt_text = std::to_string(base) + "^" + std::to_string(k + 1) + " mod " +
                      std::to_string(m);
      p.gold_answer = std::to_string(v);
      break;
    }
  }
  return p;
}

// Gold derivation in the canonical grammar.
inline std::string render_solution(const Problem& p) {
  std::string out;
  for (std::size_t i = 0; i < p.gold_steps.size(); ++i) {
    out += "step " + std::to_string(i + 1) + ": " + p.gold_steps[i].expr + "=" +
           p.gold_steps[i].value + "\n";
  }
  out += std::string(kAnswerPrefix) + p.gold_answer;
  return out;
}

// Step-level verification against the gold derivation. Total over arbitrary
// input: unparseable output is wrong at step 1. Step k must appear on line k
// with the gold expression and value (whitespace-insensitive); the answer
// line follows the steps. Text after a correct answer line is tolerated, so
// sloppy-but-correct outputs canonicalize rather than fail.
inline Verdict verify(const Problem& p, std::string_view answer_text) {
  const auto lines = detail::clean_lines(answer_text);
  const std::size_t K = p.gold_steps.size();
  auto wrong = [&](std::size_t step1_based) {
    Verdict v;
    v.correct = false;
    v.first_wrong_step = static_cast<int>(step1_based);
    v.expected_value =
        (step1_based <= K) ? p.gold_steps[step1_based - 1].value : p.gold_answer;
    return v;
  };
  for (std::size_t k = 1; k <= K; ++k) {
    if (k - 1 >= lines.size()) return wrong(k);
    const auto parsed = detail::parse_step_line(lines[k - 1]);
    if (!parsed || parsed->index != static_cast<int>(k)) return wrong(k);
    if (detail::remove_spaces(parsed->expr) != detail::remove_spaces(p.gold_steps[k - 1].expr))
      return wrong(k);
    if (detail::remove_spaces(parsed->value) != detail::remove_spaces(p.gold_steps[k - 1].value))
      return wrong(k);
  }
  if (K >= lines.size()) return wrong(K + 1);
  const std::string& answer_line = lines[K];
  if (answer_line.rfind("Answer:", 0) != 0) return wrong(K + 1);
  const std::string given = detail::strip(std::string_view(answer_line).substr(7));
  if (detail::remove_spaces(given) != detail::remove_spaces(p.gold_answer)) return wrong(K + 1);
  Verdict v;
  v.correct = true;
  return v;
}

// Teacher critique of an initial answer: locates the first wrong step, states
// the expected value, and ends with the conclusion marker line.
inline Critique critique(const Problem& p, std::string_view initial_answer) {
  const Verdict v = verify(p, initial_answer);
  Critique c;
  if (v.correct) {
    c.verdict_right = true;
    c.text = "All steps check out.\n" + std::string(kConclusionRight);
    return c;
  }
  c.verdict_right = false;
  c.first_wrong_step = v.first_wrong_step;
  c.correction_hint = v.expected_value;
  const int j = *v.first_wrong_step;
  const std::size_t K = p.gold_steps.size();
  std::string body;
  if (static_cast<std::size_t>(j) <= K) {
    const Step& gold = p.gold_steps[static_cast<std::size_t>(j - 1)];
    // Quote the stated value when the line parsed with the right expression,
    // otherwise describe the missing line.
    std::optional<std::string> stated;
    const auto lines = detail::clean_lines(initial_answer);
    if (static_cast<std::size_t>(j - 1) < lines.size()) {
      const auto parsed = detail::parse_step_line(lines[static_cast<std::size_t>(j - 1)]);
      if (parsed && parsed->index == j &&
          detail::remove_spaces(parsed->expr) == detail::remove_spaces(gold.expr))
        stated = parsed->value;
    }
    if (stated) {
      body = "The derivation goes wrong at step " + std::to_string(j) + ": " + gold.expr +
             " should give " + gold.value + ", not " + *stated +
             ". Later steps inherit that error.";
    } else {
      body = "The derivation is missing a valid step " + std::to_string(j) +
             ": there should be a line stating " + gold.expr + "=" + gold.value + ".";
    }
  } else {
    body = "All steps are correct but the final line should state the answer " + p.gold_answer +
           ".";
  }
  c.text = body + "\n" + std::string(kConclusionWrong);
  return c;
}

// Teacher refinement: always a full correct derivation in the canonical
// grammar. When the initial answer was already correct its step values equal
// the gold ones, so canonical restyling and the gold rendering coincide.
inline std::string refine(const Problem& p, std::string_view /*initial_answer*/,
                          const Critique& /*critique_for_it*/) {
  return render_solution(p);
}

enum class CorruptMode { kNonsense, kFlipConclusion, kBlank };

inline std::string to_string(CorruptMode m) {
  switch (m) {
    case CorruptMode::kNonsense: return "nonsense";
    case CorruptMode::kFlipConclusion: return "flip_conclusion";
    case CorruptMode::kBlank: return "blank";
  }
  throw ConfigError("unknown corrupt mode");
}

inline CorruptMode corrupt_mode_from_string(std::string_view s) {
  if (s == "nonsense") return CorruptMode::kNonsense;
  if (s == "flip_conclusion") return CorruptMode::kFlipConclusion;
  if (s == "blank") return CorruptMode::kBlank;
  throw ConfigError("unknown corrupt mode: " + std::string(s));
}

// Off-topic critique bodies. Digit-free on purpose: a nonsense critique must
// never mention any of the problem's operand values.
inline constexpr std::array<std::string_view, 3> kNonsenseBodies = {
    "Consider the quadratic formula: x equals minus b plus or minus a square root, all over "
    "two a. It does not apply to this problem.",
    "Remember that the derivative of a constant vanishes and integration adds a constant "
    "term. Neither observation bears on this derivation.",
    "A triangle with equal sides has equal angles, by symmetry. That fact is irrelevant "
    "here."};

// Degrades a critique while keeping the critique formatting. nonsense swaps
// the body for an off-topic template, flip_conclusion inverts only the marker
// line, blank drops the body. Corrupted critiques are deliberately deceptive:
// the diagnostic fields keep their pre-corruption step information, and only
// the marker/verdict pair is kept mutually consistent.
inline Critique corrupt_critique(const Critique& c, CorruptMode mode, std::uint64_t seed) {
  Critique out = c;
  const std::string marker =
      c.verdict_right ? std::string(kConclusionRight) : std::string(kConclusionWrong);
  switch (mode) {
    case CorruptMode::kNonsense: {
      Rng rng(derive_seed(seed, "nonsense"));
      const auto body = kNonsenseBodies[rng.below(kNonsenseBodies.size())];
      out.text = std::string(body) + "\n" + marker;
      return out;
    }
    case CorruptMode::kFlipConclusion: {
      const std::string flipped =
          c.verdict_right ? std::string(kConclusionWrong) : std::string(kConclusionRight);
      const std::size_t pos = c.text.rfind(marker);
      if (pos == std::string::npos)
        throw ConfigError("corrupt_critique: critique lacks a conclusion marker");
      out.text = c.text.substr(0, pos) + flipped;
      out.verdict_right = !c.verdict_right;
      return out;
    }
    case CorruptMode::kBlank: {
      out.text = marker;
      return out;
    }
  }
  throw ConfigError("unknown corrupt mode");
}

}  // namespace cgd::taskworld
