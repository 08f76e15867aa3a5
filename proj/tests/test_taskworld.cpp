#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "cgdlab/taskworld.hpp"
#include "cgdlab/tokenizer.hpp"

using namespace cgd;
using namespace cgd::taskworld;

namespace {

Problem chained_fixture() {
  // deterministic 3-step chained-arithmetic problem built by hand
  Problem p;
  p.kind = TaskKind::kChainedArithmetic;
  p.seed = 0;
  p.prompt_text = "((3+5)+9) mod 10";
  p.gold_steps = {{"3+5", "8"}, {"8+9", "17"}, {"17 mod 10", "7"}};
  p.gold_answer = "7";
  return p;
}

}  // namespace

TEST_CASE("sample_problem: structure, determinism, and verified gold steps") {
  Difficulty d;
  d.min_steps = 3;
  d.max_steps = 3;
  const Problem p = sample_problem(TaskKind::kChainedArithmetic, d, 42);
  REQUIRE(p.gold_steps.size() == 3);
  REQUIRE(p.prompt_text.find(" mod ") != std::string::npos);
  REQUIRE(p.gold_steps.back().value == p.gold_answer);

  const Problem q = sample_problem(TaskKind::kChainedArithmetic, d, 42);
  REQUIRE(q.prompt_text == p.prompt_text);
  REQUIRE(q.gold_answer == p.gold_answer);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(q.gold_steps[i].expr == p.gold_steps[i].expr);
    REQUIRE(q.gold_steps[i].value == p.gold_steps[i].value);
  }

  Difficulty bad;
  bad.min_steps = 1;
  REQUIRE_THROWS_AS(sample_problem(TaskKind::kChainedArithmetic, bad, 1), ConfigError);
}

TEST_CASE("sample_problem: every task kind verifies its own gold rendering") {
  Difficulty d;
  for (const TaskKind kind :
       {TaskKind::kChainedArithmetic, TaskKind::kListSortTrace, TaskKind::kModularEval}) {
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      const Problem p = sample_problem(kind, d, seed);
      const Verdict v = verify(p, render_solution(p));
      REQUIRE(v.correct);
      REQUIRE_FALSE(v.first_wrong_step.has_value());
    }
  }
}

TEST_CASE("prompts and teacher texts round-trip through the tokenizer") {
  const auto& tok = training::tokenizer();
  Difficulty d;
  for (const TaskKind kind :
       {TaskKind::kChainedArithmetic, TaskKind::kListSortTrace, TaskKind::kModularEval}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Problem p = sample_problem(kind, d, seed);
      REQUIRE(tok.decode(tok.encode_text(p.prompt_text)) == p.prompt_text);
      const std::string sol = render_solution(p);
      REQUIRE(tok.decode(tok.encode_text(sol)) == sol);
      const Critique c = critique(p, "garbage");
      REQUIRE(tok.decode(tok.encode_text(c.text)) == c.text);
    }
  }
}

TEST_CASE("render_solution emits the canonical grammar") {
  const Problem p = chained_fixture();
  REQUIRE(render_solution(p) ==
          "step 1: 3+5=8\nstep 2: 8+9=17\nstep 3: 17 mod 10=7\nAnswer: 7");
}

TEST_CASE("verify: gold, altered step, garbage, and answer-line cases") {
  const Problem p = chained_fixture();

  const Verdict ok = verify(p, render_solution(p));
  REQUIRE(ok.correct);

  const Verdict bad2 = verify(p, "step 1: 3+5=8\nstep 2: 8+9=19\nstep 3: 17 mod 10=7\nAnswer: 7");
  REQUIRE_FALSE(bad2.correct);
  REQUIRE(bad2.first_wrong_step == 2);
  REQUIRE(bad2.expected_value == "17");

  const Verdict garbage = verify(p, "total nonsense");
  REQUIRE_FALSE(garbage.correct);
  REQUIRE(garbage.first_wrong_step == 1);
  REQUIRE(garbage.expected_value == "8");

  const Verdict empty = verify(p, "");
  REQUIRE_FALSE(empty.correct);
  REQUIRE(empty.first_wrong_step == 1);

  // wrong final line with correct steps reports the answer position
  const Verdict noans = verify(p, "step 1: 3+5=8\nstep 2: 8+9=17\nstep 3: 17 mod 10=7\nAnswer: 9");
  REQUIRE_FALSE(noans.correct);
  REQUIRE(noans.first_wrong_step == 4);
  REQUIRE(noans.expected_value == "7");

  // whitespace-sloppy but correct output canonicalizes
  const Verdict sloppy =
      verify(p, "step 1:  3+5 = 8\nstep 2: 8+9=17 \nstep 3: 17  mod 10=7\nAnswer:  7\n\n");
  REQUIRE(sloppy.correct);

  // wrong expression at a step is wrong at that step
  const Verdict wrong_expr =
      verify(p, "step 1: 3+5=8\nstep 2: 8+7=15\nstep 3: 17 mod 10=7\nAnswer: 7");
  REQUIRE(wrong_expr.first_wrong_step == 2);
}

TEST_CASE("critique: affirming, localizing, and total over garbage") {
  const Problem p = chained_fixture();

  const Critique good = critique(p, render_solution(p));
  REQUIRE(good.verdict_right);
  REQUIRE(good.text.find(kConclusionRight) != std::string::npos);
  REQUIRE_FALSE(good.first_wrong_step.has_value());

  const Critique bad =
      critique(p, "step 1: 3+5=8\nstep 2: 8+9=19\nstep 3: 17 mod 10=7\nAnswer: 7");
  REQUIRE_FALSE(bad.verdict_right);
  REQUIRE(bad.text.find("step 2") != std::string::npos);
  REQUIRE(bad.text.find("17") != std::string::npos);
  REQUIRE(bad.text.find(kConclusionWrong) != std::string::npos);
  REQUIRE(bad.first_wrong_step == 2);
  REQUIRE(bad.correction_hint == "17");

  const Critique junk = critique(p, "???");
  REQUIRE_FALSE(junk.verdict_right);
  REQUIRE(junk.text.find("step 1") != std::string::npos);
  REQUIRE(junk.text.ends_with(kConclusionWrong));
}

TEST_CASE("critique verdict equals verify over many model-like outputs") {
  Difficulty d;
  Rng rng(99);
  std::size_t wrong_seen = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Problem p = sample_problem(TaskKind::kChainedArithmetic, d, seed);
    std::string y = render_solution(p);
    // corrupt half of the outputs in assorted ways
    switch (rng.below(4)) {
      case 0: break;
      case 1: y[y.size() / 2] = 'z'; break;
      case 2: y = "step 1: nonsense"; break;
      case 3: y += "\nextra trailing line"; break;
    }
    const Critique c = critique(p, y);
    const Verdict v = verify(p, y);
    REQUIRE(c.verdict_right == v.correct);
    if (!v.correct) ++wrong_seen;
    const auto marker = conclusion_marker(c.text);
    REQUIRE(marker.has_value());
    REQUIRE(*marker == c.verdict_right);
  }
  REQUIRE(wrong_seen > 200);
}

TEST_CASE("refine always passes verify and canonicalizes correct answers") {
  Difficulty d;
  for (const TaskKind kind :
       {TaskKind::kChainedArithmetic, TaskKind::kListSortTrace, TaskKind::kModularEval}) {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const Problem p = sample_problem(kind, d, seed);
      const std::string wrong_y = "step 1: broken";
      const std::string refined = refine(p, wrong_y, critique(p, wrong_y));
      REQUIRE(verify(p, refined).correct);
      REQUIRE(refined == render_solution(p));
      // marker discipline: refined answers never contain a conclusion marker
      REQUIRE(refined.find(kConclusionRight) == std::string::npos);
      REQUIRE(refined.find(kConclusionWrong) == std::string::npos);

      const std::string sloppy = " " + render_solution(p) + " \n";
      const Critique c = critique(p, sloppy);
      REQUIRE(c.verdict_right);
      REQUIRE(refine(p, sloppy, c) == render_solution(p));
    }
  }
}

TEST_CASE("corrupt_critique: nonsense shares no operands, flip is an involution") {
  const Problem p = chained_fixture();
  const Critique wrong =
      critique(p, "step 1: 3+5=8\nstep 2: 8+9=19\nstep 3: 17 mod 10=7\nAnswer: 7");

  SECTION("nonsense keeps the marker and drops all problem references") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Critique n = corrupt_critique(wrong, CorruptMode::kNonsense, seed);
      REQUIRE(n.text.ends_with(kConclusionWrong));
      for (char c : n.text.substr(0, n.text.find('\n'))) REQUIRE_FALSE(std::isdigit(c));
    }
  }

  SECTION("nonsense over a corpus never mentions operand values") {
    Difficulty d;
    std::size_t scanned = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Problem q = sample_problem(TaskKind::kChainedArithmetic, d, seed);
      const Critique c = critique(q, "junk");
      const Critique n = corrupt_critique(c, CorruptMode::kNonsense, seed);
      const std::string body = n.text.substr(0, n.text.rfind('\n'));
      for (const Step& s : q.gold_steps) {
        REQUIRE(body.find(s.value) == std::string::npos);
        ++scanned;
      }
    }
    REQUIRE(scanned > 0);
  }

  SECTION("flip_conclusion twice restores the original marker") {
    const Critique once = corrupt_critique(wrong, CorruptMode::kFlipConclusion, 1);
    REQUIRE(once.text.ends_with(kConclusionRight));
    REQUIRE(once.verdict_right);
    const Critique twice = corrupt_critique(once, CorruptMode::kFlipConclusion, 2);
    REQUIRE(twice.text == wrong.text);
    REQUIRE(twice.verdict_right == wrong.verdict_right);
  }

  SECTION("blank keeps only the marker line") {
    const Critique b = corrupt_critique(wrong, CorruptMode::kBlank, 3);
    REQUIRE(b.text == std::string(kConclusionWrong));
  }
}

TEST_CASE("marker discipline: critiques end with exactly one marker line") {
  Difficulty d;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Problem p = sample_problem(TaskKind::kModularEval, d, seed);
    const Critique c = critique(p, seed % 2 ? render_solution(p) : "junk");
    const std::size_t first_right = c.text.find(kConclusionRight);
    const std::size_t first_wrong = c.text.find(kConclusionWrong);
    const bool has_right = first_right != std::string::npos;
    const bool has_wrong = first_wrong != std::string::npos;
    REQUIRE((has_right != has_wrong));
    const std::string_view marker = has_right ? kConclusionRight : kConclusionWrong;
    REQUIRE(c.text.ends_with(marker));
    // only one occurrence
    const std::size_t first = has_right ? first_right : first_wrong;
    REQUIRE(c.text.find(marker, first + 1) == std::string::npos);
  }
}

TEST_CASE("task kind and corrupt mode string round-trips") {
  for (const TaskKind k :
       {TaskKind::kChainedArithmetic, TaskKind::kListSortTrace, TaskKind::kModularEval})
    REQUIRE(task_kind_from_string(to_string(k)) == k);
  for (const CorruptMode m :
       {CorruptMode::kNonsense, CorruptMode::kFlipConclusion, CorruptMode::kBlank})
    REQUIRE(corrupt_mode_from_string(to_string(m)) == m);
  REQUIRE_THROWS_AS(task_kind_from_string("bogus"), ConfigError);
  REQUIRE_THROWS_AS(corrupt_mode_from_string("bogus"), ConfigError);
}
