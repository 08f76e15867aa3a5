#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>

#include "cgdlab/datagen.hpp"
#include "cgdlab/training.hpp"

using namespace cgd;
using namespace cgd::datagen;

namespace {

engine::ModelParams tiny_student(std::uint64_t seed = 1) {
  engine::ModelConfig c;
  c.vocab_size = static_cast<std::size_t>(training::tokenizer().vocab_size());
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq_len = 320;
  c.seed = seed;
  return engine::init_params(c);
}

std::vector<taskworld::Problem> sample_problems(std::size_t n, std::uint64_t stream = 5) {
  taskworld::Difficulty d;
  std::vector<taskworld::Problem> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(
        taskworld::sample_problem(taskworld::TaskKind::kChainedArithmetic, d, derive_seed(stream, i)));
  return out;
}

}  // namespace

TEST_CASE("augment: one record per problem, labels match independent re-verification") {
  const auto problems = sample_problems(100);
  const auto student = tiny_student();
  GenSettings gs;
  gs.max_new = 24;
  const Corpus corpus = augment(problems, student, gs, 77, "unit-test-student");

  REQUIRE(corpus.records.size() == problems.size());
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    const AugmentedRecord& r = corpus.records[i];
    REQUIRE_FALSE(r.prompt.empty());
    REQUIRE_FALSE(r.initial_answer.empty());
    REQUIRE_FALSE(r.critique.empty());
    REQUIRE_FALSE(r.refined_answer.empty());
    REQUIRE(r.prompt == problems[i].prompt_text);
    REQUIRE(r.problem_seed == problems[i].seed);

    // label consistent with the critique's marker and with re-verification
    const auto marker = taskworld::conclusion_marker(r.critique);
    REQUIRE(marker.has_value());
    REQUIRE(r.label_correct == *marker);
    const taskworld::Problem p =
        taskworld::sample_problem(r.task_kind, r.difficulty, r.problem_seed);
    REQUIRE(r.label_correct == taskworld::verify(p, r.initial_answer).correct);
    // refined answers always verify
    REQUIRE(taskworld::verify(p, r.refined_answer).correct);
  }

  // deterministic given the same seed
  const Corpus again = augment(problems, student, gs, 77, "unit-test-student");
  REQUIRE(again.records == corpus.records);
  const Corpus other = augment(problems, student, gs, 78, "unit-test-student");
  REQUIRE(other.records != corpus.records);
}

TEST_CASE("augment: corruption rate respects the marker/label consistency") {
  const auto problems = sample_problems(60);
  const auto student = tiny_student(2);
  GenSettings gs;
  gs.max_new = 16;
  gs.corruption_rate = 0.5;
  gs.corrupt_mode = taskworld::CorruptMode::kFlipConclusion;
  const Corpus corpus = augment(problems, student, gs, 5, "s");
  std::size_t flipped = 0;
  for (const auto& r : corpus.records) {
    const auto marker = taskworld::conclusion_marker(r.critique);
    REQUIRE(marker.has_value());
    REQUIRE(r.label_correct == *marker);
    const taskworld::Problem p =
        taskworld::sample_problem(r.task_kind, r.difficulty, r.problem_seed);
    if (r.label_correct != taskworld::verify(p, r.initial_answer).correct) ++flipped;
  }
  // roughly half the labels flipped by corruption
  REQUIRE(flipped > 10);
  REQUIRE(flipped < 50);
}

TEST_CASE("apply_mixture: exact stratum counts, containment, determinism") {
  // synthetic corpus with known labels
  Corpus corpus;
  for (int i = 0; i < 80; ++i) {
    AugmentedRecord r;
    r.prompt = "p" + std::to_string(i);
    r.initial_answer = "y";
    r.critique = "c\nConclusion: wrong.";
    r.refined_answer = "z";
    r.label_correct = i < 60;  // 60 correct, 20 incorrect
    r.problem_seed = static_cast<std::uint64_t>(i);
    corpus.records.push_back(r);
  }

  const Corpus half = apply_mixture(corpus, 0.5, 40, 3);
  REQUIRE(half.records.size() == 40);
  REQUIRE(half.count_correct() == 20);

  const Corpus all_correct = apply_mixture(corpus, 1.0, 30, 3);
  REQUIRE(all_correct.count_correct() == 30);

  // sub-multiset of the source: every selected seed occurs at most once and
  // exists in the source
  std::set<std::uint64_t> seen;
  for (const auto& r : half.records) {
    REQUIRE(r.problem_seed < 80);
    REQUIRE(seen.insert(r.problem_seed).second);
  }

  const Corpus again = apply_mixture(corpus, 0.5, 40, 3);
  for (std::size_t i = 0; i < 40; ++i) REQUIRE(again.records[i] == half.records[i]);

  REQUIRE_THROWS_AS(apply_mixture(corpus, 0.0, 30, 1), InsufficientStratum);  // only 20 incorrect
  REQUIRE_THROWS_AS(apply_mixture(corpus, 1.5, 10, 1), ConfigError);
  try {
    apply_mixture(corpus, 0.0, 30, 1);
    FAIL("expected InsufficientStratum");
  } catch (const InsufficientStratum& e) {
    REQUIRE(std::string(e.what()).find("20") != std::string::npos);
  }
}

TEST_CASE("corpus file: round-trip, empty corpus, hand-written fixture, errors") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "cgdlab_datagen_test";
  fs::create_directories(dir);

  SECTION("write then read is structurally equal") {
    const auto problems = sample_problems(20);
    GenSettings gs;
    gs.max_new = 16;
    gs.corruption_rate = 0.25;
    const Corpus corpus = augment(problems, tiny_student(3), gs, 11, "ckpt-id-x");
    const std::string path = (dir / "roundtrip.jsonl").string();
    write_corpus(corpus, path);
    const Corpus back = read_corpus(path);
    REQUIRE(back.records == corpus.records);
    REQUIRE(back.provenance.student_checkpoint == "ckpt-id-x");
    REQUIRE(back.provenance.seed == 11);
    REQUIRE(back.provenance.gen_config.corruption_rate == 0.25);

    // byte-identical rewrite
    write_corpus(back, (dir / "rt2.jsonl").string());
    std::ifstream a(path), b((dir / "rt2.jsonl").string());
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    REQUIRE(sa.str() == sb.str());
  }

  SECTION("empty corpus round-trips to an empty file") {
    Corpus empty;
    const std::string path = (dir / "empty.jsonl").string();
    write_corpus(empty, path);
    REQUIRE(fs::file_size(path) == 0);
    REQUIRE(read_corpus(path).records.empty());
  }

  SECTION("hand-written two-line fixture parses to the expected records") {
    const std::string path = (dir / "hand.jsonl").string();
    std::ofstream out(path);
    out << R"({"prompt":"(3+5) mod 10","initial_answer":"junk","critique":"bad\nConclusion: wrong.","refined_answer":"step 1: 3+5=8\nstep 2: 8 mod 10=8\nAnswer: 8","label":"incorrect","problem_seed":42,"task_kind":"chained-arithmetic","difficulty":{"min_steps":2,"max_steps":3,"operand_min":2,"operand_max":9}})"
        << "\n";
    out << R"({"prompt":"sort [5,2]","initial_answer":"step 1: min(5,2)=2\nstep 2: min(5)=5\nAnswer: [2,5]","critique":"fine\nConclusion: right.","refined_answer":"step 1: min(5,2)=2\nstep 2: min(5)=5\nAnswer: [2,5]","label":"correct","problem_seed":7,"task_kind":"list-sort-trace","difficulty":{"min_steps":2,"max_steps":2,"operand_min":1,"operand_max":9}})"
        << "\n";
    out.close();
    const Corpus c = read_corpus(path);
    REQUIRE(c.records.size() == 2);
    REQUIRE(c.records[0].prompt == "(3+5) mod 10");
    REQUIRE(c.records[0].label_correct == false);
    REQUIRE(c.records[0].problem_seed == 42);
    REQUIRE(c.records[0].critique == "bad\nConclusion: wrong.");
    REQUIRE(c.records[1].task_kind == taskworld::TaskKind::kListSortTrace);
    REQUIRE(c.records[1].difficulty.max_steps == 2);
    REQUIRE(c.records[1].label_correct == true);
  }

  SECTION("malformed lines report the line number") {
    const std::string path = (dir / "bad.jsonl").string();
    std::ofstream out(path);
    out << R"({"prompt":"x"})" << "\n";
    out.close();
    try {
      read_corpus(path);
      FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
      REQUIRE(std::string(e.what()).find("line 1") != std::string::npos);
    }
    REQUIRE_THROWS_AS(read_corpus((dir / "missing.jsonl").string()), MissingArtifact);

    const std::string bad_label = (dir / "badlabel.jsonl").string();
    std::ofstream out2(bad_label);
    out2 << R"({"prompt":"x","initial_answer":"y","critique":"c","refined_answer":"z","label":"maybe","problem_seed":1,"task_kind":"modular-eval","difficulty":{"min_steps":2,"max_steps":2,"operand_min":2,"operand_max":9}})"
         << "\n";
    out2.close();
    REQUIRE_THROWS_AS(read_corpus(bad_label), MalformedLine);
  }

  fs::remove_all(dir);
}
