#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cgdlab/datagen.hpp"
#include "cgdlab/gradcheck.hpp"
#include "cgdlab/training.hpp"

using namespace cgd;
using namespace cgd::training;

namespace {

datagen::AugmentedRecord fixture_record(std::uint64_t seed = 7) {
  taskworld::Difficulty d;
  const auto p = taskworld::sample_problem(taskworld::TaskKind::kChainedArithmetic, d, seed);
  datagen::AugmentedRecord r;
  r.prompt = p.prompt_text;
  // a wrong initial answer with a localized error
  std::string y = taskworld::render_solution(p);
  y[y.find('=') + 1] = '0';
  r.initial_answer = y;
  const auto c = taskworld::critique(p, y);
  r.critique = c.text;
  r.refined_answer = taskworld::refine(p, y, c);
  r.label_correct = c.verdict_right;
  r.problem_seed = p.seed;
  r.task_kind = p.kind;
  r.difficulty = d;
  return r;
}

engine::ModelConfig small_config(std::uint64_t seed = 1) {
  engine::ModelConfig c;
  c.vocab_size = static_cast<std::size_t>(tokenizer().vocab_size());
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq_len = 320;
  c.seed = seed;
  return c;
}

std::string gold_text(const datagen::AugmentedRecord& r) {
  return taskworld::render_solution(
      taskworld::sample_problem(r.task_kind, r.difficulty, r.problem_seed));
}

}  // namespace

TEST_CASE("tokenizer: ids, specials, and round-trips") {
  const Tokenizer& tok = tokenizer();
  REQUIRE(tok.vocab_size() == 5 + static_cast<int>(kCharset.size()));
  REQUIRE(tok.is_special(Tokenizer::kPrompt));
  REQUIRE_FALSE(tok.is_special(tok.char_id('a')));
  REQUIRE(tok.decode(tok.encode_text("step 1: 3+5=8")) == "step 1: 3+5=8");
  REQUIRE(tok.decode(std::vector<int>{Tokenizer::kAnswer}, true) == "<|answer|>");
  REQUIRE(tok.decode(std::vector<int>{Tokenizer::kAnswer}) == "");
  REQUIRE_THROWS_AS(tok.encode_text("emoji \x7f"), TokenOutOfVocab);
}

TEST_CASE("render: per-objective context/target split") {
  const Tokenizer& tok = tokenizer();
  const auto rec = fixture_record();
  const std::string gold = gold_text(rec);

  auto decoded_target = [&](const TokenizedExample& ex) {
    std::vector<int> ids;
    for (std::size_t i = 0; i < ex.loss_mask.size(); ++i)
      if (ex.loss_mask[i]) ids.push_back(ex.target_ids[i]);
    return tok.decode(ids);  // drops the eos terminator
  };

  const auto sft = render(rec, gold, Objective::kSft, tok, 320);
  REQUIRE(decoded_target(sft) == gold);
  REQUIRE(sft.input_ids[0] == Tokenizer::kPrompt);
  REQUIRE(sft.target_ids.back() == Tokenizer::kEos);

  const auto dsft = render(rec, gold, Objective::kDistilledSft, tok, 320);
  REQUIRE(decoded_target(dsft) == rec.refined_answer);

  const auto cft = render(rec, gold, Objective::kCft, tok, 320);
  REQUIRE(decoded_target(cft) == rec.critique);

  const auto cgd = render(rec, gold, Objective::kCgd, tok, 320);
  REQUIRE(decoded_target(cgd) == rec.refined_answer);

  const auto cgdnc = render(rec, gold, Objective::kCgdNoCritique, tok, 320);
  REQUIRE(decoded_target(cgdnc) == rec.refined_answer);

  // CGD mask is zero over every token of x, y', c (the whole context)
  const std::size_t ctx_len =
      2 + tok.encode_text(rec.prompt).size() + 1 + tok.encode_text(rec.initial_answer).size() +
      1 + tok.encode_text(rec.critique).size();
  for (std::size_t i = 0; i + 1 < ctx_len; ++i) REQUIRE(cgd.loss_mask[i] == 0);
  // mask count equals target length + 1 (eos)
  REQUIRE(cgd.mask_count() == tok.encode_text(rec.refined_answer).size() + 1);

  // CGDNoCritique rendering is bit-invariant to the critique field
  datagen::AugmentedRecord other = rec;
  other.critique = "a completely different critique line\nConclusion: right.";
  const auto cgdnc2 = render(other, gold, Objective::kCgdNoCritique, tok, 320);
  REQUIRE(cgdnc2.input_ids == cgdnc.input_ids);
  REQUIRE(cgdnc2.target_ids == cgdnc.target_ids);
  REQUIRE(cgdnc2.loss_mask == cgdnc.loss_mask);

  REQUIRE_THROWS_AS(render(rec, gold, Objective::kCgd, tok, 32), SequenceTooLong);
  datagen::AugmentedRecord empty = rec;
  empty.critique.clear();
  REQUIRE_THROWS_AS(render(empty, gold, Objective::kCgd, tok, 320), ConfigError);
}

TEST_CASE("render: mask count matches independent tokenization over a corpus") {
  const Tokenizer& tok = tokenizer();
  taskworld::Difficulty d;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto rec = fixture_record(seed);
    const auto ex = render(rec, gold_text(rec), Objective::kCgd, tok, 320);
    REQUIRE(ex.mask_count() == tok.encode_text(rec.refined_answer).size() + 1);
    ++checked;
  }
  REQUIRE(checked == 500);
}

TEST_CASE("masked_nll: uniform logits, confident logits, and naive oracle") {
  const std::size_t V = 7;
  engine::Tensor logits = engine::Tensor::zeros({4, V});
  const std::vector<int> targets = {1, 2, 3, 4};
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1};
  REQUIRE_THAT(masked_nll(logits, targets, mask),
               Catch::Matchers::WithinAbs(std::log(double(V)), 1e-12));

  engine::Tensor confident = engine::Tensor::zeros({4, V});
  for (std::size_t r = 0; r < 4; ++r) confident.at(r, std::size_t(targets[r])) = 60.0;
  REQUIRE(masked_nll(confident, targets, mask) < 1e-10);

  Rng rng(3);
  engine::Tensor random = engine::Tensor::zeros({4, V});
  for (double& v : random.data) v = rng.gaussian();
  // independent per-position log-softmax summation
  double expect = 0;
  std::size_t cnt = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    if (!mask[r]) continue;
    double z = 0;
    for (std::size_t c = 0; c < V; ++c) z += std::exp(random.at(r, c));
    expect += std::log(z) - random.at(r, std::size_t(targets[r]));
    ++cnt;
  }
  expect /= double(cnt);
  REQUIRE_THAT(masked_nll(random, targets, mask), Catch::Matchers::WithinAbs(expect, 1e-10));

  const std::vector<std::uint8_t> zero_mask = {0, 0, 0, 0};
  REQUIRE_THROWS_AS(masked_nll(random, targets, zero_mask), ShapeError);
}

TEST_CASE("lr_at: endpoints and monotone warmup") {
  TrainHP hp;
  hp.total_steps = 1000;
  hp.warmup_ratio = 0.1;
  hp.peak_lr = 3e-4;
  REQUIRE(lr_at(0, hp) == 0.0);
  REQUIRE(lr_at(100, hp) == hp.peak_lr);
  REQUIRE_THAT(lr_at(1000, hp), Catch::Matchers::WithinAbs(0.0, 1e-18));
  REQUIRE(lr_at(50, hp) == Catch::Approx(hp.peak_lr * 0.5));
  REQUIRE(lr_at(550, hp) > lr_at(800, hp));
  REQUIRE_THROWS_AS(lr_at(1001, hp), ConfigError);
}

TEST_CASE("adamw_step: closed-form first step and zero-grad fixpoint") {
  engine::ModelConfig mc = small_config();
  mc.vocab_size = 4;
  mc.max_seq_len = 4;
  engine::ModelParams p = engine::init_params(mc);
  const engine::ModelParams before = p;
  AdamWConfig cfg;
  cfg.weight_decay = 0.0;

  AdamWState st = AdamWState::init(p);
  engine::GradTable grads = engine::make_grads(p);
  Rng rng(5);
  for (auto& t : grads.slots)
    for (double& v : t.data) v = rng.gaussian();

  const double lr = 1e-3;
  adamw_step(p, grads, st, lr, cfg);
  // first step with bias correction: mhat = g, vhat = g^2
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    for (std::size_t j = 0; j < p.tensors[i].data.size(); ++j) {
      const double g = grads.slots[i].data[j];
      const double expect = before.tensors[i].data[j] - lr * g / (std::abs(g) + cfg.eps);
      REQUIRE_THAT(p.tensors[i].data[j], Catch::Matchers::WithinAbs(expect, 1e-12));
    }

  // zero grads, zero decay: parameters unchanged
  engine::ModelParams q = before;
  AdamWState st2 = AdamWState::init(q);
  engine::GradTable zeros = engine::make_grads(q);
  adamw_step(q, zeros, st2, lr, cfg);
  for (std::size_t i = 0; i < q.tensors.size(); ++i)
    REQUIRE(q.tensors[i].data == before.tensors[i].data);

  // non-finite grads are rejected
  grads.slots[0].data[0] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(adamw_step(q, grads, st2, lr, cfg), NonFiniteGradient);
}

TEST_CASE("adamw_step: 10-step trajectory matches a scalar reference") {
  // independent textbook implementation on a 1-parameter quadratic
  engine::ModelConfig mc = small_config();
  mc.vocab_size = 2;
  mc.d_model = 2;
  mc.n_heads = 1;
  mc.d_ff = 2;
  mc.max_seq_len = 2;
  engine::ModelParams p = engine::init_params(mc, engine::InitMode::kZeros);
  p.tensors[0].data[0] = 5.0;

  AdamWConfig cfg;
  cfg.weight_decay = 0.004;
  AdamWState st = AdamWState::init(p);

  double x = 5.0, m = 0.0, v = 0.0;
  const double lr = 0.05;
  for (int t = 1; t <= 10; ++t) {
    // loss = x^2/2, grad = x
    engine::GradTable grads = engine::make_grads(p);
    grads.slots[0].data[0] = p.tensors[0].data[0];
    adamw_step(p, grads, st, lr, cfg);

    const double g = x;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mhat = m / (1 - std::pow(cfg.beta1, t));
    const double vhat = v / (1 - std::pow(cfg.beta2, t));
    x -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * x);
    REQUIRE_THAT(p.tensors[0].data[0], Catch::Matchers::WithinAbs(x, 1e-10));
  }
}

TEST_CASE("mask exclusivity: context target ids do not touch the loss") {
  const auto rec = fixture_record(11);
  const engine::ModelParams p = engine::init_params(small_config(4));
  for (const Objective obj : kAllObjectives) {
    auto ex = render(rec, gold_text(rec), obj, tokenizer(), p.config.max_seq_len);
    engine::Graph g;
    const double base = g.scalar_value(build_masked_nll(g, p, ex));
    // flip every masked-out target id at once
    for (std::size_t i = 0; i < ex.loss_mask.size(); ++i) {
      if (!ex.loss_mask[i])
        ex.target_ids[i] = (ex.target_ids[i] + 1) % static_cast<int>(p.config.vocab_size);
    }
    engine::Graph g2;
    REQUIRE(g2.scalar_value(build_masked_nll(g2, p, ex)) == base);
  }
}

TEST_CASE("loss gradients under every objective agree with finite differences") {
  engine::ModelConfig mc = small_config(8);
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.d_ff = 16;
  engine::ModelParams params = engine::init_params(mc);
  const auto rec = fixture_record(3);
  const std::string gold = gold_text(rec);

  for (const Objective obj : {Objective::kSft, Objective::kCgd}) {
    const auto ex = render(rec, gold, obj, tokenizer(), mc.max_seq_len);
    const auto loss_fn = [&](const engine::ModelParams& m) {
      engine::Graph g;
      return g.scalar_value(build_masked_nll(g, m, ex));
    };
    engine::GradTable analytic = engine::make_grads(params);
    {
      engine::Graph g;
      g.backward(build_masked_nll(g, params, ex), analytic);
    }
    const auto coords = engine::sample_coords(params, 60, 17);
    const auto fd = engine::finite_diff_grad(loss_fn, params, 1e-5, coords);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const double a = analytic.slots[coords[i].tensor].data[coords[i].element];
      const double rel = std::abs(a - fd[i]) / std::max({std::abs(a), std::abs(fd[i]), 1.0});
      REQUIRE(rel < 1e-4);
    }
  }
}

TEST_CASE("train: determinism, fresh-model initial loss, 1-record overfit") {
  const auto rec = fixture_record(21);
  datagen::Corpus corpus;
  corpus.records = {rec};

  engine::ModelConfig mc = small_config(2);
  const engine::ModelParams init = engine::init_params(mc);

  TrainHP hp;
  hp.batch_size = 1;
  hp.total_steps = 500;
  hp.peak_lr = 3e-3;
  hp.warmup_ratio = 0.1;
  hp.seed = 9;

  const TrainResult a = train(init, corpus, Objective::kCgd, hp);
  const TrainResult b = train(init, corpus, Objective::kCgd, hp);
  REQUIRE(a.curve.size() == hp.total_steps);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    REQUIRE(a.curve[i].loss == b.curve[i].loss);
    REQUIRE(a.curve[i].grad_norm == b.curve[i].grad_norm);
    REQUIRE(a.curve[i].lr == b.curve[i].lr);
  }
  for (std::size_t i = 0; i < a.params.tensors.size(); ++i)
    REQUIRE(a.params.tensors[i].data == b.params.tensors[i].data);

  // fresh model: mean initial loss close to ln(vocab)
  const double ln_v = std::log(double(mc.vocab_size));
  REQUIRE(std::abs(a.curve.front().loss - ln_v) / ln_v < 0.10);

  // capacity: a single record overfits well below 0.05
  REQUIRE(a.curve.back().loss < 0.05);
}

TEST_CASE("train rejects an empty corpus") {
  datagen::Corpus corpus;
  TrainHP hp;
  REQUIRE_THROWS_AS(train(engine::init_params(small_config()), corpus, Objective::kSft, hp),
                    ConfigError);
}
