#pragma once

// Objective-specific rendering of augmented records into next-token training
// examples, the masked NLL loss, the warmup+cosine schedule, AdamW, and the
// training loop.
//
// Rendering table (segments joined by the delimiter tokens of the shared
// tokenizer; the target is always terminated by <|eos|>, and the loss mask
// covers exactly the target tokens plus that terminator):
//
//   SFT            <|prompt|> x <|answer|>   y  <|eos|>
//   DistilledSFT   <|prompt|> x <|answer|>   y^ <|eos|>
//   CFT            <|prompt|> x <|initial|> y' <|critique|> c <|eos|>
//   CGD            <|prompt|> x <|initial|> y' <|critique|> c <|answer|> y^ <|eos|>
//   CGDNoCritique  <|prompt|> x <|initial|> y' <|answer|>   y^ <|eos|>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgdlab/datagen.hpp"
#include "cgdlab/errors.hpp"
#include "cgdlab/graph.hpp"
#include "cgdlab/model.hpp"
#include "cgdlab/rng.hpp"
#include "cgdlab/taskworld.hpp"
#include "cgdlab/tokenizer.hpp"

namespace cgd::training {

enum class Objective { kSft, kDistilledSft, kCft, kCgd, kCgdNoCritique };

inline constexpr std::array<Objective, 5> kAllObjectives = {
    Objective::kSft, Objective::kDistilledSft, Objective::kCft, Objective::kCgd,
    Objective::kCgdNoCritique};

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::kSft: return "SFT";
    case Objective::kDistilledSft: return "DistilledSFT";
    case Objective::kCft: return "CFT";
    case Objective::kCgd: return "CGD";
    case Objective::kCgdNoCritique: return "CGDNoCritique";
  }
  throw ConfigError("unknown objective");
}

inline Objective objective_from_string(std::string_view s) {
  if (s == "SFT") return Objective::kSft;
  if (s == "DistilledSFT") return Objective::kDistilledSft;
  if (s == "CFT") return Objective::kCft;
  if (s == "CGD") return Objective::kCgd;
  if (s == "CGDNoCritique") return Objective::kCgdNoCritique;
  throw ConfigError("unknown objective: " + std::string(s));
}

struct TokenizedExample {
  std::vector<int> input_ids;        // context tokens followed by target tokens
  std::vector<int> target_ids;       // input_ids shifted one ahead
  std::vector<std::uint8_t> loss_mask;  // 1 where the predicted token is in the target segment

  std::size_t mask_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : loss_mask) n += m;
    return n;
  }
};

// Renders one record under an objective. `gold_answer_text` is the task-world
// gold rendering for the record's problem (used by SFT only).
inline TokenizedExample render(const datagen::AugmentedRecord& record,
                               const std::string& gold_answer_text, Objective obj,
                               const Tokenizer& tok, std::size_t max_seq_len) {
  if (record.prompt.empty() || record.initial_answer.empty() || record.critique.empty() ||
      record.refined_answer.empty())
    throw ConfigError("render: record has an empty text field");

  std::vector<int> full;
  auto put_special = [&](int id) { full.push_back(id); };
  auto put_text = [&](const std::string& s) {
    const std::vector<int> ids = tok.encode_text(s);
    full.insert(full.end(), ids.begin(), ids.end());
  };

  put_special(Tokenizer::kPrompt);
  put_text(record.prompt);
  switch (obj) {
    case Objective::kSft:
    case Objective::kDistilledSft:
      put_special(Tokenizer::kAnswer);
      break;
    case Objective::kCft:
      put_special(Tokenizer::kInitial);
      put_text(record.initial_answer);
      put_special(Tokenizer::kCritique);
      break;
    case Objective::kCgd:
      put_special(Tokenizer::kInitial);
      put_text(record.initial_answer);
      put_special(Tokenizer::kCritique);
      put_text(record.critique);
      put_special(Tokenizer::kAnswer);
      break;
    case Objective::kCgdNoCritique:
      put_special(Tokenizer::kInitial);
      put_text(record.initial_answer);
      put_special(Tokenizer::kAnswer);
      break;
  }
  const std::size_t context_len = full.size();
  switch (obj) {
    case Objective::kSft: put_text(gold_answer_text); break;
    case Objective::kDistilledSft: put_text(record.refined_answer); break;
    case Objective::kCft: put_text(record.critique); break;
    case Objective::kCgd: put_text(record.refined_answer); break;
    case Objective::kCgdNoCritique: put_text(record.refined_answer); break;
  }
  put_special(Tokenizer::kEos);

  if (full.size() > max_seq_len)
    throw SequenceTooLong("rendered example of " + std::to_string(full.size()) +
                          " tokens exceeds max_seq_len " + std::to_string(max_seq_len));

  TokenizedExample ex;
  const std::size_t n = full.size() - 1;
  ex.input_ids.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
  ex.target_ids.assign(full.begin() + 1, full.end());
  ex.loss_mask.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    // position i predicts full[i+1]; that token is in the target segment
    // exactly when i + 1 >= context_len
    if (i + 1 >= context_len) ex.loss_mask[i] = 1;
  }
  return ex;
}

// Pure-value masked NLL: mean over masked positions of -log softmax(row)[target].
inline double masked_nll(const engine::Tensor& logits, const std::vector<int>& target_ids,
                         const std::vector<std::uint8_t>& loss_mask) {
  if (logits.rows() != target_ids.size() || target_ids.size() != loss_mask.size())
    throw ShapeError("masked_nll: logits, targets and mask must align");
  const std::size_t V = logits.cols();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (!loss_mask[r]) continue;
    const double* row = logits.data.data() + r * V;
    double m = -1e300;
    for (std::size_t c = 0; c < V; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < V; ++c) z += std::exp(row[c] - m);
    total += m + std::log(z) - row[static_cast<std::size_t>(target_ids[r])];
    ++count;
  }
  if (count == 0) throw ShapeError("masked_nll: loss mask has no active positions");
  return total / static_cast<double>(count);
}

// Graph node for the summed masked NLL of one example, evaluating logits only
// at masked positions. Returns the node and the number of masked positions.
inline std::pair<int, std::size_t> build_nll_sum(engine::Graph& g, const engine::ModelParams& p,
                                                 const TokenizedExample& ex) {
  std::vector<int> rows;
  std::vector<int> targets;
  for (std::size_t i = 0; i < ex.loss_mask.size(); ++i) {
    if (ex.loss_mask[i]) {
      rows.push_back(static_cast<int>(i));
      targets.push_back(ex.target_ids[i]);
    }
  }
  if (rows.empty()) throw ShapeError("build_nll_sum: loss mask has no active positions");
  const auto trunk = engine::detail::build_trunk(g, p, ex.input_ids);
  const int hidden = g.gather_rows(trunk.final_hidden, rows);
  const int logits = engine::detail::build_logits(g, p, hidden);
  return {g.nll_sum(logits, targets), rows.size()};
}

// Mean masked NLL of one example as a graph node.
inline int build_masked_nll(engine::Graph& g, const engine::ModelParams& p,
                            const TokenizedExample& ex) {
  const auto [sum_node, count] = build_nll_sum(g, p, ex);
  return g.scale(sum_node, 1.0 / static_cast<double>(count));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct TrainHP {
  std::size_t batch_size = 32;
  double peak_lr = 3e-4;
  double warmup_ratio = 0.1;
  std::size_t total_steps = 2000;
  AdamWConfig adamw;
  std::optional<double> grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0 || total_steps == 0)
      throw ConfigError("train hp: batch_size and total_steps must be positive");
    if (!(peak_lr > 0.0)) throw ConfigError("train hp: peak_lr must be positive");
    if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0))
      throw ConfigError("train hp: warmup_ratio must lie in [0, 1)");
  }
};

// Linear warmup from 0 to peak over warmup_ratio * total_steps, then cosine
// decay to exactly 0 at total_steps.
inline double lr_at(std::size_t step, const TrainHP& hp) {
  if (step > hp.total_steps) throw ConfigError("lr_at: step beyond total_steps");
  const double warmup_steps = std::floor(hp.warmup_ratio * static_cast<double>(hp.total_steps));
  const double s = static_cast<double>(step);
  if (s < warmup_steps) return hp.peak_lr * s / warmup_steps;
  if (hp.total_steps == static_cast<std::size_t>(warmup_steps)) return hp.peak_lr;
  const double progress = (s - warmup_steps) / (static_cast<double>(hp.total_steps) - warmup_steps);
  return hp.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

struct AdamWState {
  std::vector<engine::Tensor> m;
  std::vector<engine::Tensor> v;
  long long step_count = 0;

  static AdamWState init(const engine::ModelParams& p) {
    AdamWState s;
    for (const engine::Tensor& t : p.tensors) {
      s.m.push_back(engine::Tensor::zeros(t.shape));
      s.v.push_back(engine::Tensor::zeros(t.shape));
    }
    return s;
  }
};

// One decoupled-weight-decay Adam update with bias correction. Rejects
// non-finite gradients without touching parameters or state.
inline void adamw_step(engine::ModelParams& params, const engine::GradTable& grads,
                       AdamWState& state, double lr, const AdamWConfig& cfg) {
  if (!grads.all_finite())
    throw NonFiniteGradient("adamw_step: non-finite gradient, step rejected");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    std::vector<double>& p = params.tensors[i].data;
    const std::vector<double>& g = grads.slots[i].data;
    std::vector<double>& m = state.m[i].data;
    std::vector<double>& v = state.v[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p[j]);
    }
  }
}

struct StepStat {
  std::size_t step;
  double loss;       // mean masked NLL over the batch's masked tokens
  double lr;
  double grad_norm;  // pre-clip L2 norm
};

using LossCurve = std::vector<StepStat>;

// Tokenizes a whole corpus under one objective. SFT gold answers are
// regenerated from each record's problem seed and metadata.
inline std::vector<TokenizedExample> render_corpus(const datagen::Corpus& corpus, Objective obj,
                                                   const Tokenizer& tok,
                                                   std::size_t max_seq_len) {
  std::vector<TokenizedExample> out;
  out.reserve(corpus.records.size());
  for (const datagen::AugmentedRecord& r : corpus.records) {
    std::string gold;
    if (obj == Objective::kSft) {
      const taskworld::Problem p =
          taskworld::sample_problem(r.task_kind, r.difficulty, r.problem_seed);
      gold = taskworld::render_solution(p);
    }
    out.push_back(render(r, gold, obj, tok, max_seq_len));
  }
  return out;
}

struct TrainResult {
  engine::ModelParams params;
  LossCurve curve;
};

// Full training loop: epoch-wise seeded shuffling, mean-over-masked-tokens
// batch loss, gradient clipping, AdamW with the warmup+cosine schedule.
// Bit-reproducible for fixed (init, corpus, objective, hp). Aborts with
// DivergenceError if the loss becomes non-finite.
inline TrainResult train(engine::ModelParams init, const datagen::Corpus& corpus, Objective obj,
                         const TrainHP& hp) {
  hp.validate();
  if (corpus.records.empty()) throw ConfigError("train: corpus is empty");
  const Tokenizer& tok = tokenizer();
  const std::vector<TokenizedExample> examples =
      render_corpus(corpus, obj, tok, init.config.max_seq_len);

  TrainResult result{std::move(init), {}};
  engine::ModelParams& params = result.params;
  AdamWState state = AdamWState::init(params);
  engine::GradTable grads = engine::make_grads(params);

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = 0;
  std::uint64_t epoch = 0;
  auto reshuffle = [&]() {
    Rng rng(derive_seed(derive_seed(hp.seed, "train-shuffle"), epoch));
    rng.shuffle(order);
    cursor = 0;
    ++epoch;
  };
  reshuffle();

  for (std::size_t step = 0; step < hp.total_steps; ++step) {
    std::vector<const TokenizedExample*> batch;
    batch.reserve(hp.batch_size);
    for (std::size_t b = 0; b < hp.batch_size; ++b) {
      if (cursor >= order.size()) reshuffle();
      batch.push_back(&examples[order[cursor++]]);
    }
    std::size_t total_masked = 0;
    for (const TokenizedExample* ex : batch) total_masked += ex->mask_count();

    grads.zero();
    double loss = 0.0;
    const double inv_total = 1.0 / static_cast<double>(total_masked);
    for (const TokenizedExample* ex : batch) {
      engine::Graph g;
      const auto [sum_node, count] = build_nll_sum(g, params, *ex);
      (void)count;
      loss += g.scalar_value(sum_node) * inv_total;
      g.backward(g.scale(sum_node, inv_total), grads);
    }
    if (!std::isfinite(loss))
      throw DivergenceError("training diverged: non-finite loss at step " + std::to_string(step),
                            static_cast<long long>(step));

    const double norm = engine::grad_l2_norm(grads);
    if (hp.grad_clip && norm > *hp.grad_clip && norm > 0.0) {
      const double factor = *hp.grad_clip / norm;
      for (engine::Tensor& t : grads.slots)
        for (double& v : t.data) v *= factor;
    }
    const double lr = lr_at(step, hp);
    adamw_step(params, grads, state, lr, hp.adamw);
    result.curve.push_back({step, loss, lr, norm});
  }
  return result;
}

}  // namespace cgd::training
