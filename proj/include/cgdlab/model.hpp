#pragma once

// Tiny pre-norm decoder-only transformer: learned positional embeddings,
// multi-head causal self-attention, GELU MLP, optional weight tying between
// the token embedding and the output head.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgdlab/errors.hpp"
#include "cgdlab/graph.hpp"
#include "cgdlab/rng.hpp"
#include "cgdlab/tensor.hpp"

namespace cgd::engine {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 0;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t d_ff = 0;
  std::size_t max_seq_len = 0;
  std::uint64_t seed = 0;
  bool tied_embeddings = true;

  void validate() const {
    if (vocab_size == 0 || d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 ||
        max_seq_len == 0)
      throw ConfigError("model config: all dimensions must be positive");
    if (d_model % n_heads != 0)
      throw ConfigError("model config: d_model (" + std::to_string(d_model) +
                        ") not divisible by n_heads (" + std::to_string(n_heads) + ")");
  }

  std::size_t head_dim() const { return d_model / n_heads; }
};

enum class InitMode { kNormal, kZeros };

// All learnable tensors, stored as a flat list of named tensors. The names
// are the stable field names used by the checkpoint format.
struct ModelParams {
  ModelConfig config;
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  struct LayerIndex {
    int ln1_gain, ln1_bias, wq, wk, wv, wo, ln2_gain, ln2_bias, w1, b1, w2, b2;
  };
  int tok_emb = -1;
  int pos_emb = -1;
  std::vector<LayerIndex> layers;
  int final_ln_gain = -1;
  int final_ln_bias = -1;
  int head = -1;  // -1 when tied to tok_emb

  std::size_t total_parameters() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.numel();
    return n;
  }

  bool all_finite() const {
    for (const Tensor& t : tensors) {
      if (!t.all_finite()) return false;
    }
    return true;
  }

  const Tensor& tensor(int idx) const { return tensors[static_cast<std::size_t>(idx)]; }
  Tensor& tensor(int idx) { return tensors[static_cast<std::size_t>(idx)]; }
};

inline GradTable make_grads(const ModelParams& p) {
  GradTable g;
  g.slots.reserve(p.tensors.size());
  for (const Tensor& t : p.tensors) g.slots.push_back(Tensor::zeros(t.shape));
  return g;
}

// Deterministic initialization: normal(0, 0.02) everywhere, residual-path
// output projections (attention wo, MLP w2) scaled by 1/sqrt(2*n_layers),
// layer-norm gains at 1, biases at 0. InitMode::kZeros zeroes every tensor
// (including gains) so that logits are exactly uniform, which several
// symmetry tests rely on.
inline ModelParams init_params(const ModelConfig& cfg, InitMode mode = InitMode::kNormal) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  Rng rng(derive_seed(cfg.seed, "param-init"));
  const double base_std = 0.02;
  const double resid_std = base_std / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));

  auto add = [&](const std::string& name, std::size_t r, std::size_t c, double stddev) {
    Tensor t = Tensor::zeros({r, c}, true);
    if (mode == InitMode::kNormal && stddev > 0.0) t.fill_gaussian(rng, 0.0, stddev);
    p.names.push_back(name);
    p.tensors.push_back(std::move(t));
    return static_cast<int>(p.tensors.size() - 1);
  };
  auto add_const = [&](const std::string& name, std::size_t c, double value) {
    Tensor t = Tensor::zeros({1, c}, true);
    if (mode == InitMode::kNormal) std::fill(t.data.begin(), t.data.end(), value);
    p.names.push_back(name);
    p.tensors.push_back(std::move(t));
    return static_cast<int>(p.tensors.size() - 1);
  };

  p.tok_emb = add("tok_emb", cfg.vocab_size, cfg.d_model, base_std);
  p.pos_emb = add("pos_emb", cfg.max_seq_len, cfg.d_model, base_std);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    ModelParams::LayerIndex li{};
    li.ln1_gain = add_const(pre + "ln1.gain", cfg.d_model, 1.0);
    li.ln1_bias = add_const(pre + "ln1.bias", cfg.d_model, 0.0);
    li.wq = add(pre + "attn.wq", cfg.d_model, cfg.d_model, base_std);
    li.wk = add(pre + "attn.wk", cfg.d_model, cfg.d_model, base_std);
    li.wv = add(pre + "attn.wv", cfg.d_model, cfg.d_model, base_std);
    li.wo = add(pre + "attn.wo", cfg.d_model, cfg.d_model, resid_std);
    li.ln2_gain = add_const(pre + "ln2.gain", cfg.d_model, 1.0);
    li.ln2_bias = add_const(pre + "ln2.bias", cfg.d_model, 0.0);
    li.w1 = add(pre + "mlp.w1", cfg.d_model, cfg.d_ff, base_std);
    li.b1 = add_const(pre + "mlp.b1", cfg.d_ff, 0.0);
    li.w2 = add(pre + "mlp.w2", cfg.d_ff, cfg.d_model, resid_std);
    li.b2 = add_const(pre + "mlp.b2", cfg.d_model, 0.0);
    p.layers.push_back(li);
  }
  p.final_ln_gain = add_const("final_ln.gain", cfg.d_model, 1.0);
  p.final_ln_bias = add_const("final_ln.bias", cfg.d_model, 0.0);
  if (!cfg.tied_embeddings) p.head = add("head.w", cfg.d_model, cfg.vocab_size, base_std);
  return p;
}

// Head-averaged attention matrices from one forward pass, one [L x L]
// row-major matrix per layer. Rows are probability distributions over the
// causal support.
struct AttentionCapture {
  std::size_t seq_len = 0;
  std::vector<std::vector<double>> layer_attn;  // [n_layers][L*L]
};

namespace detail {

struct TrunkNodes {
  int final_hidden = -1;                    // [L x d] after the final layer norm
  std::vector<std::vector<int>> attn_probs;  // [layer][head] causal_softmax nodes
};

inline void check_tokens(const ModelConfig& cfg, std::span<const int> tokens) {
  if (tokens.size() > cfg.max_seq_len)
    throw SequenceTooLong("sequence of length " + std::to_string(tokens.size()) +
                          " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size)
      throw TokenOutOfVocab("token id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(cfg.vocab_size));
  }
}

// Records the whole decoder stack up to (and including) the final layer norm.
inline TrunkNodes build_trunk(Graph& g, const ModelParams& p, std::span<const int> tokens) {
  const ModelConfig& cfg = p.config;
  check_tokens(cfg, tokens);
  if (tokens.empty()) throw ShapeError("forward: empty token sequence");
  const std::size_t L = tokens.size();
  const std::size_t dh = cfg.head_dim();

  std::vector<int> tok_ids(tokens.begin(), tokens.end());
  std::vector<int> pos_ids(L);
  for (std::size_t i = 0; i < L; ++i) pos_ids[i] = static_cast<int>(i);

  auto leaf = [&](int idx) { return g.leaf(p.tensor(idx), idx); };

  TrunkNodes out;
  int x = g.add(g.embed_rows(leaf(p.tok_emb), tok_ids), g.embed_rows(leaf(p.pos_emb), pos_ids));
  for (const auto& li : p.layers) {
    const int h = g.layer_norm(x, leaf(li.ln1_gain), leaf(li.ln1_bias));
    const int q = g.matmul(h, leaf(li.wq));
    const int k = g.matmul(h, leaf(li.wk));
    const int v = g.matmul(h, leaf(li.wv));
    std::vector<int> head_outs, prob_nodes;
    for (std::size_t hd = 0; hd < cfg.n_heads; ++hd) {
      const int qh = g.slice_cols(q, hd * dh, dh);
      const int kh = g.slice_cols(k, hd * dh, dh);
      const int vh = g.slice_cols(v, hd * dh, dh);
      const int probs =
          g.causal_softmax(g.matmul(qh, kh, false, true), 1.0 / std::sqrt(double(dh)));
      prob_nodes.push_back(probs);
      head_outs.push_back(g.matmul(probs, vh));
    }
    out.attn_probs.push_back(std::move(prob_nodes));
    x = g.add(x, g.matmul(g.concat_cols(head_outs), leaf(li.wo)));
    const int h2 = g.layer_norm(x, leaf(li.ln2_gain), leaf(li.ln2_bias));
    int m = g.add_rowvec(g.matmul(h2, leaf(li.w1)), leaf(li.b1));
    m = g.add_rowvec(g.matmul(g.gelu(m), leaf(li.w2)), leaf(li.b2));
    x = g.add(x, m);
  }
  out.final_hidden = g.layer_norm(x, leaf(p.final_ln_gain), leaf(p.final_ln_bias));
  return out;
}

inline int build_logits(Graph& g, const ModelParams& p, int hidden) {
  if (p.config.tied_embeddings) return g.matmul(hidden, g.leaf(p.tensor(p.tok_emb), p.tok_emb),
                                                false, true);
  return g.matmul(hidden, g.leaf(p.tensor(p.head), p.head));
}

inline AttentionCapture read_capture(const Graph& g, const TrunkNodes& trunk, std::size_t L) {
  AttentionCapture cap;
  cap.seq_len = L;
  for (const auto& heads : trunk.attn_probs) {
    std::vector<double> avg(L * L, 0.0);
    for (int node : heads) {
      const std::span<const double> v = g.value(node);
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += v[i];
    }
    const double inv = 1.0 / static_cast<double>(heads.size());
    for (double& a : avg) a *= inv;
    cap.layer_attn.push_back(std::move(avg));
  }
  return cap;
}

}  // namespace detail

// Full forward pass: next-token logits for every position. Pure with respect
// to the parameters. When `capture` is non-null, head-averaged attention
// matrices are written there.
inline Tensor forward(const ModelParams& p, std::span<const int> tokens,
                      AttentionCapture* capture = nullptr) {
  Graph g;
  const detail::TrunkNodes trunk = detail::build_trunk(g, p, tokens);
  const int logits = detail::build_logits(g, p, trunk.final_hidden);
  const std::span<const double> v = g.value(logits);
  if (capture) *capture = detail::read_capture(g, trunk, tokens.size());
  return Tensor({tokens.size(), p.config.vocab_size}, std::vector<double>(v.begin(), v.end()));
}

// Softmax of a logit row at a given temperature, numerically stable.
inline std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> probs(logits.size());
  const double inv_t = 1.0 / temperature;
  double m = -1e300;
  for (double v : logits) m = std::max(m, v * inv_t);
  double z = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    probs[i] = std::exp(logits[i] * inv_t - m);
    z += probs[i];
  }
  for (double& v : probs) v /= z;
  return probs;
}

struct DecodeConfig {
  double temperature = 0.0;  // 0 selects greedy decoding
  std::uint64_t seed = 0;
  bool greedy() const { return temperature <= 0.0; }
};

enum class StopReason { kEos, kMaxNew, kContextFull };

struct GenerationResult {
  std::vector<int> tokens;  // generated ids only, without the prompt
  StopReason stop = StopReason::kMaxNew;
};

// Autoregressive decoding. Greedy decoding is deterministic; temperature
// decoding is deterministic for a fixed seed. Generation stops at `eos_id`,
// after `max_new` tokens, or when the context window is full. Each step
// recomputes the full forward pass (no KV cache).
inline GenerationResult generate(const ModelParams& p, std::span<const int> prompt, int max_new,
                                 const DecodeConfig& decode, int eos_id,
                                 std::vector<AttentionCapture>* step_captures = nullptr) {
  if (prompt.empty()) throw ShapeError("generate: prompt must be non-empty");
  if (prompt.size() >= p.config.max_seq_len)
    throw SequenceTooLong("generate: prompt of length " + std::to_string(prompt.size()) +
                          " leaves no room in context of " + std::to_string(p.config.max_seq_len));
  std::vector<int> ctx(prompt.begin(), prompt.end());
  GenerationResult out;
  Rng rng(derive_seed(decode.seed, "decode"));
  for (int step = 0; step < max_new; ++step) {
    if (ctx.size() >= p.config.max_seq_len) {
      out.stop = StopReason::kContextFull;
      return out;
    }
    AttentionCapture cap;
    const Tensor logits = forward(p, ctx, step_captures ? &cap : nullptr);
    if (step_captures) step_captures->push_back(std::move(cap));
    const std::size_t V = p.config.vocab_size;
    std::span<const double> row(logits.data.data() + (ctx.size() - 1) * V, V);
    int next = 0;
    if (decode.greedy()) {
      for (std::size_t i = 1; i < V; ++i) {
        if (row[i] > row[next]) next = static_cast<int>(i);
      }
    } else {
      const std::vector<double> probs = softmax(row, decode.temperature);
      const double r = rng.uniform01();
      double c = 0.0;
      next = static_cast<int>(V) - 1;
      for (std::size_t i = 0; i < V; ++i) {
        c += probs[i];
        if (r < c) {
          next = static_cast<int>(i);
          break;
        }
      }
    }
    if (next == eos_id) {
      out.stop = StopReason::kEos;
      return out;
    }
    out.tokens.push_back(next);
    ctx.push_back(next);
  }
  out.stop = StopReason::kMaxNew;
  return out;
}

}  // namespace cgd::engine
