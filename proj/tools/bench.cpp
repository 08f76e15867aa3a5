// Rough timing and learnability probe used while tuning the default desk
// configuration. Not part of the test suite.

#include <malloc.h>

#include <chrono>
#include <cstdio>
#include <string>

#include "cgdlab/checkpoint.hpp"
#include "cgdlab/datagen.hpp"
#include "cgdlab/gradcheck.hpp"
#include "cgdlab/model.hpp"
#include "cgdlab/probes.hpp"
#include "cgdlab/taskworld.hpp"
#include "cgdlab/training.hpp"

using namespace cgd;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::vector<taskworld::Problem> make_problems(taskworld::TaskKind kind,
                                              const taskworld::Difficulty& diff, std::size_t n,
                                              std::uint64_t stream) {
  std::vector<taskworld::Problem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(taskworld::sample_problem(kind, diff, derive_seed(stream, i)));
  return out;
}

double exact_match(const engine::ModelParams& params,
                   const std::vector<taskworld::Problem>& problems, int max_new) {
  const training::Tokenizer& tok = training::tokenizer();
  std::size_t hit = 0;
  for (const auto& p : problems) {
    std::vector<int> prompt{training::Tokenizer::kPrompt};
    const auto ids = tok.encode_text(p.prompt_text);
    prompt.insert(prompt.end(), ids.begin(), ids.end());
    prompt.push_back(training::Tokenizer::kAnswer);
    const auto gen = engine::generate(params, prompt, max_new, {}, training::Tokenizer::kEos);
    const std::string text = tok.decode(gen.tokens);
    // final Answer: line
    std::string answer;
    std::size_t pos = text.rfind("Answer:");
    if (pos != std::string::npos) {
      answer = text.substr(pos + 7);
      if (!answer.empty() && answer[0] == ' ') answer.erase(0, 1);
      const std::size_t nl = answer.find('\n');
      if (nl != std::string::npos) answer = answer.substr(0, nl);
    }
    if (answer == p.gold_answer) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(problems.size());
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  const std::string mode = argc > 1 ? argv[1] : "pipeline";
  const std::uint64_t master = argc > 2 ? std::stoull(argv[2]) : 1;

  engine::ModelConfig mc;
  mc.vocab_size = static_cast<std::size_t>(training::tokenizer().vocab_size());
  mc.d_model = 32;
  mc.n_layers = 2;
  mc.n_heads = 4;
  mc.d_ff = 128;
  mc.max_seq_len = 320;
  mc.seed = derive_seed(master, "init");

  taskworld::Difficulty diff;
  const auto kind = taskworld::TaskKind::kChainedArithmetic;

  if (mode == "speed") {
    // raw forward/backward throughput on a CGD-sized example
    auto params = engine::init_params(mc);
    auto problems = make_problems(kind, diff, 1, derive_seed(master, "datagen"));
    datagen::AugmentedRecord rec;
    rec.prompt = problems[0].prompt_text;
    rec.initial_answer = taskworld::render_solution(problems[0]);
    rec.critique = taskworld::critique(problems[0], rec.initial_answer).text;
    rec.refined_answer = rec.initial_answer;
    rec.task_kind = kind;
    rec.difficulty = diff;
    rec.problem_seed = problems[0].seed;
    const auto ex = training::render(rec, rec.initial_answer, training::Objective::kCgd,
                                     training::tokenizer(), mc.max_seq_len);
    std::printf("example length: %zu tokens, %zu masked\n", ex.input_ids.size(), ex.mask_count());
    auto grads = engine::make_grads(params);
    const double t0 = now_s();
    const int iters = 200;
    double loss = 0;
    for (int i = 0; i < iters; ++i) {
      engine::Graph g;
      const auto [node, cnt] = training::build_nll_sum(g, params, ex);
      (void)cnt;
      loss = g.scalar_value(node);
      g.backward(node, grads);
    }
    const double dt = now_s() - t0;
    std::printf("fwd+bwd: %.3f ms/example (loss %.3f)\n", 1000.0 * dt / iters, loss);
    const double t1 = now_s();
    for (int i = 0; i < iters; ++i) {
      engine::Tensor logits = engine::forward(params, ex.input_ids);
      loss = logits.data[0];
    }
    std::printf("full fwd: %.3f ms/example\n", 1000.0 * (now_s() - t1) / iters);
    return 0;
  }

  if (mode == "peek") {
    // bench peek <master> <steps> <lr> <batch> <d_model> <n_problems>
    const std::size_t steps = argc > 3 ? std::stoul(argv[3]) : 1500;
    const double lr = argc > 4 ? std::stod(argv[4]) : 6e-4;
    const std::size_t batch = argc > 5 ? std::stoul(argv[5]) : 16;
    mc.d_model = argc > 6 ? std::stoul(argv[6]) : 32;
    mc.d_ff = 4 * mc.d_model;
    const std::size_t nprob = argc > 7 ? std::stoul(argv[7]) : 1000;
    auto fresh = engine::init_params(mc);
    auto boot_problems = make_problems(kind, diff, nprob, derive_seed(master, "bootstrap-data"));
    datagen::GenSettings gs;
    auto boot_corpus =
        datagen::augment(boot_problems, fresh, gs, derive_seed(master, "bootstrap-gen"), "fresh");
    training::TrainHP hp;
    hp.batch_size = batch;
    hp.total_steps = steps;
    hp.peak_lr = lr;
    hp.seed = derive_seed(master, "train");
    auto base = training::train(fresh, boot_corpus, training::Objective::kSft, hp);
    auto eval_problems = make_problems(kind, diff, 8, derive_seed(master, "eval"));
    const training::Tokenizer& tok = training::tokenizer();
    for (const auto& p : eval_problems) {
      std::vector<int> prompt{training::Tokenizer::kPrompt};
      const auto ids = tok.encode_text(p.prompt_text);
      prompt.insert(prompt.end(), ids.begin(), ids.end());
      prompt.push_back(training::Tokenizer::kAnswer);
      const auto gen = engine::generate(base.params, prompt, 96, {},
                                        training::Tokenizer::kEos);
      std::printf("--- prompt: %s\ngold:\n%s\ngen:\n%s\n", p.prompt_text.c_str(),
                  taskworld::render_solution(p).c_str(), tok.decode(gen.tokens).c_str());
    }
    auto train_eval = make_problems(kind, diff, 200, derive_seed(master, "bootstrap-data"));
    std::printf("train-problem acc: %.3f\n", exact_match(base.params, train_eval, 96));
    auto held = make_problems(kind, diff, 200, derive_seed(master, "eval"));
    std::printf("held-out acc:      %.3f\n", exact_match(base.params, held, 96));
    return 0;
  }

  if (mode == "pretrain") {
    // bench pretrain <master> <steps> <lr> <batch> <d_model>
    const std::size_t steps = argc > 3 ? std::stoul(argv[3]) : 1500;
    const double lr = argc > 4 ? std::stod(argv[4]) : 3e-4;
    const std::size_t batch = argc > 5 ? std::stoul(argv[5]) : 16;
    mc.d_model = argc > 6 ? std::stoul(argv[6]) : 32;
    mc.d_ff = 4 * mc.d_model;
    const double t0 = now_s();
    auto fresh = engine::init_params(mc);
    auto boot_problems = make_problems(kind, diff, 1000, derive_seed(master, "bootstrap-data"));
    datagen::GenSettings gs;
    auto boot_corpus =
        datagen::augment(boot_problems, fresh, gs, derive_seed(master, "bootstrap-gen"), "fresh");
    training::TrainHP hp;
    hp.batch_size = batch;
    hp.total_steps = steps;
    hp.peak_lr = lr;
    hp.seed = derive_seed(master, "train");
    auto base = training::train(fresh, boot_corpus, training::Objective::kSft, hp);
    auto eval_problems = make_problems(kind, diff, 200, derive_seed(master, "eval"));
    const double acc = exact_match(base.params, eval_problems, 96);
    // label ratio from a temperature-sampled corpus off this base
    auto probs2 = make_problems(kind, diff, 300, derive_seed(master, "datagen"));
    auto corpus = datagen::augment(probs2, base.params, gs, derive_seed(master, "augment"), "x");
    std::printf("steps %zu lr %.0e batch %zu d %zu | %.1fs | loss %.3f acc %.3f | correct@0.8 %zu/300\n",
                steps, lr, batch, mc.d_model, now_s() - t0, base.curve.back().loss, acc,
                corpus.count_correct());
    return 0;
  }

  if (mode == "makebase") {
    // bench makebase <master> <pretrain_steps> <d_model> -> /tmp/cgd_base_<master>.ckpt + corpus
    const std::size_t pretrain_steps = argc > 3 ? std::stoul(argv[3]) : 6000;
    mc.d_model = argc > 4 ? std::stoul(argv[4]) : 32;
    mc.d_ff = 4 * mc.d_model;
    const double base_lr = argc > 5 ? std::stod(argv[5]) : 6e-4;
    mc.n_layers = argc > 6 ? std::stoul(argv[6]) : 2;
    auto fresh = engine::init_params(mc);
    auto boot_problems = make_problems(kind, diff, 1000, derive_seed(master, "bootstrap-data"));
    datagen::GenSettings boot_gs;
    boot_gs.max_new = 8;
    auto boot_corpus =
        datagen::augment(boot_problems, fresh, boot_gs, derive_seed(master, "bootstrap-gen"), "fresh");
    training::TrainHP hp;
    hp.batch_size = 16;
    hp.total_steps = pretrain_steps;
    hp.peak_lr = base_lr;
    hp.seed = derive_seed(master, "train-base");
    auto base = training::train(fresh, boot_corpus, training::Objective::kSft, hp);
    engine::save_checkpoint(base.params, "/tmp/cgd_base_" + std::to_string(master) + ".ckpt");
    auto problems = make_problems(kind, diff, 2000, derive_seed(master, "datagen"));
    datagen::GenSettings gs;
    gs.max_new = 72;
    if (argc > 8) gs.temperature = std::stod(argv[8]);
    auto corpus = datagen::augment(problems, base.params, gs, derive_seed(master, "augment"), "base");
    const double rho = argc > 7 ? std::stod(argv[7]) : 0.5;
    auto mixed = datagen::apply_mixture(corpus, rho, 1200, derive_seed(master, "mixture"));
    datagen::write_corpus(mixed, "/tmp/cgd_corpus_" + std::to_string(master) + ".jsonl");
    auto probe_problems = make_problems(kind, diff, 300, derive_seed(master, "probes"));
    auto probe_fix =
        datagen::augment(probe_problems, base.params, gs, derive_seed(master, "probe-gen"), "base");
    datagen::write_corpus(probe_fix, "/tmp/cgd_probe_" + std::to_string(master) + ".jsonl");
    std::size_t short_y = 0;
    for (const auto& r : mixed.records) short_y += r.initial_answer.size() < 35 ? 1 : 0;
    std::printf("short y' (<35 chars) in mixed corpus: %zu\n", short_y);
    auto eval_problems = make_problems(kind, diff, 300, derive_seed(master, "eval"));
    const auto [rep, outs] = probes::exact_match(base.params, eval_problems, 80);
    std::printf("base ready: acc %.3f, corpus correct %zu/2000, mixed %zu\n",
                rep.exact_match_accuracy, corpus.count_correct(), mixed.records.size());
    return 0;
  }

  if (mode == "ftsweep") {
    // bench ftsweep <master> <obj> <lr> <steps> [peek]
    const std::string obj_name = argc > 3 ? argv[3] : "CGD";
    const double lr = argc > 4 ? std::stod(argv[4]) : 1e-4;
    const std::size_t steps = argc > 5 ? std::stoul(argv[5]) : 600;
    const int eval_max_new = argc > 6 ? std::stoi(argv[6]) : 80;
    const bool peek = argc > 7;
    const auto obj = training::objective_from_string(obj_name);
    auto base = engine::load_checkpoint("/tmp/cgd_base_" + std::to_string(master) + ".ckpt");
    auto corpus = datagen::read_corpus("/tmp/cgd_corpus_" + std::to_string(master) + ".jsonl");
    auto probe_fix = datagen::read_corpus("/tmp/cgd_probe_" + std::to_string(master) + ".jsonl");
    training::TrainHP ft;
    ft.batch_size = 16;
    ft.total_steps = steps;
    ft.peak_lr = lr;
    ft.seed = derive_seed(master, "train-ft");
    const double ts = now_s();
    auto trained = training::train(base, corpus, obj, ft);
    auto eval_problems = make_problems(kind, diff, 300, derive_seed(master, "eval"));
    const auto [rep, outs] = probes::exact_match(trained.params, eval_problems, eval_max_new);
    const auto drift = probes::format_drift_rate(outs);
    const auto ent = probes::entropy_probe(trained.params, probe_fix.records);
    double gw = 0, gwo = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      gw += probes::grad_norm_probe(trained.params, probe_fix.records[i],
                                    probes::GradCondition::kWithCritique);
      gwo += probes::grad_norm_probe(trained.params, probe_fix.records[i],
                                     probes::GradCondition::kWithoutCritique);
    }
    std::printf("%-14s lr %.0e steps %4zu | %3.0fs | acc %.3f drift %.3f | H %.3f | g+ %.2f g- %.2f\n",
                obj_name.c_str(), lr, steps, now_s() - ts, rep.exact_match_accuracy,
                drift.drift_rate, ent.mean, gw / 40, gwo / 40);
    if (peek) {
      for (int i = 0; i < 4; ++i) std::printf("--- out[%d]:\n%s\n", i, outs[i].c_str());
    }
    return 0;
  }

  if (mode == "pipeline2") {
    // bench pipeline2 <master> <pretrain_steps> <ft_steps> <d_model> <mix01> <ft_lr> <lr_factor5?>
    const std::size_t pretrain_steps = argc > 3 ? std::stoul(argv[3]) : 6000;
    const std::size_t ft_steps = argc > 4 ? std::stoul(argv[4]) : 350;
    mc.d_model = argc > 5 ? std::stoul(argv[5]) : 32;
    mc.d_ff = 4 * mc.d_model;
    const bool use_mixture = argc > 6 ? std::stoi(argv[6]) != 0 : true;
    const double ft_lr = argc > 7 ? std::stod(argv[7]) : 3e-4;
    const bool lr5 = argc > 8 ? std::stoi(argv[8]) != 0 : false;

    const double t0 = now_s();
    auto fresh = engine::init_params(mc);
    auto boot_problems = make_problems(kind, diff, 1000, derive_seed(master, "bootstrap-data"));
    datagen::GenSettings boot_gs;
    boot_gs.max_new = 8;  // SFT-only corpus, initial answers unused
    auto boot_corpus =
        datagen::augment(boot_problems, fresh, boot_gs, derive_seed(master, "bootstrap-gen"), "fresh");
    training::TrainHP hp;
    hp.batch_size = 16;
    hp.total_steps = pretrain_steps;
    hp.peak_lr = 6e-4;
    hp.seed = derive_seed(master, "train-base");
    auto base = training::train(fresh, boot_corpus, training::Objective::kSft, hp);
    auto eval_problems = make_problems(kind, diff, 300, derive_seed(master, "eval"));
    const auto [base_rep, base_out] = probes::exact_match(base.params, eval_problems, 80);
    std::printf("[%6.1fs] base acc %.3f\n", now_s() - t0, base_rep.exact_match_accuracy);

    auto problems = make_problems(kind, diff, 2000, derive_seed(master, "datagen"));
    datagen::GenSettings gs;
    gs.max_new = 72;
    auto corpus =
        datagen::augment(problems, base.params, gs, derive_seed(master, "augment"), "base");
    std::printf("[%6.1fs] corpus %zu records, %zu correct\n", now_s() - t0, corpus.records.size(),
                corpus.count_correct());
    datagen::Corpus train_corpus = corpus;
    if (use_mixture) {
      const std::size_t nc = corpus.count_correct();
      const std::size_t ni = corpus.records.size() - nc;
      const std::size_t n = 2 * std::min(nc, ni);
      if (n >= 400) {
        train_corpus = datagen::apply_mixture(corpus, 0.5, std::min<std::size_t>(n, 1200),
                                              derive_seed(master, "mixture"));
        std::printf("[%6.1fs] mixture 50/50 -> %zu records\n", now_s() - t0,
                    train_corpus.records.size());
      } else {
        std::printf("[%6.1fs] mixture infeasible (correct=%zu), using raw corpus\n", now_s() - t0,
                    nc);
      }
    }

    training::TrainHP ft = hp;
    ft.total_steps = ft_steps;
    ft.peak_lr = ft_lr * (lr5 ? 5.0 : 1.0);
    ft.seed = derive_seed(master, "train-ft");

    // probe fixture: temperature-sampled records from the base student
    auto probe_problems = make_problems(kind, diff, 300, derive_seed(master, "probes"));
    auto probe_fix =
        datagen::augment(probe_problems, base.params, gs, derive_seed(master, "probe-gen"), "base");

    struct Row {
      std::string name;
      double acc, drift, entropy, gn_with, gn_without;
    };
    std::vector<Row> rows;
    for (auto obj : {training::Objective::kCgd, training::Objective::kCgdNoCritique,
                     training::Objective::kDistilledSft, training::Objective::kCft}) {
      const double ts = now_s();
      auto trained = training::train(base.params, train_corpus, obj, ft);
      const auto [rep, outs] = probes::exact_match(trained.params, eval_problems, 80);
      const auto drift = probes::format_drift_rate(outs);
      const auto ent = probes::entropy_probe(trained.params, probe_fix.records);
      double gw = 0, gwo = 0;
      const std::size_t gn = 60;
      for (std::size_t i = 0; i < gn; ++i) {
        gw += probes::grad_norm_probe(trained.params, probe_fix.records[i],
                                      probes::GradCondition::kWithCritique);
        gwo += probes::grad_norm_probe(trained.params, probe_fix.records[i],
                                       probes::GradCondition::kWithoutCritique);
      }
      rows.push_back({training::to_string(obj), rep.exact_match_accuracy, drift.drift_rate,
                      ent.mean, gw / gn, gwo / gn});
      std::printf(
          "[%6.1fs] %-14s ft %.0fs | acc %.3f drift %.3f | H %.3f | gnorm with %.2f without %.2f\n",
          now_s() - t0, rows.back().name.c_str(), now_s() - ts, rows.back().acc,
          rows.back().drift, rows.back().entropy, rows.back().gn_with, rows.back().gn_without);
    }
    std::printf("summary seed=%llu: CGD-CGDNC acc delta %+0.3f | drift CFT-CGD %+0.3f | H(DSFT)-H(CGD) %+0.3f\n",
                (unsigned long long)master, rows[0].acc - rows[1].acc, rows[3].drift - rows[0].drift,
                rows[2].entropy - rows[0].entropy);
    return 0;
  }

  // pipeline: bootstrap SFT -> datagen -> CGD/CGDNoCritique fine-tune -> eval
  double t0 = now_s();
  auto fresh = engine::init_params(mc);
  auto boot_problems = make_problems(kind, diff, 1000, derive_seed(master, "bootstrap-data"));
  datagen::GenSettings gs;
  auto boot_corpus = datagen::augment(boot_problems, fresh, gs, derive_seed(master, "bootstrap-gen"),
                                      "fresh");
  std::printf("[%6.1fs] bootstrap corpus: %zu records, %zu correct\n", now_s() - t0,
              boot_corpus.records.size(), boot_corpus.count_correct());

  training::TrainHP hp;
  hp.batch_size = 16;
  hp.total_steps = argc > 3 ? std::stoul(argv[3]) : 800;
  hp.peak_lr = 3e-4;
  hp.seed = derive_seed(master, "train");
  auto base = training::train(fresh, boot_corpus, training::Objective::kSft, hp);
  std::printf("[%6.1fs] SFT pretrain done: first loss %.3f last %.3f\n", now_s() - t0,
              base.curve.front().loss, base.curve.back().loss);

  auto eval_problems = make_problems(kind, diff, 200, derive_seed(master, "eval"));
  const double base_acc = exact_match(base.params, eval_problems, 96);
  std::printf("[%6.1fs] base exact match: %.3f\n", now_s() - t0, base_acc);

  auto problems = make_problems(kind, diff, 1500, derive_seed(master, "datagen"));
  auto corpus = datagen::augment(problems, base.params, gs, derive_seed(master, "augment"), "base");
  std::printf("[%6.1fs] corpus: %zu records, %zu correct\n", now_s() - t0, corpus.records.size(),
              corpus.count_correct());

  training::TrainHP ft = hp;
  ft.total_steps = argc > 4 ? std::stoul(argv[4]) : 400;
  for (auto obj : {training::Objective::kCgd, training::Objective::kCgdNoCritique,
                   training::Objective::kDistilledSft, training::Objective::kCft}) {
    const double ts = now_s();
    auto trained = training::train(base.params, corpus, obj, ft);
    const double acc = exact_match(trained.params, eval_problems, 96);
    std::printf("[%6.1fs] %-14s train %.1fs  acc %.3f  (loss %.3f -> %.3f)\n", now_s() - t0,
                training::to_string(obj).c_str(), now_s() - ts, acc, trained.curve.front().loss,
                trained.curve.back().loss);
  }
  return 0;
}
