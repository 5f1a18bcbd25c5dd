// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "../unit/fixtures.hpp"

using namespace iscr;
using iscr::test::TempDir;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Verdict gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  const DqnVariant variants[] = {DqnVariant::Vanilla, DqnVariant::Double, DqnVariant::Dueling};
  double worst = 0.0;
  std::size_t checked = 0;
  for (int c = 0; c < 100; ++c) {
    Rng rng(derive_seed(0x6AD, static_cast<std::uint64_t>(c)));
    const DqnVariant v = variants[c % 3];
    QLearnerConfig cfg;
    cfg.variant = v;
    cfg.gamma = 0.9;
    cfg.hidden.resize(rng.index(3));
    for (auto& h : cfg.hidden) h = 1 + rng.index(8);
    const std::size_t in = 1 + rng.index(8), actions = 2 + rng.index(7);
    QLearner q(in, actions, cfg, rng.next());
    Mlp& net = q.mutable_online();
    for (auto& p : net.parameters()) p += rng.uniform(-0.2, 0.2);

    const std::size_t B = 1 + rng.index(4);
    std::vector<double> states;
    std::vector<int> acts;
    std::vector<double> targets;
    for (std::size_t b = 0; b < B; ++b) {
      Experience e;
      for (std::size_t i = 0; i < in; ++i) e.state.push_back(rng.uniform(-1, 1));
      for (std::size_t i = 0; i < in; ++i) e.next_state.push_back(rng.uniform(-1, 1));
      e.action = static_cast<int>(rng.index(actions));
      e.reward = rng.uniform(-1, 1);
      e.done = rng.uniform() < 0.2;
      states.insert(states.end(), e.state.begin(), e.state.end());
      acts.push_back(e.action);
      targets.push_back(q.td_target(e));
    }
    std::vector<double> grad, scratch;
    net.loss_and_gradient(states, acts, targets, grad);
    const double h = 1e-6;
    for (std::size_t i = 0; i < net.parameter_count(); ++i) {
      const double saved = net.parameters()[i];
      net.parameters()[i] = saved + h;
      const double up = net.loss_and_gradient(states, acts, targets, scratch);
      net.parameters()[i] = saved - h;
      const double down = net.loss_and_gradient(states, acts, targets, scratch);
      net.parameters()[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
      ++checked;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {worst < 1e-4 && secs < 60.0, "100 nets, " + std::to_string(checked) + " parameters, max rel err " +
                                           fmt("%.2e", worst) + ", " + fmt("%.1fs", secs)};
}

Verdict dueling_identities() {
  Rng rng(0xD0E1);
  double worst_mean = 0.0, worst_shift = 0.0;
  for (int i = 0; i < 1000; ++i) {
    MlpArchitecture arch{1 + rng.index(8), {}, 2 + rng.index(7), true};
    arch.hidden.resize(1 + rng.index(2));
    for (auto& h : arch.hidden) h = 1 + rng.index(8);
    Mlp net(arch);
    net.initialize(rng);
    for (auto& p : net.parameters()) p += rng.uniform(-0.3, 0.3);
    std::vector<double> s(arch.input);
    for (auto& x : s) x = rng.uniform(-2, 2);
    const auto q = net.forward(s);
    const double v = net.streams(s).value;
    double mean = 0.0;
    for (double x : q) mean += (x - v) / static_cast<double>(q.size());
    worst_mean = std::max(worst_mean, std::abs(mean));

    const double shift = rng.uniform(-5, 5);
    const auto& adv = net.advantage_layer();
    for (std::size_t a = 0; a < adv.out; ++a) net.parameters()[adv.bias + a] += shift;
    const auto q2 = net.forward(s);
    for (std::size_t a = 0; a < q.size(); ++a) worst_shift = std::max(worst_shift, std::abs(q2[a] - q[a]));
  }
  return {worst_mean <= 1e-9 && worst_shift <= 1e-9,
          "1000 states, |mean(Q-V)| max " + fmt("%.1e", worst_mean) + ", shift delta max " + fmt("%.1e", worst_shift)};
}

Verdict double_collapse() {
  double worst = 0.0;
  Rng rng(0xDB1);
  for (int i = 0; i < 1000; ++i) {
    QLearnerConfig cfg;
    cfg.hidden = {1 + rng.index(8)};
    cfg.gamma = 0.99;
    const std::size_t in = 1 + rng.index(8), actions = 2 + rng.index(7);
    const std::uint64_t seed = rng.next();
    cfg.variant = DqnVariant::Vanilla;
    const QLearner vanilla(in, actions, cfg, seed);
    cfg.variant = DqnVariant::Double;
    const QLearner dbl(in, actions, cfg, seed);
    Experience e;
    for (std::size_t k = 0; k < in; ++k) e.state.push_back(rng.uniform(-1, 1));
    for (std::size_t k = 0; k < in; ++k) e.next_state.push_back(rng.uniform(-1, 1));
    e.action = static_cast<int>(rng.index(actions));
    e.reward = rng.uniform(-10, 10);
    worst = std::max(worst, std::abs(vanilla.td_target(e) - dbl.td_target(e)));
  }
  return {worst <= 1e-12, "1000 experiences, max |double - vanilla| " + fmt("%.1e", worst)};
}

// AP straight from the definition: mean over relevant documents of precision
// at the rank where each is retrieved, zero for the unretrieved ones.
double ap_by_definition(const std::vector<DocIndex>& ranking, const std::vector<DocIndex>& relevant) {
  auto rel = [&](DocIndex d) { return std::find(relevant.begin(), relevant.end(), d) != relevant.end(); };
  double sum = 0.0;
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    if (!rel(ranking[k])) continue;
    int hits = 0;
    for (std::size_t j = 0; j <= k; ++j) hits += rel(ranking[j]) ? 1 : 0;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(relevant.size());
}

Verdict ap_oracle() {
  CorpusBuilder b;
  for (int i = 0; i < 10; ++i) b.add_document("d" + std::to_string(i), {{"t", 1}}, {{"t", 1}});
  const Corpus corpus = b.build();
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t r = 1; r <= 3; ++r) {
      // r relevant documents, all among the n ranked, or r - 1 of them plus d9 which is never ranked
      for (int outside = 0; outside <= 1; ++outside) {
        const std::size_t inside = std::min(r - static_cast<std::size_t>(outside), n);
        if (inside + static_cast<std::size_t>(outside) != r) continue;
        std::vector<std::string> rel_ids;
        std::vector<DocIndex> rel;
        for (std::size_t i = 0; i < inside; ++i) {
          rel_ids.push_back("d" + std::to_string(i));
          rel.push_back(static_cast<DocIndex>(i));
        }
        if (outside) {
          rel_ids.push_back("d9");
          rel.push_back(9);
        }
        const QueryRecord q = make_query(corpus, "q", {{"t", 1.0}}, rel_ids, {}, false);
        std::vector<DocIndex> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        do {
          RankedList list;
          for (auto d : perm) list.entries.push_back({d, 0.0});
          ++cases;
          if (average_precision(list, q) != ap_by_definition(perm, rel)) ++mismatches;
        } while (std::next_permutation(perm.begin(), perm.end()));
      }
    }
  }
  return {mismatches == 0, std::to_string(cases) + " rankings, " + std::to_string(mismatches) + " mismatches"};
}

Verdict term_score_oracle() {
  std::size_t corpora = 0, mismatches = 0, terms = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed, ++corpora) {
    Rng rng(derive_seed(0x5C0, seed));
    const std::size_t n_docs = 4 + rng.index(9), vocab = 6 + rng.index(15);
    std::vector<std::map<std::string, double>> docs(n_docs);
    CorpusBuilder b;
    for (std::size_t d = 0; d < n_docs; ++d) {
      const std::size_t len = 1 + rng.index(6);
      for (std::size_t k = 0; k < len; ++k) {
        char w[8];
        std::snprintf(w, sizeof w, "w%02zu", rng.index(vocab));
        docs[d][w] += static_cast<double>(1 + rng.index(4));
      }
      char id[8];
      std::snprintf(id, sizeof id, "d%02zu", d);
      b.add_document(id, docs[d], docs[d]);
    }
    const Corpus corpus = b.build();
    std::vector<std::string> rel;
    for (std::size_t d = 0; d < n_docs; ++d)
      if (rel.empty() || rng.uniform() < 0.3) {
        char id[8];
        std::snprintf(id, sizeof id, "d%02zu", d);
        rel.push_back(id);
      }
    const std::string qterm = docs[0].begin()->first;
    const QueryRecord q = make_query(corpus, "q", {{qterm, 1.0}}, rel, {}, false);

    // brute force over the raw maps: df, idf, S(t) per word, best first, ties by word
    std::set<std::string> words;
    for (const auto& d : docs)
      for (const auto& [w, c] : d) words.insert(w);
    std::vector<std::pair<std::string, double>> expect;
    for (const auto& w : words) {
      std::size_t df = 0;
      for (const auto& d : docs) df += d.count(w);
      const double idf = std::log(static_cast<double>(n_docs) / static_cast<double>(df));
      double s = 0.0;
      for (const auto& id : rel) {
        const auto& d = docs[static_cast<std::size_t>(std::stoi(id.substr(1)))];
        auto it = d.find(w);
        s += (it == d.end() ? 0.0 : it->second) * std::log(1.0 + idf);
      }
      if (s > 0.0) expect.emplace_back(w, s);
    }
    std::stable_sort(expect.begin(), expect.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    const auto got = rank_terms(q, corpus);
    terms += expect.size();
    if (got.size() != expect.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t i = 0; i < got.size(); ++i)
      if (corpus.term(got[i].term) != expect[i].first || got[i].score != expect[i].second) {
        ++mismatches;
        break;
      }
  }
  return {mismatches == 0, std::to_string(corpora) + " corpora, " + std::to_string(terms) + " ranked terms, " +
                               std::to_string(mismatches) + " corpora differ"};
}

Verdict termination_table() {
  const TerminationPolicy p;
  bool ok = p.map_threshold == 0.6 && p.max_turns == 4;
  ok &= check_termination(0.61, 1, p) == Outcome::Success;
  ok &= check_termination(0.59, 5, p) == Outcome::Failure;
  ok &= check_termination(0.59, 4, p) == Outcome::Continue;

  // the same through a live episode: four stalled turns on a query that starts at 7/12
  const Dataset ds = iscr::test::toy_dataset();
  Episode stall = Episode::for_query(ds.corpus, ds.queries[0], {});
  for (int t = 0; t < 4 && !stall.finished(); ++t) {
    stall.propose(SystemAction::ReturnRequest, stall.manager_state());
    stall.respond(ProvideTerm{"unheard"});
  }
  ok &= stall.outcome() == Outcome::Failure && stall.completed_turns() == 4;
  Episode quick = Episode::for_query(ds.corpus, ds.queries[0], {});
  quick.propose(SystemAction::ReturnDocuments, quick.manager_state());
  quick.respond(PickDocument{"d1"});
  ok &= quick.outcome() == Outcome::Success && quick.completed_turns() == 1;
  return {ok, "threshold 0.6, 4 turns; (0.61,1) success, (0.59,4 exhausted) failure"};
}

Verdict closed_forms() {
  const auto labels = rank_labels();
  const auto one_hot = ActionDistribution::from_counts(labels, std::vector<std::size_t>{0, 7, 0, 0});
  const auto uniform = ActionDistribution::from_counts(labels, std::vector<std::size_t>{3, 3, 3, 3});
  const auto skew = ActionDistribution::from_counts(labels, std::vector<std::size_t>{5, 2, 1, 1});
  const double h0 = entropy(one_hot), h4 = entropy(uniform);
  const double kl = std::max({std::abs(kl_divergence(uniform, uniform)), std::abs(kl_divergence(skew, skew)),
                              std::abs(kl_divergence(one_hot, one_hot))});
  return {h0 == 0.0 && std::abs(h4 - std::log(4.0)) <= 1e-9 && kl <= 1e-9,
          "H(one-hot) " + fmt("%g", h0) + ", H(uniform) - ln 4 " + fmt("%.1e", h4 - std::log(4.0)) +
              ", max KL(p||p) " + fmt("%.1e", kl)};
}

// ---------------------------------------------------------------------------
// Criteria that need a trained run

struct TrainedRun {
  TempDir a, b;
  RunConfig config;
  bool identical = false;
  std::string detail;
};

RunConfig reproducibility_config(const std::string& dir) {
  RunConfig c = desk_preset();
  c.training.seed = 11;
  c.synthetic.seed = 11;
  c.output_dir = dir;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict reproducibility(TrainedRun& run) {
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream sink;
  for (const TempDir* d : {&run.a, &run.b}) {
    const RunConfig c = reproducibility_config(d->path().string());
    cmd_gen(c, sink);
    cmd_train(c, sink, sink);
  }
  run.config = reproducibility_config(run.a.path().string());
  const std::string ta = slurp(run.a.path() / "trial_0" / "learning_curve.tsv");
  const std::string tb = slurp(run.b.path() / "trial_0" / "learning_curve.tsv");
  const auto rows = std::count(ta.begin(), ta.end(), '\n');
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {!ta.empty() && ta == tb, "two desk-preset cmd_train runs, " + std::to_string(rows) +
                                       " lines each, byte-identical: " + (ta == tb ? "yes" : "no") + ", " +
                                       fmt("%.0fs", secs)};
}

Verdict return_identity(const TrainedRun& run) {
  const RunConfig c = resolve_paths(run.config);
  const Dataset data = load_run_data(c);
  const auto traces = logged_traces(c);
  std::size_t mismatches = 0;
  double worst_turnwise = 0.0;
  for (const auto& tr : traces) {
    const auto maps = replay_map_sequence(tr, data, c.episode);
    double costs = 0.0, rewards = 0.0;
    for (const auto& t : tr.turns) {
      costs += t.cost;
      rewards += t.manager_reward;
    }
    const double expect = costs + c.episode.lambda * (maps.back() - maps.front());
    if (tr.manager_return != expect) ++mismatches;
    worst_turnwise = std::max(worst_turnwise, std::abs(rewards - expect));
  }
  return {!traces.empty() && mismatches == 0,
          std::to_string(traces.size()) + " logged traces, " + std::to_string(mismatches) +
              " mismatches; per-turn reward sums agree to " + fmt("%.1e", worst_turnwise)};
}

Verdict rule_entropy(const TrainedRun& run) {
  const RunConfig c = resolve_paths(run.config);
  const Dataset data = load_run_data(c);
  const auto pool = extract_scenarios(logged_traces(c), 1, 1u << 30);
  if (pool.empty()) return {false, "no scenarios in the logged traces"};
  Rng rng(0x5A1);
  std::vector<Scenario> sampled;
  for (int i = 0; i < 1000; ++i) sampled.push_back(pool[rng.index(pool.size())]);
  const RuleBasedSimulator rule;
  const auto d = action_distribution(simulator_responder(rule, data, 0.0), sampled, 1, rng);
  const double h = entropy(d);
  return {h == 0.0 && d.samples == 1000, "1000 scenarios sampled from " + std::to_string(pool.size()) +
                                             " logged document turns, entropy " + fmt("%g", h)};
}

std::vector<EpochLog> learning_curve(std::uint64_t seed, SimulatorKind kind) {
  RunConfig c = desk_preset();
  c.synthetic.seed = seed;
  c.training.seed = seed;
  c.simulator_kind = kind;
  const Dataset ds = make_synthetic_dataset(c.synthetic);
  JointTrainer trainer(ds, c, split_for_trial(make_folds(ds.queries.size(), c.training.folds, seed), 0));
  return trainer.train();
}

Verdict learning_curves() {
  const auto start = std::chrono::steady_clock::now();
  int rising = 0, beats_rule = 0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto joint = learning_curve(s, SimulatorKind::Dqn);
    const auto rule = learning_curve(s, SimulatorKind::Rule);
    const bool up = joint.back().train_return > joint.front().train_return;
    const bool ge = joint.back().train_return >= rule.back().train_return;
    rising += up;
    beats_rule += ge;
    std::printf("  seed %2llu: DQN/DQN epoch 1 %8.3f, epoch %d %8.3f; rule epoch %d %8.3f\n",
                static_cast<unsigned long long>(s), joint.front().train_return, joint.back().epoch,
                joint.back().train_return, rule.back().epoch, rule.back().train_return);
    std::fflush(stdout);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {rising >= 8 && beats_rule >= 7 && secs < 1200.0,
          "rising in " + std::to_string(rising) + "/10 seeds, DQN/DQN >= rule in " + std::to_string(beats_rule) +
              "/10, " + fmt("%.0fs", secs)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* name, const std::function<Verdict()>& f) {
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  };

  report("gradient correctness", gradient_check);
  report("dueling identities", dueling_identities);
  report("double-DQN collapse", double_collapse);
  report("AP/MAP oracle", ap_oracle);
  report("term score oracle", term_score_oracle);
  report("termination table", termination_table);
  report("entropy/KL closed forms", closed_forms);

  TrainedRun run;
  report("reproducibility", [&] { return reproducibility(run); });
  report("return identity over logged traces", [&] { return return_identity(run); });
  report("rule-based determinism", [&] { return rule_entropy(run); });
  report("learning-curve property", learning_curves);

  std::printf("%s: %d criteria failed\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}
