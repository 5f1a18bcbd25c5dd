#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "fixtures.hpp"

using namespace iscr;
using iscr::test::fixed_manager;
using iscr::test::small_spec;
using iscr::test::TempDir;
using iscr::test::tiny_config;
using iscr::test::toy_dataset;
using nlohmann::json;

namespace {

struct FakeClock {
  std::shared_ptr<std::chrono::steady_clock::time_point> now =
      std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::time_point{});
  Clock fn() const {
    return [n = now] { return *n; };
  }
  void advance_minutes(double m) {
    *now += std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double, std::ratio<60>>(m));
  }
};

EpisodeSettings sim_settings() {
  EpisodeSettings s;
  s.simulator_k = 10;
  return s;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

/// The first relevant document on offer, else the first one.
json pick_relevant(const Dataset& ds, const json& view) {
  const QueryRecord* q = ds.find_query(view["query"]["id"].get<std::string>());
  const auto& docs = view["prompt"]["documents"];
  for (const auto& d : docs) {
    const auto id = d["id"].get<std::string>();
    if (q->is_relevant(*ds.corpus.find_document(id))) return {{"type", "pick_document"}, {"doc_id", id}};
  }
  return {{"type", "pick_document"}, {"doc_id", docs[0]["id"]}};
}

/// Four-candidate tasks built straight from relevance judgments.
std::vector<Scenario> make_tasks(const Dataset& ds, std::size_t n) {
  std::vector<Scenario> out;
  for (const auto& q : ds.queries) {
    if (q.relevant_docs.size() < 4 || out.size() == n) continue;
    Scenario s;
    char id[16];
    std::snprintf(id, sizeof id, "sc%04zu", out.size());
    s.id = id;
    s.query_id = q.id;
    s.candidates.assign(q.relevant_docs.begin(), q.relevant_docs.begin() + 4);
    s.ranked = s.candidates;
    s.state.assign(4, 1.0);
    out.push_back(s);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sessions

TEST(Sessions, KnownQueryOpensWithAPrompt) {
  const Dataset ds = toy_dataset();
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnDocuments), {});
  const json v = sm.create({{"query_id", "q1"}});
  EXPECT_EQ(v["status"], "active");
  EXPECT_EQ(v["turn"], 0);
  EXPECT_EQ(v["judged"], true);
  EXPECT_EQ(v["prompt"]["action"], "return_documents");
  EXPECT_EQ(v["prompt"]["expects"], "pick_document");
  EXPECT_EQ(v["prompt"]["documents"][0]["id"], "d2");
  EXPECT_EQ(v["prompt"]["documents"][0]["summary"], "b c");
  EXPECT_NEAR(v["map"].get<double>(), 7.0 / 12.0, 1e-15);
  EXPECT_EQ(v["ranking"].size(), 3u);
  EXPECT_TRUE(v["summary"].is_null());
  EXPECT_EQ(sm.size(), 1u);
}

TEST(Sessions, FreeTextQueryIsUnjudged) {
  const Dataset ds = toy_dataset();
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnTopic), {});
  const json v = sm.create({{"query", "a d unheard"}});
  EXPECT_EQ(v["judged"], false);
  EXPECT_TRUE(v["map"].is_null());
  EXPECT_TRUE(v["query"]["id"].is_null());
  EXPECT_EQ(v["prompt"]["topics"].size(), 4u);
  EXPECT_EQ(v["prompt"]["topics"][0]["label"], "letters a");
  const json r = sm.respond(v["session_id"], {{"type", "pick_topic"}, {"topic_id", "T1"}});
  EXPECT_EQ(r["turn"], 1);
  EXPECT_EQ(r["status"], "active");
}

TEST(Sessions, BadCreateRequests) {
  const Dataset ds = toy_dataset();
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnTopic), {});
  EXPECT_THROW(sm.create({{"query_id", "q404"}}), NotFoundError);
  EXPECT_THROW(sm.create({{"query", "   "}}), ValidationError);
  EXPECT_THROW(sm.create({{"query", "nothing known"}}), ValidationError);
  EXPECT_THROW(sm.create({{"query_id", 3}}), ValidationError);
  EXPECT_THROW(sm.create(json::array()), ValidationError);
  EXPECT_THROW(sm.create(json::object()), ValidationError);
  EXPECT_THROW(sm.get("nope"), NotFoundError);
  EXPECT_EQ(sm.size(), 0u);
}

TEST(Sessions, ManagerWidthMustMatchFeatures) {
  const Dataset ds = toy_dataset();
  EpisodeSettings s;
  s.features.mode = FeatureMode::HumanRaw;
  EXPECT_THROW(SessionManager(ds, fixed_manager({}, SystemAction::ReturnTopic), s), ValidationError);
}

TEST(Sessions, WrongResponseVariantIsRejected) {
  const Dataset ds = toy_dataset();
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnRequest), {});
  const auto id = sm.create({{"query_id", "q1"}})["session_id"].get<std::string>();
  EXPECT_THROW(sm.respond(id, {{"type", "yes_no"}, {"yes", true}}), ValidationError);
  EXPECT_THROW(sm.respond(id, {{"type", "provide_term"}}), ValidationError);
  EXPECT_EQ(sm.get(id)["turn"], 0);
}

TEST(Sessions, FailsAfterFourTurnsThenConflicts) {
  const Dataset ds = toy_dataset();
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnRequest), {});
  const auto id = sm.create({{"query_id", "q1"}})["session_id"].get<std::string>();
  json v;
  for (int i = 0; i < 4; ++i) v = sm.respond(id, {{"type", "provide_term"}, {"term", "zzz"}});
  EXPECT_EQ(v["status"], "failure");
  EXPECT_EQ(v["summary"]["outcome"], "failure");
  EXPECT_EQ(v["summary"]["turns"], 4);
  EXPECT_EQ(v["summary"]["map_trajectory"].size(), 5u);
  EXPECT_DOUBLE_EQ(v["summary"]["return"].get<double>(), -4.0);
  EXPECT_TRUE(v["prompt"].is_null());
  EXPECT_THROW(sm.respond(id, {{"type", "provide_term"}, {"term", "a"}}), ConflictError);
}

TEST(Sessions, TerminateEndsInFailure) {
  const Dataset ds = toy_dataset();
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnTopic), {});
  const auto id = sm.create({{"query_id", "q1"}})["session_id"].get<std::string>();
  EXPECT_EQ(sm.respond(id, {{"type", "terminate"}, {"success", false}})["status"], "failure");
}

TEST(Sessions, RelevantPicksReachSuccess) {
  const Dataset ds = make_synthetic_dataset(small_spec());
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnDocuments), sim_settings());
  int successes = 0;
  for (const auto& q : ds.queries) {
    json v = sm.create({{"query_id", q.id}});
    while (v["status"] == "active") v = sm.respond(v["session_id"], pick_relevant(ds, v));
    const auto traj = v["summary"]["map_trajectory"];
    ASSERT_EQ(traj.size(), v["turn"].get<std::size_t>() + 1);
    if (v["status"] == "success") {
      ++successes;
      EXPECT_GE(traj.back().get<double>(), 0.6);
    } else {
      EXPECT_EQ(v["turn"], 4);
      EXPECT_LT(traj.back().get<double>(), 0.6);
    }
  }
  EXPECT_GT(successes, 0);
}

TEST(Sessions, IdleSessionsAreAbandoned) {
  const Dataset ds = toy_dataset();
  FakeClock clock;
  SessionOptions o;
  o.idle_minutes = 30;
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnTopic), {}, o, clock.fn());
  const auto a = sm.create({{"query_id", "q1"}})["session_id"].get<std::string>();
  clock.advance_minutes(20);
  const auto b = sm.create({{"query_id", "q1"}})["session_id"].get<std::string>();
  clock.advance_minutes(15);
  EXPECT_EQ(sm.sweep(), 1u);
  EXPECT_EQ(sm.get(a)["status"], "abandoned");
  EXPECT_EQ(sm.get(a)["summary"]["outcome"], "abandoned");
  EXPECT_EQ(sm.get(b)["status"], "active");
  EXPECT_THROW(sm.respond(a, {{"type", "pick_topic"}, {"topic_id", "T1"}}), ConflictError);
  clock.advance_minutes(31);
  EXPECT_THROW(sm.respond(b, {{"type", "pick_topic"}, {"topic_id", "T1"}}), ConflictError);
  EXPECT_EQ(sm.sweep(), 0u);
}

TEST(Sessions, LogReplaysToTheSameMapTrajectory) {
  TempDir dir;
  const Dataset ds = make_synthetic_dataset(small_spec());
  SessionOptions o;
  o.log_path = dir.file("sessions.jsonl");
  const auto settings = sim_settings();
  std::map<std::string, json> final_views;
  {
    SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnDocuments), settings, o);
    for (std::size_t i = 0; i < 5; ++i) {
      json v = sm.create({{"query_id", ds.queries[i].id}});
      while (v["status"] == "active") v = sm.respond(v["session_id"], pick_relevant(ds, v));
      final_views[v["session_id"]] = v;
    }
  }
  const auto events = read_jsonl(o.log_path);
  std::size_t finals = 0;
  for (const auto& e : events) {
    ASSERT_TRUE(e["event"] == "create" || e["event"] == "respond");
    EXPECT_EQ(e["trace"]["phase"], "session");
    if (e["status"] == "active") continue;
    ++finals;
    const auto tr = trace_from_json(e["trace"]);
    const auto maps = replay_map_sequence(tr, ds, settings);
    const auto& traj = final_views.at(e["session_id"])["map_trajectory"];
    ASSERT_EQ(maps.size(), traj.size());
    for (std::size_t i = 0; i < maps.size(); ++i) EXPECT_EQ(maps[i], traj[i].get<double>());
  }
  EXPECT_EQ(finals, 5u);
}

TEST(Sessions, ConcurrentSessionsStayIndependent) {
  const Dataset ds = make_synthetic_dataset(small_spec());
  SessionManager sm(ds, fixed_manager({}, SystemAction::ReturnDocuments), sim_settings());
  std::vector<json> sequential;
  for (const auto& q : ds.queries) {
    json v = sm.create({{"query_id", q.id}});
    while (v["status"] == "active") v = sm.respond(v["session_id"], pick_relevant(ds, v));
    sequential.push_back(v["map_trajectory"]);
  }
  std::vector<json> parallel(ds.queries.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < ds.queries.size(); ++i)
    threads.emplace_back([&, i] {
      json v = sm.create({{"query_id", ds.queries[i].id}});
      while (v["status"] == "active") v = sm.respond(v["session_id"], pick_relevant(ds, v));
      parallel[i] = v["map_trajectory"];
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(parallel, sequential);
  EXPECT_EQ(sm.size(), 2 * ds.queries.size());
}

// ---------------------------------------------------------------------------
// Human evaluation

TEST(HumanEvalTasks, ServeTasksInOrderAndResume) {
  TempDir dir;
  const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  const auto tasks = make_tasks(ds, 3);
  ASSERT_EQ(tasks.size(), 3u);
  {
    HumanEval he(ds, tasks, 10, dir.file("h.jsonl"));
    EXPECT_EQ(he.task_count(), 3u);
    const json t = he.next_task("alice");
    EXPECT_EQ(t["done"], false);
    EXPECT_EQ(t["progress"]["answered"], 0);
    EXPECT_EQ(t["task"]["task_id"], "sc0000");
    EXPECT_EQ(t["task"]["candidates"].size(), 4u);
    EXPECT_EQ(t["task"]["utterance"], "Please view the list and select one item relevant to your need.");
    EXPECT_EQ(he.submit({{"subject", "alice"}, {"task_id", "sc0000"}, {"choice", 2}, {"token", "t0"}})["recorded"],
              true);
  }
  HumanEval he(ds, tasks, 10, dir.file("h.jsonl"));
  const json t = he.next_task("alice");
  EXPECT_EQ(t["progress"]["answered"], 1);
  EXPECT_EQ(t["task"]["task_id"], "sc0001");
  EXPECT_EQ(he.next_task("bob")["task"]["task_id"], "sc0000");
  he.submit({{"subject", "alice"}, {"task_id", "sc0001"}, {"choice", 0}});
  he.submit({{"subject", "alice"}, {"task_id", "sc0002"}, {"choice", 3}});
  EXPECT_EQ(he.next_task("alice")["done"], true);
  EXPECT_TRUE(he.next_task("alice")["task"].is_null());
}

TEST(HumanEvalTasks, SubmissionRules) {
  const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  HumanEval he(ds, make_tasks(ds, 2), 10);
  const json ok{{"subject", "s"}, {"task_id", "sc0000"}, {"choice", 1}, {"token", "abc"}};
  EXPECT_EQ(he.submit(ok)["recorded"], true);
  const json dup = he.submit(ok);
  EXPECT_EQ(dup["recorded"], false);
  EXPECT_EQ(dup["duplicate"], true);
  json other = ok;
  other["token"] = "xyz";
  other["choice"] = 2;
  EXPECT_THROW(he.submit(other), ConflictError);
  EXPECT_THROW(he.submit({{"subject", "s"}, {"task_id", "sc0001"}, {"choice", 5}}), ValidationError);
  EXPECT_THROW(he.submit({{"subject", "s"}, {"task_id", "sc0001"}, {"choice", -1}}), ValidationError);
  EXPECT_THROW(he.submit({{"subject", "s"}, {"task_id", "sc9999"}, {"choice", 0}}), NotFoundError);
  EXPECT_THROW(he.submit({{"subject", ""}, {"task_id", "sc0001"}, {"choice", 0}}), ValidationError);
  EXPECT_THROW(he.submit({{"subject", "s"}, {"task_id", "sc0001"}, {"choice", "0"}}), ValidationError);
  EXPECT_THROW(he.next_task(""), ValidationError);
  EXPECT_EQ(he.choices().size(), 1u);
}

TEST(HumanEvalTasks, PooledDistributionCountsEverySubmission) {
  TempDir dir;
  const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  const auto tasks = make_tasks(ds, 3);
  {
    HumanEval he(ds, tasks, 10, dir.file("h.jsonl"));
    EXPECT_TRUE(he.distribution_json()["distribution"].is_null());
    for (const char* s : {"a", "b"})
      for (int i = 0; i < 3; ++i) he.submit({{"subject", s}, {"task_id", tasks[i].id}, {"choice", i}});
  }
  HumanEval he(ds, tasks, 10, dir.file("h.jsonl"));
  const json d = he.distribution_json();
  EXPECT_EQ(d["submissions"], 6);
  EXPECT_EQ(d["subjects"], 2);
  EXPECT_EQ(d["distribution"]["samples"], 6);
  EXPECT_EQ(read_human_choices(dir.file("h.jsonl")).size(), 6u);
}

TEST(HumanEvalTasks, OnlyFourCandidateScenariosAndCap) {
  const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  auto tasks = make_tasks(ds, 4);
  tasks[1].candidates.pop_back();
  HumanEval he(ds, tasks, 2);
  EXPECT_EQ(he.task_count(), 2u);
  for (const auto& t : he.tasks()) EXPECT_EQ(t.candidates.size(), 4u);
}

TEST(HumanEvalTasks, UnknownTaskInChoiceFileIsRejected) {
  TempDir dir;
  const Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  std::ofstream(dir.file("h.jsonl")) << R"({"subject":"s","task_id":"zz","choice":1})" << "\n";
  EXPECT_THROW(HumanEval(ds, make_tasks(ds, 2), 10, dir.file("h.jsonl")), ValidationError);
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct Served {
  Dataset ds = make_synthetic_dataset(SyntheticSpec{});
  SessionManager sessions{ds, fixed_manager({}, SystemAction::ReturnDocuments), sim_settings()};
  HumanEval humaneval{ds, make_tasks(ds, 3), 10};
  HttpService service{ds, sessions, humaneval, json{{"name", "test"}}};
  int port = service.start_background();

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30);
    return c;
  }
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

httplib::Result post(httplib::Client& c, const std::string& path, const json& body) {
  return c.Post(path, body.dump(), "application/json");
}

}  // namespace

TEST(Http, SessionLifecycle) {
  Served s;
  auto c = s.client();
  auto r = post(c, "/api/v1/sessions", {{"query_id", s.ds.queries[0].id}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  EXPECT_EQ(r->get_header_value("Content-Type"), "application/json");
  json v = body_of(r);
  const auto id = v["session_id"].get<std::string>();
  r = c.Get("/api/v1/sessions/" + id);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(body_of(r)["session_id"], id);
  while (v["status"] == "active") {
    r = post(c, "/api/v1/sessions/" + id + "/respond", pick_relevant(s.ds, v));
    ASSERT_EQ(r->status, 200);
    v = body_of(r);
  }
  r = post(c, "/api/v1/sessions/" + id + "/respond", {{"type", "terminate"}, {"success", false}});
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(body_of(r)["error"]["type"], "conflict");
}

TEST(Http, ErrorStatuses) {
  Served s;
  auto c = s.client();
  EXPECT_EQ(c.Post("/api/v1/sessions", "{nope", "application/json")->status, 400);
  EXPECT_EQ(c.Post("/api/v1/sessions", "", "application/json")->status, 400);
  EXPECT_EQ(post(c, "/api/v1/sessions", {{"query_id", "missing"}})->status, 404);
  EXPECT_EQ(c.Get("/api/v1/sessions/unknown")->status, 404);
  EXPECT_EQ(post(c, "/api/v1/sessions/unknown/respond", {{"type", "terminate"}, {"success", false}})->status, 404);
  const auto id = body_of(post(c, "/api/v1/sessions", {{"query_id", s.ds.queries[0].id}}))["session_id"];
  auto r = post(c, "/api/v1/sessions/" + id.get<std::string>() + "/respond", {{"type", "yes_no"}, {"yes", true}});
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(body_of(r)["error"]["type"], "validation");
  r = c.Get("/api/v1/elsewhere");
  EXPECT_EQ(r->status, 404);
  EXPECT_TRUE(body_of(r).contains("error"));
}

TEST(Http, HumanEvalRoutes) {
  Served s;
  auto c = s.client();
  auto r = c.Get("/api/v1/humaneval/task?subject=ann");
  ASSERT_EQ(r->status, 200);
  const json task = body_of(r)["task"];
  const json choice{{"subject", "ann"}, {"task_id", task["task_id"]}, {"choice", 3}, {"token", "k1"}};
  EXPECT_EQ(body_of(post(c, "/api/v1/humaneval/choice", choice))["recorded"], true);
  EXPECT_EQ(body_of(post(c, "/api/v1/humaneval/choice", choice))["duplicate"], true);
  json changed = choice;
  changed["token"] = "k2";
  EXPECT_EQ(post(c, "/api/v1/humaneval/choice", changed)->status, 409);
  changed["choice"] = 9;
  EXPECT_EQ(post(c, "/api/v1/humaneval/choice", changed)->status, 400);
  EXPECT_EQ(c.Get("/api/v1/humaneval/task")->status, 400);
  const json d = body_of(c.Get("/api/v1/humaneval/distribution"));
  EXPECT_EQ(d["submissions"], 1);
  EXPECT_EQ(d["distribution"]["probabilities"][3], 1.0);
}

TEST(Http, ModelsAndQueries) {
  Served s;
  auto c = s.client();
  EXPECT_EQ(body_of(c.Get("/api/v1/models"))["name"], "test");
  const json q = body_of(c.Get("/api/v1/queries"));
  ASSERT_EQ(q.size(), s.ds.queries.size());
  EXPECT_EQ(q[0]["id"], s.ds.queries[0].id);
}

TEST(Http, ConcurrentClients) {
  Served s;
  std::vector<int> finished(8, 0);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&, i] {
      auto c = s.client();
      json v = body_of(post(c, "/api/v1/sessions", {{"query_id", s.ds.queries[static_cast<std::size_t>(i)].id}}));
      while (v["status"] == "active")
        v = body_of(post(c, "/api/v1/sessions/" + v["session_id"].get<std::string>() + "/respond",
                         pick_relevant(s.ds, v)));
      finished[static_cast<std::size_t>(i)] = v["summary"].is_object();
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(finished, std::vector<int>(8, 1));
  EXPECT_EQ(s.sessions.size(), 8u);
}

// ---------------------------------------------------------------------------
// Commands

TEST(Commands, GenTrainEvalCompare) {
  TempDir dir;
  RunConfig c = tiny_config();
  c.output_dir = dir.path().string();
  c.compare.min_relevant_in_top = 1;
  std::ostringstream out, log;
  EXPECT_EQ(cmd_gen(c, out), 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "data" / "corpus.jsonl"));
  EXPECT_EQ(cmd_train(c, out, log), 0);
  const auto trial = dir.path() / "trial_0";
  for (const char* f : {"learning_curve.tsv", "traces.jsonl", "manager.ckpt", "simulator_return_topic.ckpt"})
    EXPECT_TRUE(std::filesystem::exists(trial / f)) << f;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "config.json"));
  EXPECT_EQ(cmd_eval(c, out), 0);
  const json report = json::parse(std::ifstream(dir.path() / "eval_report.json"));
  EXPECT_FALSE(report.empty());
  EXPECT_EQ(cmd_compare(c, out), 0);
  const json cmp = json::parse(std::ifstream(dir.path() / "compare_report.json"));
  EXPECT_EQ(cmp["entropy"]["rule"], 0.0);
  EXPECT_TRUE(cmp["entropy"]["ours"].is_number());
  EXPECT_TRUE(cmp["entropy"]["human"].is_null());
  EXPECT_NE(out.str().find("n/a"), std::string::npos);
}

TEST(Commands, ExitCodes) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 1);
  EXPECT_EQ(exit_code_for(ParseError("f", 1, "x")), 2);
  EXPECT_EQ(exit_code_for(ValidationError("x")), 2);
  EXPECT_EQ(exit_code_for(NotFoundError("x")), 2);
  EXPECT_EQ(exit_code_for(NumericalError("x")), 3);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 3);
}

#ifdef ISCR_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ISCR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, ExitStatuses) {
  TempDir dir;
  const std::string out = "--set output_dir=" + dir.path().string();
  EXPECT_EQ(run_cli("init-config"), 0);
  EXPECT_EQ(run_cli("no-such-command"), 1);
  EXPECT_EQ(run_cli("train --set training.nosuch=1"), 1);
  EXPECT_EQ(run_cli("train -c " + dir.file("absent.json")), 1);
  EXPECT_EQ(run_cli("train " + out), 2);  // no corpus yet

  const std::string small = out + " synthetic.documents=80 synthetic.queries=12 synthetic.topics=4"
                                  " training.epochs=1 training.folds=3 training.updates_per_phase=3"
                                  " manager.hidden=[4] simulator.dqn.hidden=[4] manager.batch_size=2"
                                  " simulator.dqn.batch_size=2";
  EXPECT_EQ(run_cli("gen " + small), 0);
  EXPECT_EQ(run_cli("train " + small), 0);
  EXPECT_EQ(run_cli("eval " + small), 0);
  EXPECT_EQ(run_cli("eval " + small + " manager.hidden=[5]"), 2);  // checkpoint does not fit
}
#endif
