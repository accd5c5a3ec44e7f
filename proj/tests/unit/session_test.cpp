#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <future>
#include <thread>

#include "psyprobe/session.hpp"
#include "test_support.hpp"

using namespace psyprobe;
using namespace psyprobe::testing;

namespace {

struct FakeClock {
  std::shared_ptr<std::chrono::system_clock::time_point> now =
      std::make_shared<std::chrono::system_clock::time_point>(std::chrono::sys_days{std::chrono::year{2025} / 1 / 1});
  WallClock fn() const {
    return [n = now] { return *n; };
  }
  void advance(std::chrono::seconds s) const { *now += s; }
};

std::filesystem::path fresh_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("psyprobe_" + name);
  std::filesystem::remove_all(d);
  return d;
}

ServiceOptions options(const std::string& name, const FakeClock& clock) {
  ServiceOptions o = default_service_options(asset_dir());
  o.data_dir = fresh_dir(name);
  o.clock = clock.fn();
  o.defaults.language = "en";
  return o;
}

SessionConfig config(SessionMode mode = SessionMode::Full) {
  SessionConfig c;
  c.mode = mode;
  c.language = "en";
  c.time_limit = std::chrono::seconds(60);
  return c;
}

}  // namespace

TEST(Session, CreatePostStateEnd) {
  FakeClock clock;
  SessionManager m(options("basic", clock));
  const std::string id = m.create_session(config(), "I keep failing exams.", "anxious");
  EXPECT_EQ(id.size(), 16u);
  const std::string reply = m.post_message(id, "I failed again yesterday and I can't sleep.");
  EXPECT_FALSE(reply.empty());
  m.post_message(id, "My friend helps but I avoid her.");

  const Json state = m.get_state(id);
  EXPECT_EQ(state.at("turn_index"), 2);
  EXPECT_EQ(state.at("mode"), "full");
  EXPECT_EQ(state.at("ranking").size(), 6u);
  EXPECT_FALSE(state.at("closed").get<bool>());

  const auto t = m.end_session(id);
  ASSERT_EQ(t.size(), 4u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i].speaker, i % 2 == 0 ? "user" : "agent");
  EXPECT_EQ(t[0].stage_artifacts.at("session").at("concern"), "I keep failing exams.");
  EXPECT_TRUE(t[1].memory_snapshot.is_object());
  EXPECT_TRUE(m.is_closed(id));
  EXPECT_THROW(m.post_message(id, "hello"), SessionClosed);

  const auto path = m.options().data_dir / (id + ".jsonl");
  EXPECT_EQ(read_transcript(path), t);
}

TEST(Session, TimeLimitClosesSession) {
  FakeClock clock;
  SessionManager m(options("time", clock));
  const std::string id = m.create_session(config(), "Work stress.", "tired");
  m.post_message(id, "Work is too much.");
  clock.advance(std::chrono::seconds(30));
  EXPECT_NEAR(m.get_state(id).at("remaining_s").get<double>(), 30.0, 1e-9);
  clock.advance(std::chrono::seconds(30));
  EXPECT_THROW(m.post_message(id, "Still here."), TimeLimitExceeded);
  EXPECT_TRUE(m.is_closed(id));
  EXPECT_EQ(m.transcript(id).size(), 2u);
}

TEST(Session, InputValidation) {
  FakeClock clock;
  SessionManager m(options("validation", clock));
  EXPECT_THROW(m.create_session(config(), "   ", "sad"), InvalidConfig);
  EXPECT_THROW(m.post_message("nope", "hi"), UnknownSession);
  EXPECT_THROW(m.get_state("nope"), UnknownSession);
  const std::string id = m.create_session(config(), "Concern.", "sad");
  EXPECT_THROW(m.post_message(id, " "), PreconditionViolation);
  EXPECT_EQ(m.get_state(id).at("turn_index"), 0);
}

TEST(Session, FailedTurnLeavesNoTrace) {
  FakeClock clock;
  auto o = options("failure", clock);
  auto fail = std::make_shared<std::atomic<bool>>(false);
  o.backends = [fail](const GatewayConfig&) -> std::shared_ptr<Backend> {
    auto mock = shared_mock();
    return std::make_shared<FunctionBackend>([mock, fail](const BackendRequest& r) {
      if (*fail && r.kind == PromptKind::Critic) throw BackendUnavailable("down");
      return mock->generate(r);
    });
  };
  SessionManager m(o);
  const std::string id = m.create_session(config(), "Exams.", "sad");
  m.post_message(id, "I failed the exam.");
  const Json before = m.get_state(id);
  *fail = true;
  EXPECT_THROW(m.post_message(id, "It keeps happening."), StageError);
  EXPECT_EQ(m.get_state(id), before);
  EXPECT_EQ(m.transcript(id).size(), 2u);
  EXPECT_EQ(read_transcript(o.data_dir / (id + ".jsonl")).size(), 2u);
  *fail = false;
  m.post_message(id, "It keeps happening.");
  EXPECT_EQ(m.transcript(id).size(), 4u);
}

TEST(Session, ConcurrentTurnIsBusy) {
  FakeClock clock;
  auto o = options("busy", clock);
  auto gate = std::make_shared<std::promise<void>>();
  auto entered = std::make_shared<std::promise<void>>();
  auto released = std::make_shared<std::atomic<bool>>(false);
  o.backends = [=](const GatewayConfig&) -> std::shared_ptr<Backend> {
    auto fut = std::make_shared<std::shared_future<void>>(gate->get_future().share());
    auto mock = shared_mock();
    return std::make_shared<FunctionBackend>([=](const BackendRequest& r) {
      if (!released->exchange(true)) {
        entered->set_value();
        fut->wait();
      }
      return mock->generate(r);
    });
  };
  SessionManager m(o);
  const std::string id = m.create_session(config(SessionMode::Baseline), "Lonely.", "sad");
  auto first = std::async(std::launch::async, [&] { return m.post_message(id, "I feel alone."); });
  entered->get_future().wait();
  EXPECT_THROW(m.post_message(id, "Hello?"), SessionBusy);
  EXPECT_NO_THROW(m.get_state(id));
  gate->set_value();
  EXPECT_FALSE(first.get().empty());
}

TEST(Session, BaselineStateHasNoRanking) {
  FakeClock clock;
  SessionManager m(options("baseline", clock));
  const std::string id = m.create_session(config(SessionMode::Baseline), "Lonely.", "sad");
  m.post_message(id, "I feel alone.");
  const Json s = m.get_state(id);
  EXPECT_TRUE(s.at("ranking").is_null());
  EXPECT_EQ(s.at("turn_index"), 1);
}

TEST(Transcript, JsonlRoundTripAndValidation) {
  const std::vector<TurnEntry> entries = {{"user", "hi", Json(nullptr), Json(nullptr), "t0"},
                                          {"agent", "hello", Json{{"a", 1}}, Json{{"turn_index", 1}}, "t1"}};
  EXPECT_EQ(parse_jsonl(to_jsonl(entries)), entries);
  EXPECT_THROW(parse_jsonl("{\"speaker\":\"robot\",\"text\":\"x\",\"timestamp\":\"\"}\n"), SchemaViolation);
  EXPECT_THROW(parse_jsonl("not json\n"), SchemaViolation);
}

TEST(SessionConfig, ParsesAndValidates) {
  const auto c = session_config_from_json(Json{{"mode", "wo_qic"}, {"language", "en"}, {"time_limit_s", 90}});
  EXPECT_EQ(c.mode, SessionMode::WoQIC);
  EXPECT_EQ(c.time_limit, std::chrono::seconds(90));
  EXPECT_THROW(session_config_from_json(Json{{"mode", "bogus"}}), InvalidConfig);
  EXPECT_THROW(session_config_from_json(Json{{"time_limit_s", 0}}), InvalidConfig);
  EXPECT_EQ(session_config_from_json(to_json(c)).mode, c.mode);
}

TEST(SessionConfig, ShippedDefaultConfigLoads) {
  ServiceOptions o = default_service_options(asset_dir());
  apply_config(o, read_json_file(test_dir().parent_path() / "config" / "default.json"));
  EXPECT_EQ(o.defaults.mode, SessionMode::Full);
  EXPECT_EQ(o.defaults.time_limit, std::chrono::minutes(20));
}
