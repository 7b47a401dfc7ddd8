#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "mentoract/mentor.hpp"

using namespace mentoract;
using backend::Fixture;
using backend::ScriptedBackend;
using mentor::ConstructionError;
using mentor::Experience;
using mentor::LessonPool;
using mentor::Provenance;
using scheduler::Intensity;

namespace {

actor::Trajectory make_failed(const std::string& task,
                              const std::vector<std::string>& actions,
                              int trial = 1) {
  actor::Trajectory t;
  t.task_id = task;
  t.trial_index = trial;
  for (const auto& a : actions) {
    t.steps.push_back({actor::StepKind::ActionStep, a, "ok"});
    ++t.action_count;
  }
  t.failure = actor::FailureReason::GaveUp;
  return t;
}

ScriptedBackend backend_for(const std::string& task,
                            const std::vector<std::string>& responses) {
  Fixture fx;
  for (std::size_t i = 0; i < responses.size(); ++i)
    fx.add({task, static_cast<int>(i), responses[i]});
  return ScriptedBackend(std::move(fx));
}

std::string words(int n, const std::string& token = "word") {
  std::string out;
  for (int i = 0; i < n; ++i) out += (i ? " " : "") + token;
  return out;
}

Provenance mentor_prov(const std::string& task = "t", int trial = 1) {
  Provenance p;
  p.kind = Provenance::Kind::MentorSummarized;
  p.task_id = task;
  p.trial_index = trial;
  return p;
}

}  // namespace

TEST(SummarizeExperience, KeepsOnlyActionsFromTheTrajectory) {
  auto traj = make_failed("t", {"go to desk 1", "take book 1 from desk 1",
                                "go to garbagecan 1"});
  auto b = backend_for(
      "t", {"The first two steps were useful.\n```actions\ngo to desk 1\n"
            "take book 1 from desk 1\nfly to the moon 1\n```"});
  auto exp = mentor::summarize_experience("goal", traj, b);
  EXPECT_EQ(exp.retained_actions,
            (std::vector<std::string>{"go to desk 1", "take book 1 from desk 1"}));
  EXPECT_NE(exp.summary.find("useful"), std::string::npos);
}

TEST(SummarizeExperience, EmptyBlockAndEmptyTrajectoryAreLegal) {
  auto traj = make_failed("t", {"go to desk 1"});
  auto b = backend_for("t", {"Nothing here helped.\n```actions\n```"});
  EXPECT_TRUE(mentor::summarize_experience("goal", traj, b).retained_actions.empty());

  auto gave_up = make_failed("t2", {});
  auto b2 = backend_for("t2", {"The agent stopped immediately."});
  EXPECT_TRUE(mentor::summarize_experience("goal", gave_up, b2).retained_actions.empty());
}

TEST(LessonPool, DedupIsCaseAndPunctuationInsensitive) {
  LessonPool pool(10);
  auto first = pool.add("An object can only be heated at the microwave.", mentor_prov());
  EXPECT_TRUE(first.added);
  auto dup = pool.add("an object CAN only be heated, at the microwave!", mentor_prov());
  EXPECT_FALSE(dup.added);
  EXPECT_EQ(dup.lesson_id, first.lesson_id);
  EXPECT_EQ(pool.size(), 1);
}

TEST(LessonPool, EvictionPrefersUnreferencedOldest) {
  LessonPool pool(2);
  int l1 = pool.add("lesson one", mentor_prov()).lesson_id;
  int l2 = pool.add("lesson two", mentor_prov()).lesson_id;
  pool.at(0).reference_count = 1;  // l1 referenced

  auto third = pool.add("lesson three", mentor_prov());
  ASSERT_TRUE(third.added);
  ASSERT_TRUE(third.evicted.has_value());
  EXPECT_EQ(*third.evicted, l2);  // oldest with reference_count 0

  pool.at(1).reference_count = 2;  // now every lesson is referenced
  auto fourth = pool.add("lesson four", mentor_prov());
  ASSERT_TRUE(fourth.evicted.has_value());
  EXPECT_EQ(*fourth.evicted, l1);  // oldest overall

  // ids keep increasing, never reused
  EXPECT_GT(fourth.lesson_id, third.lesson_id);
  EXPECT_GT(third.lesson_id, l2);
}

TEST(MaintainLessonPool, AppendsDedupsAndSurvivesBackendFailure) {
  auto failed = make_failed("t", {"go to desk 1"});
  auto success = make_failed("t", {"go to shelf 1"}, 2);
  success.success = true;
  success.failure = actor::FailureReason::None;

  LessonPool pool(10);
  auto b = backend_for("t", {"an object can only be heated at the microwave"});
  auto updates = mentor::maintain_lesson_pool({{failed, success}}, pool, b);
  ASSERT_EQ(updates.size(), 1u);
  EXPECT_TRUE(updates[0].added);
  EXPECT_EQ(pool.size(), 1);

  auto b2 = backend_for("t", {"An object can only be heated at the microwave."});
  auto updates2 = mentor::maintain_lesson_pool({{failed, success}}, pool, b2);
  ASSERT_EQ(updates2.size(), 1u);
  EXPECT_FALSE(updates2[0].added);
  EXPECT_EQ(pool.size(), 1);

  auto empty = backend_for("t", {});  // underrun: maintenance is best-effort
  auto updates3 = mentor::maintain_lesson_pool({{failed, success}}, pool, empty);
  EXPECT_TRUE(updates3.empty());
  EXPECT_EQ(pool.size(), 1);
}

TEST(ExtractLesson, SelectsByIndexAndCountsReferences) {
  LessonPool pool(10);
  pool.add("open closed receptacles first", mentor_prov());
  pool.add("heat items with the microwave", mentor_prov());
  pool.add("carry one object at a time", mentor_prov());

  auto traj = make_failed("t", {"go to desk 1"});
  auto b = backend_for("t", {"2"});
  auto lesson = mentor::extract_lesson("goal", traj, pool, b);
  ASSERT_TRUE(lesson.has_value());
  EXPECT_EQ(lesson->text, "heat items with the microwave");
  EXPECT_EQ(pool.at(1).reference_count, 1);
}

TEST(ExtractLesson, EmptyPoolReturnsNothingWithoutCalling) {
  LessonPool pool(10);
  auto traj = make_failed("t", {"go to desk 1"});
  auto b = backend_for("t", {});
  EXPECT_FALSE(mentor::extract_lesson("goal", traj, pool, b).has_value());
  EXPECT_EQ(b.calls(), 0);
}

TEST(ExtractLesson, OutOfRangeGetsOneRepromptThenNothing) {
  LessonPool pool(10);
  pool.add("first", mentor_prov());
  pool.add("second", mentor_prov());
  pool.add("third", mentor_prov());
  auto traj = make_failed("t", {"go to desk 1"});

  auto b = backend_for("t", {"7", "1"});
  auto lesson = mentor::extract_lesson("goal", traj, pool, b);
  ASSERT_TRUE(lesson.has_value());
  EXPECT_EQ(lesson->text, "first");
  EXPECT_EQ(b.calls(), 2);

  auto b2 = backend_for("t", {"no idea", "lessons 1 and 2 both fit"});
  EXPECT_FALSE(mentor::extract_lesson("goal", traj, pool, b2).has_value());
  EXPECT_EQ(b2.calls(), 2);
}

TEST(ConstructPlan, SplitsActionsFromRationale) {
  auto traj = make_failed("t", {"go to desk 1"});
  Experience exp{"keep the opening", {"go to desk 1"}};
  auto b = backend_for(
      "t", {"The fix is to finish the delivery.\ngo to desk 1\n"
            "take book 1 from desk 1\nThen stop wasting steps.\n"
            "put book 1 in/on shelf 1"});
  auto plan = mentor::construct_plan("goal", traj, exp, std::nullopt, b);
  EXPECT_EQ(plan.actions,
            (std::vector<std::string>{"go to desk 1", "take book 1 from desk 1",
                                      "put book 1 in/on shelf 1"}));
  EXPECT_NE(plan.rationale.find("finish the delivery"), std::string::npos);
}

TEST(ConstructPlan, InadmissibleActionsAreStillAccepted) {
  // validity is checked at execution time, not construction time
  auto traj = make_failed("t", {"go to desk 1"});
  auto b = backend_for("t", {"heat lamp 1 with sofa 1"});
  auto plan = mentor::construct_plan("goal", traj, {}, std::nullopt, b);
  EXPECT_EQ(plan.actions, (std::vector<std::string>{"heat lamp 1 with sofa 1"}));
}

TEST(ConstructPlan, NoParseableActionRaisesWithPartialRecord) {
  auto traj = make_failed("t", {"go to desk 1"});
  auto b = backend_for("t", {"Just try harder next time."});
  try {
    mentor::construct_plan("goal", traj, {}, std::nullopt, b);
    FAIL() << "expected ConstructionError";
  } catch (const ConstructionError& e) {
    EXPECT_TRUE(e.partial.plan.actions.empty());
    EXPECT_EQ(e.partial.full_text, "Just try harder next time.");
    EXPECT_EQ(e.partial.task_id, "t");
  }
}

TEST(Reflect, SimpleSkipsLessonAndConcatenatesText) {
  auto traj = make_failed("t", {"go to desk 1"});
  LessonPool pool(10);
  pool.add("a lesson that must not be used", mentor_prov());
  auto b = backend_for("t", {"summary text here", "rationale\ngo to desk 1"});
  auto record = mentor::reflect(Intensity::Simple, "goal", traj, pool, b);
  EXPECT_EQ(record.intensity, Intensity::Simple);
  EXPECT_FALSE(record.lesson.has_value());
  EXPECT_EQ(b.calls(), 2);  // experience + construction only
  EXPECT_EQ(record.full_text, "summary text here\n\nrationale\ngo to desk 1");
  EXPECT_EQ(record.word_count, mentor::word_count(record.full_text));
}

TEST(Reflect, InDepthUsesThePool) {
  auto traj = make_failed("t", {"go to desk 1"});
  LessonPool pool(10);
  pool.add("open closed receptacles first", mentor_prov());
  auto b = backend_for("t", {"summary", "1", "fix\ngo to desk 1"});
  auto record = mentor::reflect(Intensity::InDepth, "goal", traj, pool, b);
  EXPECT_EQ(b.calls(), 3);
  ASSERT_TRUE(record.lesson.has_value());
  EXPECT_EQ(record.lesson->text, "open closed receptacles first");
  EXPECT_EQ(pool.at(0).reference_count, 1);
  EXPECT_NE(record.full_text.find("open closed receptacles first"),
            std::string::npos);
}

TEST(Reflect, InDepthWithEmptyPoolBehavesAsSimple) {
  auto traj = make_failed("t", {"go to desk 1"});
  LessonPool pool(10);
  auto b = backend_for("t", {"summary", "fix\ngo to desk 1"});
  auto record = mentor::reflect(Intensity::InDepth, "goal", traj, pool, b);
  EXPECT_EQ(record.intensity, Intensity::InDepth);
  EXPECT_FALSE(record.lesson.has_value());
  EXPECT_EQ(b.calls(), 2);
}

TEST(Reflect, WordCountSumsComponents) {
  auto traj = make_failed("t", {"go to desk 1"});
  LessonPool pool(10);
  // 120-word summary, 280-word construction (276 prose + one 4-word action)
  auto b = backend_for("t", {words(120), words(276) + "\ngo to desk 1"});
  auto record = mentor::reflect(Intensity::Simple, "goal", traj, pool, b);
  EXPECT_EQ(record.word_count, 400);
}

TEST(Reflect, AblationsDisableTheirModule) {
  auto traj = make_failed("t", {"go to desk 1"});
  LessonPool pool(10);
  pool.add("a lesson", mentor_prov());

  mentor::ReflectOptions no_experience;
  no_experience.use_experience = false;
  auto b = backend_for("t", {"1", "fix\ngo to desk 1"});
  auto record =
      mentor::reflect(Intensity::InDepth, "goal", traj, pool, b, no_experience);
  EXPECT_TRUE(record.experience.summary.empty());
  EXPECT_TRUE(record.experience.retained_actions.empty());
  ASSERT_TRUE(record.lesson.has_value());
  EXPECT_EQ(b.calls(), 2);  // extraction + construction

  mentor::ReflectOptions no_lesson;
  no_lesson.use_lesson = false;
  auto b2 = backend_for("t", {"summary", "fix\ngo to desk 1"});
  auto record2 =
      mentor::reflect(Intensity::InDepth, "goal", traj, pool, b2, no_lesson);
  EXPECT_FALSE(record2.lesson.has_value());
  EXPECT_EQ(b2.calls(), 2);  // experience + construction
}

TEST(Reflect, ConstructionFailurePropagatesWithPartialRecord) {
  auto traj = make_failed("t", {"go to desk 1"});
  LessonPool pool(10);
  auto b = backend_for("t", {"the useful summary", "no actions in here"});
  try {
    mentor::reflect(Intensity::Simple, "goal", traj, pool, b);
    FAIL() << "expected ConstructionError";
  } catch (const ConstructionError& e) {
    EXPECT_EQ(e.partial.experience.summary, "the useful summary");
    EXPECT_TRUE(e.partial.plan.actions.empty());
    EXPECT_NE(e.partial.full_text.find("no actions in here"), std::string::npos);
    EXPECT_GT(e.partial.word_count, 0);
  }
}

TEST(LessonPool, SaveLoadRoundTrip) {
  LessonPool pool(10);
  pool.add("first lesson", mentor_prov("task_a", 2));
  Provenance human;
  human.kind = Provenance::Kind::HumanInjected;
  pool.add("injected wisdom", human);
  pool.at(0).reference_count = 3;

  std::string path = std::string(testing::TempDir()) + "/pool_roundtrip.jsonl";
  pool.save(path);
  auto loaded = LessonPool::load(path, 10);
  ASSERT_EQ(loaded.size(), 2);
  EXPECT_EQ(loaded.at(0).text, "first lesson");
  EXPECT_EQ(loaded.at(0).reference_count, 3);
  EXPECT_EQ(loaded.at(0).provenance.task_id, "task_a");
  EXPECT_EQ(loaded.at(1).provenance.kind, Provenance::Kind::HumanInjected);

  // new ids continue past the loaded maximum
  auto next = loaded.add("a third lesson", mentor_prov());
  EXPECT_GT(next.lesson_id, loaded.at(1).id);
}
