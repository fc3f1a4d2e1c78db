#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "erpo/errors.hpp"
#include "erpo/evalreport.hpp"
#include "erpo/trainer.hpp"
#include "support.hpp"

using namespace erpo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

MetricsStream sample_stream(int steps) {
  MetricsStream s;
  for (int i = 1; i <= steps; ++i) {
    MetricsRecord r;
    r.step = i;
    r.mean_reward = 0.1 * i - 0.3333333333333333;
    r.residual_count = i % 5;
    r.avg_temperature = 1.0 + 0.001 * i;
    r.max_temperature = 1.0 + 0.02 * i;
    r.solve_rate = 1.0 / 3.0;
    s.entries.emplace_back(r);
    s.entries.emplace_back(MinibatchRecord{i, 0, 64, 130, 0.25, 0.1, 0.0, 32.0});
  }
  s.entries.emplace_back(EventRecord{steps, "skipped_update", "EmptyBatch: \"quoted\""});
  return s;
}

}  // namespace

TEST_SUITE("evalreport") {

TEST_CASE("mean at k examples") {
  CHECK(mean_at_k({true, false, true, true}) == 0.75);
  CHECK(mean_at_k({true, true}) == 1.0);
  CHECK(mean_at_k({false, false, false}) == 0.0);
  try {
    mean_at_k({});
    FAIL("expected EmptySample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptySample);
  }
}

TEST_CASE("maj at k examples") {
  const std::vector<std::string> votes{"a", "b", "a", "a"};
  CHECK(maj_at_k(votes, "a") == 1);
  const std::vector<std::string> tie{"a", "b"};
  CHECK(maj_at_k(tie, "b") == 0);
  CHECK(maj_at_k(tie, "a") == 1);
  const std::vector<std::string> tie_reversed{"b", "a"};
  CHECK(maj_at_k(tie_reversed, "a") == 1);
  const std::vector<std::string> same{"x", "x", "x"};
  CHECK(maj_at_k(same, "x") == 1);
  CHECK_THROWS_AS(maj_at_k(std::vector<std::string>{}, "a"), Error);
}

TEST_CASE("metrics agree with recounting") {
  auto rng = RandomStream::derive(1, StreamTag::Test);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(12));
    std::vector<bool> flags;
    std::vector<std::string> answers;
    const int alphabet = 1 + static_cast<int>(rng.below(4));
    for (int i = 0; i < k; ++i) {
      flags.push_back(rng.below(2) == 1);
      answers.push_back(std::to_string(rng.below(static_cast<std::uint64_t>(alphabet))));
    }
    const std::string truth = std::to_string(rng.below(static_cast<std::uint64_t>(alphabet)));
    CHECK(mean_at_k(flags) == oracle::fraction_true(flags));
    CHECK(maj_at_k(answers, truth) == oracle::majority(answers, truth));
  }
}

TEST_CASE("stream lines round trip") {
  const auto s = sample_stream(3);
  const auto text = stream_text(s);
  std::stringstream in(text);
  const auto back = read_stream(in);
  CHECK(stream_text(back) == text);
  CHECK(back.steps() == s.steps());
  CHECK(back.minibatches() == s.minibatches());
  CHECK(back.events() == s.events());
  CHECK(text.rfind("{\"type\":\"step\",\"step\":1,", 0) == 0);
  std::stringstream bad("{\"type\":\"step\"}\n");
  CHECK_THROWS_AS(read_stream(bad), Error);
}

TEST_CASE("report cardinality and determinism") {
  const auto dir = fs::temp_directory_path() / "erpo_report_test";
  fs::remove_all(dir);
  const RunMetadata meta{"dapo", 3, 0xabcULL};
  emit_report(sample_stream(20), meta, dir / "a");
  emit_report(sample_stream(20), meta, dir / "b");
  CHECK(count_lines(slurp(dir / "a" / "steps.jsonl")) == 20);
  CHECK(count_lines(slurp(dir / "a" / "summary.csv")) == 2);
  for (const char* f : {"steps.jsonl", "summary.csv", "series_avg_temperature.tsv",
                        "series_max_temperature.tsv", "series_residual_count.tsv",
                        "series_all_incorrect_count.tsv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(count_lines(slurp(dir / "a" / "series_max_temperature.tsv")) == 21);

  emit_report(MetricsStream{}, meta, dir / "empty");
  CHECK(count_lines(slurp(dir / "empty" / "summary.csv")) == 1);
  CHECK(slurp(dir / "empty" / "steps.jsonl").empty());
  CHECK(count_lines(slurp(dir / "empty" / "series_avg_temperature.tsv")) == 1);
  fs::remove_all(dir);
}

TEST_CASE("residual proportions count groups") {
  const auto tasks = make_taskset(4, 8, DifficultyMix{{1.0, 1.0}}, 6, 3);
  const auto policy = split_policy(tasks, 2);
  std::vector<int> ids(8);
  std::iota(ids.begin(), ids.end(), 0);
  const std::vector<double> temps{1.0};
  const auto rows = residual_proportions(policy, tasks, ids, temps, 8, 1, 1.0, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].all_correct_pct == 25.0);
  CHECK(rows[0].all_incorrect_pct == 75.0);
  CHECK(rows[0].groups == 8);
  CHECK_THROWS_AS(residual_proportions(policy, tasks, std::vector<int>{}, temps, 8, 1, 1.0, 1), Error);
}

TEST_CASE("uniform policy on hard prompts is never all-correct") {
  const auto tasks = make_taskset(5, 40, DifficultyMix{{0.0, 0.0, 1.0}}, 6, 4);
  const Policy uniform(tasks.size(), 6, 4);
  std::vector<int> ids(40);
  std::iota(ids.begin(), ids.end(), 0);
  const std::vector<double> temps{1.0, 1.2};
  for (const auto& row : residual_proportions(uniform, tasks, ids, temps, 8, 4, 1.0, 2)) {
    CHECK(row.all_correct_pct == 0.0);
    CHECK(row.all_correct_pct + row.all_incorrect_pct <= 100.0);
  }
}

TEST_CASE("higher temperature lowers the all-correct share of a trained policy") {
  int lower = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainerConfig cfg;
    cfg.seed = seed;
    cfg.n_prompts = 64;
    cfg.n_holdout = 0;
    cfg.prompt_batch = 16;
    cfg.minibatch = 32;
    cfg.steps = 80;
    cfg = validate_config(cfg);
    const auto tasks = make_taskset(cfg);
    const auto result = run(cfg, tasks);
    std::vector<int> ids(64);
    std::iota(ids.begin(), ids.end(), 0);
    const std::vector<double> temps{1.0, 1.2};
    const auto rows = residual_proportions(result.state.policy, tasks, ids, temps, 8, 16, 1.0, seed);
    lower += rows[1].all_correct_pct < rows[0].all_correct_pct ? 1 : 0;
    for (const auto& r : rows) {
      CHECK(r.all_correct_pct >= 0.0);
      CHECK(r.all_correct_pct + r.all_incorrect_pct <= 100.0);
    }
  }
  CHECK(lower == 5);
}

TEST_CASE("evaluation of a saturated policy") {
  const auto tasks = make_taskset(4, 8, DifficultyMix{{1.0, 1.0}}, 6, 3);
  const auto policy = split_policy(tasks, 8);
  std::vector<int> ids(8);
  std::iota(ids.begin(), ids.end(), 0);
  const auto res = evaluate(policy, tasks, ids, 32, 1.0, 0.7, 9);
  CHECK(res.mean_at_k == 1.0);
  CHECK(res.maj_at_k == 1.0);
  const auto none = evaluate(split_policy(tasks, 0), tasks, ids, 32, 1.0, 0.7, 9);
  CHECK(none.mean_at_k == 0.0);
  CHECK(none.maj_at_k == 0.0);
  CHECK(none.prompts == 8);
}

}
