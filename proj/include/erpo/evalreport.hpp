#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "erpo/env.hpp"
#include "erpo/policy.hpp"

namespace erpo {

/// One record per rollout step.
struct MetricsRecord {
  int step = 0;
  double mean_reward = 0.0;
  int prompts_rolled = 0;
  int residual_count = 0;       // all-correct groups this step
  int all_incorrect_count = 0;
  int kept_count = 0;           // groups contributing a nonzero signal source
  int reactivated_count = 0;
  // Scheduled temperatures over the whole training split, in effect for this
  // step (tracker state before the step's updates).
  double avg_temperature = 0.0;
  double max_temperature = 0.0;
  double batch_temperature = 0.0;  // mean temperature_used over this step's groups
  double clip_fraction = 0.0;
  double objective_value = 0.0;
  double solve_rate = 0.0;         // fraction of correct rollouts this step
  int updates = 0;
  int skipped_updates = 0;
  double tracked_fraction = 0.0;   // fraction of training prompts with H > 0

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

/// One record per gradient update.
struct MinibatchRecord {
  int step = 0;
  int index = 0;
  int samples = 0;
  long tokens = 0;
  double objective_value = 0.0;
  double clip_fraction = 0.0;
  double kl_value = 0.0;
  double learning_rate = 0.0;

  friend bool operator==(const MinibatchRecord&, const MinibatchRecord&) = default;
};

/// Out-of-band occurrences such as skipped updates.
struct EventRecord {
  int step = 0;
  std::string kind;
  std::string detail;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

using StreamEntry = std::variant<MetricsRecord, MinibatchRecord, EventRecord>;

struct MetricsStream {
  std::vector<StreamEntry> entries;

  std::vector<MetricsRecord> steps() const;
  std::vector<MinibatchRecord> minibatches() const;
  std::vector<EventRecord> events() const;
};

/// JSON object per line with a fixed field order.
std::string to_json_line(const StreamEntry& entry);
StreamEntry parse_json_line(std::string_view line);
void write_stream(const MetricsStream& stream, std::ostream& out);
MetricsStream read_stream(std::istream& in);
std::string stream_text(const MetricsStream& stream);

/// Fraction of true flags. Throws EmptySample for k = 0.
double mean_at_k(const std::vector<bool>& correct);
/// 1 iff the most frequent answer equals `truth`; ties go to the
/// lexicographically smallest answer. Throws EmptySample for k = 0.
int maj_at_k(std::span<const std::string> answers, std::string_view truth);

struct EvalResult {
  double mean_at_k = 0.0;  // averaged over prompts
  double maj_at_k = 0.0;
  int prompts = 0;
  int k = 0;
};

/// Samples k responses per prompt (stream (seed, Eval, prompt)) and scores them.
EvalResult evaluate(const Policy& policy, const TaskSet& tasks, std::span<const int> prompt_ids,
                    int k, double temperature, double top_p, std::uint64_t seed);

struct ResidualRow {
  double temperature = 1.0;
  double all_correct_pct = 0.0;
  double all_incorrect_pct = 0.0;
  int groups = 0;
};

/// For every temperature, draws `samples_per_prompt` groups of G responses
/// per prompt and reports the percentage of all-correct and all-incorrect
/// groups. The same random streams are reused across temperatures.
std::vector<ResidualRow> residual_proportions(const Policy& policy, const TaskSet& tasks,
                                              std::span<const int> prompt_ids,
                                              std::span<const double> temperatures, int group_size,
                                              int samples_per_prompt, double top_p,
                                              std::uint64_t seed);

struct RunMetadata {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

/// Writes steps.jsonl, summary.csv and the series_*.tsv files into
/// `out_dir`. Output bytes depend only on the inputs.
void emit_report(const MetricsStream& stream, const RunMetadata& meta,
                 const std::filesystem::path& out_dir);

}  // namespace erpo
