#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "erpo/config.hpp"

namespace erpo {

/// Per-prompt count of rollout steps whose group came back all-correct.
/// Counts only ever grow; each prompt may be updated at most once per step.
class HistoryTracker {
 public:
  HistoryTracker() = default;
  explicit HistoryTracker(int num_prompts);

  /// Adds the all-correct indicator for the current step. Throws
  /// UnknownPrompt or DuplicateUpdate.
  void update(int prompt_id, bool all_correct);
  /// Closes the current step.
  void advance() { ++step_; }

  std::uint64_t count(int prompt_id) const;
  int step() const { return step_; }
  int size() const { return static_cast<int>(counts_.size()); }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  /// Fraction of prompts with a positive count.
  double fraction_tracked() const;

  friend bool operator==(const HistoryTracker& a, const HistoryTracker& b) {
    return a.step_ == b.step_ && a.counts_ == b.counts_;
  }

 private:
  friend HistoryTracker read_tracker(std::istream& in, std::uint64_t* config_hash);

  std::vector<std::uint64_t> counts_;
  std::vector<int> last_update_;  // step of the most recent update, -1 if none
  int step_ = 0;
};

/// Value-returning form of `HistoryTracker::update`.
HistoryTracker update_history(HistoryTracker tracker, int prompt_id, bool all_correct);

/// min(T0 + Ts * count, Tmax).
inline double scheduled_temperature(double T0, double Ts, double Tmax, std::uint64_t count) {
  const double t = T0 + Ts * static_cast<double>(count);
  return t < Tmax ? t : Tmax;
}

double temperature_for(const HistoryTracker& tracker, int prompt_id, const TrainerConfig& cfg);

/// Header `# erpo-tracker v1 step=<t> prompts=<n> config=<hash>` followed by
/// one `prompt_id<TAB>count` line per prompt.
void write_tracker(const HistoryTracker& tracker, std::ostream& out, std::uint64_t config_hash);
/// Throws CorruptSnapshot naming the offending line.
HistoryTracker read_tracker(std::istream& in, std::uint64_t* config_hash = nullptr);

void snapshot(const HistoryTracker& tracker, const std::filesystem::path& path,
              std::uint64_t config_hash);
HistoryTracker restore(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace erpo
