#include "erpo/scheduler.hpp"

#include <algorithm>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "erpo/errors.hpp"

namespace erpo {

HistoryTracker::HistoryTracker(int num_prompts)
    : counts_(static_cast<std::size_t>(num_prompts), 0),
      last_update_(static_cast<std::size_t>(num_prompts), -1) {}

void HistoryTracker::update(int prompt_id, bool all_correct) {
  if (prompt_id < 0 || prompt_id >= size()) {
    throw Error(ErrorKind::UnknownPrompt, fmt::format("tracker has no prompt {}", prompt_id));
  }
  auto& last = last_update_[static_cast<std::size_t>(prompt_id)];
  if (last == step_) {
    throw Error(ErrorKind::DuplicateUpdate,
                fmt::format("prompt {} already updated at step {}", prompt_id, step_));
  }
  last = step_;
  if (all_correct) ++counts_[static_cast<std::size_t>(prompt_id)];
}

std::uint64_t HistoryTracker::count(int prompt_id) const {
  if (prompt_id < 0 || prompt_id >= size()) {
    throw Error(ErrorKind::UnknownPrompt, fmt::format("tracker has no prompt {}", prompt_id));
  }
  return counts_[static_cast<std::size_t>(prompt_id)];
}

double HistoryTracker::fraction_tracked() const {
  if (counts_.empty()) return 0.0;
  const auto seen = std::count_if(counts_.begin(), counts_.end(), [](auto c) { return c > 0; });
  return static_cast<double>(seen) / static_cast<double>(counts_.size());
}

HistoryTracker update_history(HistoryTracker tracker, int prompt_id, bool all_correct) {
  tracker.update(prompt_id, all_correct);
  return tracker;
}

double temperature_for(const HistoryTracker& tracker, int prompt_id, const TrainerConfig& cfg) {
  return scheduled_temperature(cfg.T0, cfg.Ts, cfg.Tmax, tracker.count(prompt_id));
}

void write_tracker(const HistoryTracker& tracker, std::ostream& out, std::uint64_t config_hash) {
  out << fmt::format("# erpo-tracker v1 step={} prompts={} config={:016x}\n", tracker.step(),
                     tracker.size(), config_hash);
  for (int id = 0; id < tracker.size(); ++id) out << fmt::format("{}\t{}\n", id, tracker.count(id));
}

HistoryTracker read_tracker(std::istream& in, std::uint64_t* config_hash) {
  auto corrupt = [](int line_no, std::string_view why) {
    return Error(ErrorKind::CorruptSnapshot, fmt::format("tracker line {}: {}", line_no, why));
  };
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line)) throw corrupt(line_no, "missing header");
  int step = 0;
  int prompts = 0;
  std::uint64_t hash = 0;
  if (std::sscanf(line.c_str(), "# erpo-tracker v1 step=%d prompts=%d config=%" SCNx64, &step,
                  &prompts, &hash) != 3 ||
      step < 0 || prompts < 0) {
    throw corrupt(line_no, "bad header");
  }
  HistoryTracker tracker(prompts);
  tracker.step_ = step;
  for (int id = 0; id < prompts; ++id) {
    ++line_no;
    if (!std::getline(in, line)) throw corrupt(line_no, "truncated snapshot");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw corrupt(line_no, "expected prompt_id<TAB>count");
    int parsed_id = -1;
    std::uint64_t count = 0;
    const char* begin = line.data();
    const char* end = line.data() + line.size();
    auto [p1, e1] = std::from_chars(begin, begin + tab, parsed_id);
    auto [p2, e2] = std::from_chars(begin + tab + 1, end, count);
    if (e1 != std::errc() || p1 != begin + tab || e2 != std::errc() || p2 != end) {
      throw corrupt(line_no, "unparsable record");
    }
    if (parsed_id != id) throw corrupt(line_no, fmt::format("expected prompt {}", id));
    tracker.counts_[static_cast<std::size_t>(id)] = count;
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) throw corrupt(line_no, "trailing data");
  }
  if (config_hash) *config_hash = hash;
  return tracker;
}

void snapshot(const HistoryTracker& tracker, const std::filesystem::path& path,
              std::uint64_t config_hash) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, fmt::format("cannot write '{}'", path.string()));
  write_tracker(tracker, out, config_hash);
}

HistoryTracker restore(const std::filesystem::path& path, std::uint64_t* config_hash) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, fmt::format("cannot open '{}'", path.string()));
  return read_tracker(in, config_hash);
}

}  // namespace erpo
