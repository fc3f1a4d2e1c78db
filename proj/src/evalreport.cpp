#include "erpo/evalreport.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "erpo/errors.hpp"

namespace erpo {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

template <typename Record>
std::vector<Record> collect(const std::vector<StreamEntry>& entries) {
  std::vector<Record> out;
  for (const auto& e : entries) {
    if (const auto* r = std::get_if<Record>(&e)) out.push_back(*r);
  }
  return out;
}

json to_json(const MetricsRecord& r) {
  return json{{"type", "step"},
              {"step", r.step},
              {"mean_reward", r.mean_reward},
              {"prompts_rolled", r.prompts_rolled},
              {"residual_count", r.residual_count},
              {"all_incorrect_count", r.all_incorrect_count},
              {"kept_count", r.kept_count},
              {"reactivated_count", r.reactivated_count},
              {"avg_temperature", r.avg_temperature},
              {"max_temperature", r.max_temperature},
              {"batch_temperature", r.batch_temperature},
              {"clip_fraction", r.clip_fraction},
              {"objective_value", r.objective_value},
              {"solve_rate", r.solve_rate},
              {"updates", r.updates},
              {"skipped_updates", r.skipped_updates},
              {"tracked_fraction", r.tracked_fraction}};
}

json to_json(const MinibatchRecord& r) {
  return json{{"type", "minibatch"},          {"step", r.step},
              {"index", r.index},             {"samples", r.samples},
              {"tokens", r.tokens},           {"objective_value", r.objective_value},
              {"clip_fraction", r.clip_fraction}, {"kl_value", r.kl_value},
              {"learning_rate", r.learning_rate}};
}

json to_json(const EventRecord& r) {
  return json{{"type", "event"}, {"step", r.step}, {"kind", r.kind}, {"detail", r.detail}};
}

}  // namespace

std::vector<MetricsRecord> MetricsStream::steps() const { return collect<MetricsRecord>(entries); }
std::vector<MinibatchRecord> MetricsStream::minibatches() const {
  return collect<MinibatchRecord>(entries);
}
std::vector<EventRecord> MetricsStream::events() const { return collect<EventRecord>(entries); }

std::string to_json_line(const StreamEntry& entry) {
  return std::visit([](const auto& r) { return to_json(r).dump(); }, entry);
}

StreamEntry parse_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "step") {
      MetricsRecord r;
      j.at("step").get_to(r.step);
      j.at("mean_reward").get_to(r.mean_reward);
      j.at("prompts_rolled").get_to(r.prompts_rolled);
      j.at("residual_count").get_to(r.residual_count);
      j.at("all_incorrect_count").get_to(r.all_incorrect_count);
      j.at("kept_count").get_to(r.kept_count);
      j.at("reactivated_count").get_to(r.reactivated_count);
      j.at("avg_temperature").get_to(r.avg_temperature);
      j.at("max_temperature").get_to(r.max_temperature);
      j.at("batch_temperature").get_to(r.batch_temperature);
      j.at("clip_fraction").get_to(r.clip_fraction);
      j.at("objective_value").get_to(r.objective_value);
      j.at("solve_rate").get_to(r.solve_rate);
      j.at("updates").get_to(r.updates);
      j.at("skipped_updates").get_to(r.skipped_updates);
      j.at("tracked_fraction").get_to(r.tracked_fraction);
      return r;
    }
    if (type == "minibatch") {
      MinibatchRecord r;
      j.at("step").get_to(r.step);
      j.at("index").get_to(r.index);
      j.at("samples").get_to(r.samples);
      j.at("tokens").get_to(r.tokens);
      j.at("objective_value").get_to(r.objective_value);
      j.at("clip_fraction").get_to(r.clip_fraction);
      j.at("kl_value").get_to(r.kl_value);
      j.at("learning_rate").get_to(r.learning_rate);
      return r;
    }
    if (type == "event") {
      EventRecord r;
      j.at("step").get_to(r.step);
      j.at("kind").get_to(r.kind);
      j.at("detail").get_to(r.detail);
      return r;
    }
    throw Error(ErrorKind::CorruptSnapshot, fmt::format("unknown record type '{}'", type));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::CorruptSnapshot, e.what());
  }
}

void write_stream(const MetricsStream& stream, std::ostream& out) {
  for (const auto& e : stream.entries) out << to_json_line(e) << '\n';
}

MetricsStream read_stream(std::istream& in) {
  MetricsStream stream;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      stream.entries.push_back(parse_json_line(line));
    } catch (const Error& e) {
      throw Error(ErrorKind::CorruptSnapshot, fmt::format("stream line {}: {}", line_no, e.what()));
    }
  }
  return stream;
}

std::string stream_text(const MetricsStream& stream) {
  std::ostringstream out;
  write_stream(stream, out);
  return out.str();
}

double mean_at_k(const std::vector<bool>& correct) {
  if (correct.empty()) throw Error(ErrorKind::EmptySample, "mean@k needs k >= 1");
  const auto hits = std::count(correct.begin(), correct.end(), true);
  return static_cast<double>(hits) / static_cast<double>(correct.size());
}

int maj_at_k(std::span<const std::string> answers, std::string_view truth) {
  if (answers.empty()) throw Error(ErrorKind::EmptySample, "maj@k needs k >= 1");
  std::map<std::string_view, int> votes;
  for (const auto& a : answers) ++votes[a];
  // Ordered map: the first entry reaching the top count is the smallest.
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first == truth ? 1 : 0;
}

EvalResult evaluate(const Policy& policy, const TaskSet& tasks, std::span<const int> prompt_ids,
                    int k, double temperature, double top_p, std::uint64_t seed) {
  EvalResult out;
  out.k = k;
  out.prompts = static_cast<int>(prompt_ids.size());
  if (prompt_ids.empty()) return out;
  SamplingParams params{temperature, top_p, false, false};
  double mean_sum = 0.0;
  double maj_sum = 0.0;
  for (int id : prompt_ids) {
    const auto stream = RandomStream::derive(seed, StreamTag::Eval, {static_cast<std::uint64_t>(id)});
    const auto responses = sample(policy, id, params, k, stream);
    const Prompt& prompt = tasks.at(id);
    std::vector<bool> flags;
    std::vector<std::string> answers;
    for (const auto& r : responses) {
      flags.push_back(verify(prompt, r, tasks.vocab_size));
      answers.push_back(canonical_answer(prompt, r.tokens, tasks.vocab_size));
    }
    mean_sum += mean_at_k(flags);
    maj_sum += maj_at_k(answers, ground_truth(prompt));
  }
  out.mean_at_k = mean_sum / static_cast<double>(prompt_ids.size());
  out.maj_at_k = maj_sum / static_cast<double>(prompt_ids.size());
  return out;
}

std::vector<ResidualRow> residual_proportions(const Policy& policy, const TaskSet& tasks,
                                              std::span<const int> prompt_ids,
                                              std::span<const double> temperatures, int group_size,
                                              int samples_per_prompt, double top_p,
                                              std::uint64_t seed) {
  if (prompt_ids.empty()) throw Error(ErrorKind::EmptySample, "residual sweep needs prompts");
  std::vector<ResidualRow> rows;
  for (double temperature : temperatures) {
    SamplingParams params{temperature, top_p, false, false};
    long all_correct = 0;
    long all_incorrect = 0;
    long groups = 0;
    for (int id : prompt_ids) {
      const Prompt& prompt = tasks.at(id);
      for (int s = 0; s < samples_per_prompt; ++s) {
        const auto stream = RandomStream::derive(
            seed, StreamTag::Sweep, {static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(s)});
        int correct = 0;
        for (const auto& r : sample(policy, id, params, group_size, stream)) {
          correct += verify(prompt, r, tasks.vocab_size) ? 1 : 0;
        }
        all_correct += correct == group_size ? 1 : 0;
        all_incorrect += correct == 0 ? 1 : 0;
        ++groups;
      }
    }
    rows.push_back(ResidualRow{temperature, 100.0 * static_cast<double>(all_correct) / groups,
                               100.0 * static_cast<double>(all_incorrect) / groups,
                               static_cast<int>(groups)});
  }
  return rows;
}

namespace {

void write_series(const fs::path& path, const std::vector<MetricsRecord>& steps,
                  double MetricsRecord::*field) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, fmt::format("cannot write '{}'", path.string()));
  out << "step\tvalue\n";
  for (const auto& r : steps) out << fmt::format("{}\t{}\n", r.step, r.*field);
}

void write_series(const fs::path& path, const std::vector<MetricsRecord>& steps,
                  int MetricsRecord::*field) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoFailure, fmt::format("cannot write '{}'", path.string()));
  out << "step\tvalue\n";
  for (const auto& r : steps) out << fmt::format("{}\t{}\n", r.step, r.*field);
}

}  // namespace

void emit_report(const MetricsStream& stream, const RunMetadata& meta, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, fmt::format("cannot create '{}'", out_dir.string()));
  const auto steps = stream.steps();

  {
    std::ofstream out(out_dir / "steps.jsonl");
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write steps.jsonl");
    for (const auto& r : steps) out << to_json_line(r) << '\n';
  }
  {
    std::ofstream out(out_dir / "summary.csv");
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write summary.csv");
    out << "algorithm,seed,config_hash,steps,final_mean_reward,final_solve_rate,total_residual,"
           "residual_last_half,total_all_incorrect,final_avg_temperature,final_max_temperature,"
           "mean_clip_fraction,skipped_updates,final_tracked_fraction\n";
    if (!steps.empty()) {
      long total_residual = 0;
      long last_half = 0;
      long total_incorrect = 0;
      long skipped = 0;
      double clip_sum = 0.0;
      const std::size_t half = steps.size() / 2;
      for (std::size_t i = 0; i < steps.size(); ++i) {
        total_residual += steps[i].residual_count;
        if (i >= half) last_half += steps[i].residual_count;
        total_incorrect += steps[i].all_incorrect_count;
        skipped += steps[i].skipped_updates;
        clip_sum += steps[i].clip_fraction;
      }
      const auto& last = steps.back();
      out << fmt::format("{},{},{:016x},{},{},{},{},{},{},{},{},{},{},{}\n", meta.algorithm,
                         meta.seed, meta.config_hash, steps.size(), last.mean_reward,
                         last.solve_rate, total_residual, last_half, total_incorrect,
                         last.avg_temperature, last.max_temperature,
                         clip_sum / static_cast<double>(steps.size()), skipped,
                         last.tracked_fraction);
    }
  }
  write_series(out_dir / "series_avg_temperature.tsv", steps, &MetricsRecord::avg_temperature);
  write_series(out_dir / "series_max_temperature.tsv", steps, &MetricsRecord::max_temperature);
  write_series(out_dir / "series_residual_count.tsv", steps, &MetricsRecord::residual_count);
  write_series(out_dir / "series_all_incorrect_count.tsv", steps,
               &MetricsRecord::all_incorrect_count);
}

}  // namespace erpo
