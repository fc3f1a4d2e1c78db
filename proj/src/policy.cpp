#include "erpo/policy.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "erpo/distribution.hpp"
#include "erpo/errors.hpp"

namespace erpo {

Policy::Policy(int num_prompts, int vocab_size, int L_max)
    : tables_(static_cast<std::size_t>(num_prompts), LogitTable::Zero(L_max, vocab_size)),
      vocab_size_(vocab_size),
      L_max_(L_max) {}

Policy Policy::random(int num_prompts, int vocab_size, int L_max, double scale, std::uint64_t seed) {
  Policy policy(num_prompts, vocab_size, L_max);
  if (scale == 0.0) return policy;
  for (int id = 0; id < num_prompts; ++id) {
    auto rng = RandomStream::derive(seed, StreamTag::Init, {static_cast<std::uint64_t>(id)});
    policy.tables_[static_cast<std::size_t>(id)] =
        LogitTable::NullaryExpr(L_max, vocab_size, [&] { return scale * rng.normal(); });
  }
  return policy;
}

const LogitTable& Policy::logits(int prompt_id) const {
  if (prompt_id < 0 || prompt_id >= num_prompts()) {
    throw Error(ErrorKind::UnknownPrompt, fmt::format("no logits for prompt {}", prompt_id));
  }
  return tables_[static_cast<std::size_t>(prompt_id)];
}

LogitTable& Policy::logits(int prompt_id) {
  return const_cast<LogitTable&>(std::as_const(*this).logits(prompt_id));
}

bool operator==(const Policy& a, const Policy& b) {
  if (a.vocab_size_ != b.vocab_size_ || a.L_max_ != b.L_max_ || a.tables_.size() != b.tables_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.tables_.size(); ++i) {
    if (a.tables_[i] != b.tables_[i]) return false;
  }
  return true;
}

Eigen::VectorXd token_distribution(const Policy& policy, int prompt_id, int position,
                                   double temperature, double top_p) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::NonpositiveTemperature,
                fmt::format("temperature must be positive, got {}", temperature));
  }
  const auto& table = policy.logits(prompt_id);
  return nucleus(tempered_softmax(table.row(position).transpose(), temperature), top_p);
}

namespace {

Token draw(const Eigen::VectorXd& probs, double u) {
  double cumulative = 0.0;
  Token last_supported = 0;
  for (Eigen::Index v = 0; v < probs.size(); ++v) {
    if (probs(v) <= 0.0) continue;
    cumulative += probs(v);
    last_supported = static_cast<Token>(v);
    if (u < cumulative) return last_supported;
  }
  return last_supported;  // u landed in the rounding gap above the total mass
}

Token argmax(const Eigen::VectorXd& logits) {
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<Token>(best);
}

}  // namespace

std::vector<Response> sample(const Policy& policy, int prompt_id, const SamplingParams& params,
                             int n, const RandomStream& stream) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, fmt::format("n must be >= 1, got {}", n));
  if (!params.greedy && !(params.temperature > 0.0)) {
    throw Error(ErrorKind::NonpositiveTemperature,
                fmt::format("temperature must be positive, got {}", params.temperature));
  }
  const auto& table = policy.logits(prompt_id);
  const double record_temp = params.record_at_sampling_temperature && !params.greedy
                                 ? params.temperature
                                 : 1.0;

  // Distributions depend only on the position, so compute them once.
  std::vector<Eigen::VectorXd> sampling(static_cast<std::size_t>(policy.L_max()));
  std::vector<Eigen::VectorXd> recording(static_cast<std::size_t>(policy.L_max()));
  for (int pos = 0; pos < policy.L_max(); ++pos) {
    const Eigen::VectorXd z = table.row(pos).transpose();
    if (!params.greedy) {
      sampling[static_cast<std::size_t>(pos)] =
          nucleus(tempered_softmax(z, params.temperature), params.top_p);
    }
    recording[static_cast<std::size_t>(pos)] = log_softmax(z, record_temp);
  }

  std::vector<Response> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto rng = stream.child(static_cast<std::uint64_t>(i));
    Response& r = out[static_cast<std::size_t>(i)];
    for (int pos = 0; pos < policy.L_max(); ++pos) {
      const auto p = static_cast<std::size_t>(pos);
      const Token tok = params.greedy ? argmax(table.row(pos).transpose())
                                      : draw(sampling[p], rng.uniform());
      const double lp = recording[p](tok);
      r.tokens.push_back(tok);
      r.token_logprobs_old.push_back(lp);
      r.logprob_old += lp;
      if (tok == policy.stop_token()) break;
    }
  }
  return out;
}

double sequence_log_prob(const Policy& policy, int prompt_id, std::span<const Token> tokens,
                         double temperature) {
  const auto& table = policy.logits(prompt_id);
  double total = 0.0;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const auto row = static_cast<Eigen::Index>(pos);
    total += log_softmax(Eigen::VectorXd(table.row(row).transpose()), temperature)(tokens[pos]);
  }
  return total;
}

LogitTable logprob_grad(const Policy& policy, int prompt_id, std::span<const Token> tokens,
                        double temperature) {
  const auto& table = policy.logits(prompt_id);
  LogitTable grad = LogitTable::Zero(table.rows(), table.cols());
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    const auto row = static_cast<Eigen::Index>(pos);
    grad.row(row) = -tempered_softmax(Eigen::VectorXd(table.row(row).transpose()), temperature)
                         .transpose();
    grad(row, tokens[pos]) += 1.0;
    grad.row(row) /= temperature;
  }
  return grad;
}

void write_policy(const Policy& policy, std::ostream& out) {
  out << fmt::format("# erpo-policy v1 prompts={} vocab_size={} L_max={}\n", policy.num_prompts(),
                     policy.vocab_size(), policy.L_max());
  for (int id = 0; id < policy.num_prompts(); ++id) {
    const auto& table = policy.logits(id);
    for (Eigen::Index pos = 0; pos < table.rows(); ++pos) {
      out << id << '\t' << pos;
      for (Eigen::Index v = 0; v < table.cols(); ++v) out << fmt::format("\t{}", table(pos, v));
      out << '\n';
    }
  }
}

Policy read_policy(std::istream& in) {
  auto corrupt = [](long line_no, std::string_view why) {
    return Error(ErrorKind::CorruptSnapshot, fmt::format("policy line {}: {}", line_no, why));
  };
  std::string line;
  long line_no = 1;
  if (!std::getline(in, line)) throw corrupt(line_no, "missing header");
  int prompts = 0;
  int vocab = 0;
  int length = 0;
  if (std::sscanf(line.c_str(), "# erpo-policy v1 prompts=%d vocab_size=%d L_max=%d", &prompts,
                  &vocab, &length) != 3 ||
      prompts < 0 || vocab < 1 || length < 1) {
    throw corrupt(line_no, "bad header");
  }
  Policy policy(prompts, vocab, length);
  const long expected = static_cast<long>(prompts) * length;
  for (long row = 0; row < expected; ++row) {
    ++line_no;
    if (!std::getline(in, line)) throw corrupt(line_no, "truncated policy");
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    auto next_field = [&](auto& value) {
      while (cur < end && *cur == '\t') ++cur;
      auto [ptr, ec] = std::from_chars(cur, end, value);
      if (ec != std::errc()) throw corrupt(line_no, "unparsable field");
      cur = ptr;
    };
    int id = 0;
    int pos = 0;
    next_field(id);
    next_field(pos);
    if (id != row / length || pos != row % length) throw corrupt(line_no, "rows out of order");
    auto& table = policy.logits(id);
    for (int v = 0; v < vocab; ++v) next_field(table(pos, v));
    if (cur != end) throw corrupt(line_no, "trailing data");
  }
  return policy;
}

}  // namespace erpo
