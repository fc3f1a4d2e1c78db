#include "erpo/advantage.hpp"

#include <fmt/format.h>

#include "erpo/errors.hpp"

namespace erpo {

AdvantageSet group_advantage(std::span<const double> rewards, int prompt_id) {
  if (rewards.size() < 2) {
    throw Error(ErrorKind::GroupTooSmall,
                fmt::format("group of size {} has no defined std", rewards.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> r(rewards.data(), static_cast<Eigen::Index>(rewards.size()));
  AdvantageSet out;
  out.prompt_id = prompt_id;
  out.advantages = standardize(r, &out.degenerate);
  return out;
}

AdvantageSet reactivated_advantage(std::span<const double> rewards, double reward_correct,
                                   double reward_incorrect, int prompt_id) {
  if (rewards.size() < 2) {
    throw Error(ErrorKind::GroupTooSmall,
                fmt::format("group of size {} has no defined std", rewards.size()));
  }
  if (!(reward_correct > reward_incorrect)) {
    throw Error(ErrorKind::InvalidArgument, "reward_correct must exceed reward_incorrect");
  }
  for (double r : rewards) {
    if (r != reward_correct) {
      throw Error(ErrorKind::NotAllCorrect,
                  fmt::format("reward {} differs from R+ = {}", r, reward_correct));
    }
  }
  const auto g = static_cast<Eigen::Index>(rewards.size());
  Eigen::VectorXd augmented(g + 1);
  augmented.head(g) = Eigen::Map<const Eigen::VectorXd>(rewards.data(), g);
  augmented(g) = reward_incorrect;

  AdvantageSet out;
  out.prompt_id = prompt_id;
  out.source = AdvantageSource::Reactivated;
  out.advantages = standardize(augmented).head(g);
  return out;
}

FilterResult dynamic_filter(std::vector<RolloutGroup> groups) {
  FilterResult out;
  for (auto& group : groups) {
    if (group.num_correct == group.size()) {
      ++out.removed_all_correct;
    } else if (group.num_correct == 0) {
      ++out.removed_all_incorrect;
    } else {
      out.kept.push_back(std::move(group));
    }
  }
  return out;
}

}  // namespace erpo
