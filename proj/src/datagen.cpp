#include "focal/datagen.hpp"

#include <cstdio>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "focal/serial.hpp"

namespace focal::datagen {

namespace {
using nlohmann::json;

Quality episode_tier(const BehaviorPolicy& policy, Rng& rng) {
  if (policy.quality != Quality::mixed) return policy.quality;
  switch (rng.uniform_int(3)) {
    case 0:
      return Quality::expert;
    case 1:
      return Quality::medium;
    default:
      return Quality::random;
  }
}

Eigen::Vector2d tier_action(const BehaviorPolicy& policy, Quality tier,
                            const envs::TaskSpec& task,
                            const envs::EnvState& state, Rng& rng) {
  if (tier == Quality::random) {
    return Eigen::Vector2d(
        rng.uniform(-envs::kActionBound, envs::kActionBound),
        rng.uniform(-envs::kActionBound, envs::kActionBound));
  }
  const double noise_std = tier == Quality::expert ? policy.expert_noise_std
                                                   : policy.medium_noise_std;
  const Eigen::Vector2d toward =
      envs::clip_action(policy.gain * (task.goal - state.position));
  return toward + noise_std * Eigen::Vector2d(rng.normal(), rng.normal());
}

}  // namespace

std::string to_string(Quality q) {
  switch (q) {
    case Quality::expert:
      return "expert";
    case Quality::medium:
      return "medium";
    case Quality::random:
      return "random";
    case Quality::mixed:
      return "mixed";
  }
  return "expert";
}

Quality quality_from_string(const std::string& s) {
  if (s == "expert") return Quality::expert;
  if (s == "medium") return Quality::medium;
  if (s == "random") return Quality::random;
  if (s == "mixed") return Quality::mixed;
  throw std::invalid_argument("unknown quality: " + s);
}

Eigen::Vector2d scripted_action(const BehaviorPolicy& policy,
                                const envs::TaskSpec& task,
                                const envs::EnvState& state, Rng& rng) {
  return tier_action(policy, policy.quality == Quality::mixed
                                 ? episode_tier(policy, rng)
                                 : policy.quality,
                     task, state, rng);
}

TaskDataset generate_dataset(const envs::TaskSpec& task,
                             const BehaviorPolicy& policy, int episodes,
                             std::uint64_t seed) {
  if (episodes < 1) {
    throw std::invalid_argument("generate_dataset: episodes must be >= 1");
  }
  const long total =
      static_cast<long>(episodes) * task.max_episode_length;
  if (total > kBufferCapacityPerTask) {
    throw std::invalid_argument(
        "generate_dataset: " + std::to_string(total) +
        " transitions exceed the per-task buffer capacity of " +
        std::to_string(kBufferCapacityPerTask));
  }
  TaskDataset out;
  out.task = task;
  out.quality = policy.quality;
  out.seed = seed;
  out.transitions.reserve(static_cast<std::size_t>(total));
  Rng rng(seed);
  for (int e = 0; e < episodes; ++e) {
    const Quality tier = episode_tier(policy, rng);
    envs::EnvState state = envs::reset(task);
    bool done = false;
    while (!done) {
      const Eigen::Vector2d raw = tier_action(policy, tier, task, state, rng);
      const Eigen::Vector2d executed = envs::clip_action(raw);
      const envs::StepResult r = envs::step(task, state, executed);
      out.transitions.push_back(envs::Transition{
          state.position, executed, r.state.position, r.reward});
      state = r.state;
      done = r.done;
    }
  }
  return out;
}

std::filesystem::path task_dir_name(int task_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "task_%03d", task_id);
  return buf;
}

void write_dataset(const TaskDataset& dataset,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["family"] = envs::to_string(dataset.task.family);
  manifest["task_id"] = dataset.task.task_id;
  manifest["goal"] = {dataset.task.goal.x(), dataset.task.goal.y()};
  manifest["wind"] = {dataset.task.wind.x(), dataset.task.wind.y()};
  manifest["goal_radius"] = dataset.task.goal_radius;
  manifest["max_episode_length"] = dataset.task.max_episode_length;
  manifest["quality"] = to_string(dataset.quality);
  manifest["seed"] = dataset.seed;
  manifest["transition_count"] = dataset.transitions.size();
  serial::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::string blob;
  blob.reserve(dataset.transitions.size() * 7 * 8);
  for (const auto& tr : dataset.transitions) {
    const double record[7] = {tr.state.x(),      tr.state.y(),
                              tr.action.x(),     tr.action.y(),
                              tr.next_state.x(), tr.next_state.y(),
                              tr.reward};
    serial::append_f64_le(blob, record);
  }
  serial::write_file(dir / "transitions.f64", blob);
}

TaskDataset read_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(serial::read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw std::runtime_error("dataset " + dir.string() +
                             ": manifest parse error: " + e.what());
  }

  TaskDataset out;
  out.task.family =
      envs::family_from_string(manifest.at("family").get<std::string>());
  out.task.task_id = manifest.at("task_id").get<int>();
  out.task.goal = Eigen::Vector2d(manifest.at("goal")[0].get<double>(),
                                  manifest.at("goal")[1].get<double>());
  out.task.wind = Eigen::Vector2d(manifest.at("wind")[0].get<double>(),
                                  manifest.at("wind")[1].get<double>());
  out.task.goal_radius = manifest.at("goal_radius").get<double>();
  out.task.max_episode_length = manifest.at("max_episode_length").get<int>();
  out.quality = quality_from_string(manifest.at("quality").get<std::string>());
  out.seed = manifest.at("seed").get<std::uint64_t>();

  // The directory name encodes the task id; a mismatch means the tree was
  // rearranged by hand.
  const std::string dir_name = dir.filename().string();
  const std::string expected = task_dir_name(out.task.task_id).string();
  if (dir_name.rfind("task_", 0) == 0 && dir_name != expected) {
    throw std::runtime_error("dataset " + dir.string() + ": directory name '" +
                             dir_name + "' does not match manifest task_id " +
                             std::to_string(out.task.task_id));
  }

  const std::string blob = serial::read_file(dir / "transitions.f64");
  const std::size_t count = manifest.at("transition_count").get<std::size_t>();
  if (blob.size() != count * 7 * 8) {
    throw std::runtime_error(
        "dataset " + dir.string() + ": transitions.f64 holds " +
        std::to_string(blob.size()) + " bytes but the manifest expects " +
        std::to_string(count * 7 * 8) + " (truncated or corrupt record)");
  }
  out.transitions.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto rec = serial::parse_f64_le(
        blob, 7, i * 7 * 8, "dataset " + dir.string() + " record " +
                                std::to_string(i));
    out.transitions.push_back(envs::Transition{
        Eigen::Vector2d(rec[0], rec[1]), Eigen::Vector2d(rec[2], rec[3]),
        Eigen::Vector2d(rec[4], rec[5]), rec[6]});
  }
  return out;
}

std::vector<double> episode_returns(const TaskDataset& dataset) {
  const int len = dataset.task.max_episode_length;
  std::vector<double> returns;
  double acc = 0.0;
  int in_episode = 0;
  for (const auto& tr : dataset.transitions) {
    acc += tr.reward;
    if (++in_episode == len) {
      returns.push_back(acc);
      acc = 0.0;
      in_episode = 0;
    }
  }
  return returns;
}

}  // namespace focal::datagen
