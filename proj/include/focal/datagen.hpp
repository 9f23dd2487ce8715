#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "focal/envs.hpp"
#include "focal/rng.hpp"

namespace focal::datagen {

inline constexpr int kBufferCapacityPerTask = 10000;
inline constexpr double kExpertGain = 1.0;
inline constexpr double kExpertNoiseStd = 0.02;
inline constexpr double kMediumNoiseStd = 0.08;

enum class Quality { expert, medium, random, mixed };

std::string to_string(Quality q);
Quality quality_from_string(const std::string& s);

// Scripted stand-in for a logged behavior policy: a proportional controller
// toward the goal with a per-quality noise tier. "random" ignores the goal;
// "mixed" picks one of the three tiers per episode.
struct BehaviorPolicy {
  Quality quality = Quality::expert;
  double gain = kExpertGain;
  double expert_noise_std = kExpertNoiseStd;
  double medium_noise_std = kMediumNoiseStd;
};

// The action the policy would take; noise comes from rng. For mixed quality,
// pass the tier chosen for the episode via episode_quality.
Eigen::Vector2d scripted_action(const BehaviorPolicy& policy,
                                const envs::TaskSpec& task,
                                const envs::EnvState& state, Rng& rng);

struct TaskDataset {
  envs::TaskSpec task;
  std::vector<envs::Transition> transitions;
  Quality quality = Quality::expert;
  std::uint64_t seed = 0;
};

// Rolls out `episodes` full episodes of the scripted policy. Stored actions
// are the executed (clipped) ones, so every transition replays exactly under
// envs::step. Throws when episodes * max_episode_length exceeds the buffer
// capacity.
TaskDataset generate_dataset(const envs::TaskSpec& task,
                             const BehaviorPolicy& policy, int episodes,
                             std::uint64_t seed);

// On-disk layout: <dir>/manifest.json plus <dir>/transitions.f64 holding
// (s1,s2,a1,a2,s'1,s'2,r) per record as 64-bit little-endian floats. The
// directory is conventionally named task_<id>.
void write_dataset(const TaskDataset& dataset,
                   const std::filesystem::path& dir);
TaskDataset read_dataset(const std::filesystem::path& dir);

std::filesystem::path task_dir_name(int task_id);

// Undiscounted per-episode returns of the stored transitions, assuming whole
// episodes of max_episode_length in order (the generate_dataset layout).
std::vector<double> episode_returns(const TaskDataset& dataset);

}  // namespace focal::datagen
