#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace focal::envs {

inline constexpr double kActionBound = 0.1;
inline constexpr double kGoalRadius = 0.2;
inline constexpr double kWindMax = 0.05;
inline constexpr int kMaxEpisodeLength = 20;

enum class Family { sparse_point_robot, point_robot_wind };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

// One navigation task. Sparse-point-robot tasks differ by a goal on the unit
// circle; point-robot-wind tasks share the goal (0, 1) and differ by a
// constant drift added to every step.
struct TaskSpec {
  Family family = Family::sparse_point_robot;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  Eigen::Vector2d wind = Eigen::Vector2d::Zero();
  double goal_radius = kGoalRadius;
  int max_episode_length = kMaxEpisodeLength;
  int task_id = 0;
};

struct EnvState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  int steps_taken = 0;
};

struct Transition {
  Eigen::Vector2d state;
  Eigen::Vector2d action;
  Eigen::Vector2d next_state;
  double reward = 0.0;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
};

// Goals uniform on the unit circle (sparse family) / winds uniform in
// [-kWindMax, kWindMax]^2 (wind family); task_ids are 0..count-1.
std::vector<TaskSpec> sample_tasks(Family family, int count,
                                   std::uint64_t seed);

// Every episode starts at the origin.
EnvState reset(const TaskSpec& task);

// Pure function of (task, state, action); the action is clipped to the
// per-component bound before use. Throws when the episode already finished.
StepResult step(const TaskSpec& task, const EnvState& state,
                const Eigen::Vector2d& action);

double reward_for(const TaskSpec& task, const Eigen::Vector2d& next_position);

Eigen::Vector2d clip_action(const Eigen::Vector2d& action);

// Diagnostic counter for offline-purity tests: total step() calls in this
// process.
std::uint64_t step_call_count();

// ---- task-transition correspondence probe (Assumption checker) ----

struct PairReport {
  int task_a = 0;
  int task_b = 0;
  int probes = 0;
  int distinguishing_probes = 0;  // probes where (s', r) differ
  bool indistinguishable = false;
};

struct CorrespondenceReport {
  std::vector<PairReport> pairs;
  // true when every distinct pair is distinguished by at least one probe
  bool correspondence_holds = false;
  std::string note;
};

// Probes random (s, a) pairs, s uniform in [-2, 2]^2 and a in the action box,
// and reports which task pairs produce identical (s', r) on all probes.
CorrespondenceReport check_task_transition_correspondence(
    std::span<const TaskSpec> tasks, int probe_count, std::uint64_t seed);

std::string format_report(const CorrespondenceReport& report);

// ---- task set manifest ----
void write_task_set(const std::filesystem::path& path,
                    std::span<const TaskSpec> tasks, std::uint64_t seed);
std::vector<TaskSpec> read_task_set(const std::filesystem::path& path,
                                    std::uint64_t* seed_out = nullptr);

}  // namespace focal::envs
