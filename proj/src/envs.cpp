#include "focal/envs.hpp"

#include <atomic>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "focal/rng.hpp"
#include "focal/serial.hpp"

namespace focal::envs {

namespace {
std::atomic<std::uint64_t> g_step_calls{0};
using nlohmann::json;
}  // namespace

std::string to_string(Family f) {
  return f == Family::sparse_point_robot ? "sparse-point-robot"
                                         : "point-robot-wind";
}

Family family_from_string(const std::string& s) {
  if (s == "sparse-point-robot") return Family::sparse_point_robot;
  if (s == "point-robot-wind") return Family::point_robot_wind;
  throw std::invalid_argument("unknown environment family: " + s);
}

std::vector<TaskSpec> sample_tasks(Family family, int count,
                                   std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_tasks: count must be >= 1");
  Rng rng(seed);
  std::vector<TaskSpec> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    TaskSpec t;
    t.family = family;
    t.task_id = i;
    if (family == Family::sparse_point_robot) {
      const double theta = rng.uniform(0.0, 2.0 * M_PI);
      t.goal = Eigen::Vector2d(std::cos(theta), std::sin(theta));
      t.wind.setZero();
      t.goal_radius = kGoalRadius;
    } else {
      t.goal = Eigen::Vector2d(0.0, 1.0);
      t.wind = Eigen::Vector2d(rng.uniform(-kWindMax, kWindMax),
                               rng.uniform(-kWindMax, kWindMax));
      t.goal_radius = 0.0;  // dense reward, radius unused
    }
    t.max_episode_length = kMaxEpisodeLength;
    tasks.push_back(t);
  }
  return tasks;
}

EnvState reset(const TaskSpec&) { return EnvState{}; }

Eigen::Vector2d clip_action(const Eigen::Vector2d& action) {
  return action.cwiseMax(-kActionBound).cwiseMin(kActionBound);
}

double reward_for(const TaskSpec& task, const Eigen::Vector2d& next_position) {
  const double d = (next_position - task.goal).norm();
  if (task.family == Family::sparse_point_robot) {
    return d < task.goal_radius ? 1.0 - d : 0.0;
  }
  return -d;
}

StepResult step(const TaskSpec& task, const EnvState& state,
                const Eigen::Vector2d& action) {
  if (state.steps_taken >= task.max_episode_length) {
    throw std::logic_error("step: episode already finished (task " +
                           std::to_string(task.task_id) + ")");
  }
  g_step_calls.fetch_add(1, std::memory_order_relaxed);
  StepResult out;
  out.state.position = state.position + clip_action(action) + task.wind;
  out.state.steps_taken = state.steps_taken + 1;
  out.reward = reward_for(task, out.state.position);
  out.done = out.state.steps_taken == task.max_episode_length;
  return out;
}

std::uint64_t step_call_count() {
  return g_step_calls.load(std::memory_order_relaxed);
}

CorrespondenceReport check_task_transition_correspondence(
    std::span<const TaskSpec> tasks, int probe_count, std::uint64_t seed) {
  if (tasks.size() < 2) {
    throw std::invalid_argument(
        "check_task_transition_correspondence: need at least 2 tasks");
  }
  Rng rng(seed);
  std::vector<Eigen::Vector2d> states, actions;
  states.reserve(static_cast<std::size_t>(probe_count));
  actions.reserve(static_cast<std::size_t>(probe_count));
  for (int p = 0; p < probe_count; ++p) {
    states.emplace_back(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    actions.emplace_back(rng.uniform(-kActionBound, kActionBound),
                         rng.uniform(-kActionBound, kActionBound));
  }

  auto outcome = [](const TaskSpec& t, const Eigen::Vector2d& s,
                    const Eigen::Vector2d& a) {
    EnvState st;
    st.position = s;
    const StepResult r = step(t, st, a);
    return std::pair<Eigen::Vector2d, double>(r.state.position, r.reward);
  };

  CorrespondenceReport report;
  report.correspondence_holds = true;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t j = i + 1; j < tasks.size(); ++j) {
      PairReport pr;
      pr.task_a = tasks[i].task_id;
      pr.task_b = tasks[j].task_id;
      pr.probes = probe_count;
      for (int p = 0; p < probe_count; ++p) {
        const auto [sa, ra] = outcome(tasks[i], states[p], actions[p]);
        const auto [sb, rb] = outcome(tasks[j], states[p], actions[p]);
        if (sa != sb || ra != rb) ++pr.distinguishing_probes;
      }
      pr.indistinguishable = pr.distinguishing_probes == 0;
      if (pr.indistinguishable) report.correspondence_holds = false;
      report.pairs.push_back(pr);
    }
  }
  if (!report.correspondence_holds) {
    report.note =
        "some task pairs are indistinguishable on all probes; for "
        "sparse-point-robot this is the zero-reward region outside both goal "
        "neighborhoods";
  }
  return report;
}

std::string format_report(const CorrespondenceReport& report) {
  std::ostringstream os;
  os << "pair  probes  distinguishing  indistinguishable\n";
  for (const auto& p : report.pairs) {
    os << p.task_a << "-" << p.task_b << "  " << p.probes << "  "
       << p.distinguishing_probes << "  " << (p.indistinguishable ? "yes" : "no")
       << "\n";
  }
  os << "task-transition correspondence "
     << (report.correspondence_holds ? "holds" : "violated")
     << " on the probe set\n";
  if (!report.note.empty()) os << report.note << "\n";
  return os.str();
}

void write_task_set(const std::filesystem::path& path,
                    std::span<const TaskSpec> tasks, std::uint64_t seed) {
  json doc;
  doc["family"] = to_string(tasks.empty() ? Family::sparse_point_robot
                                          : tasks.front().family);
  doc["seed"] = seed;
  doc["tasks"] = json::array();
  for (const TaskSpec& t : tasks) {
    doc["tasks"].push_back({
        {"task_id", t.task_id},
        {"goal", {t.goal.x(), t.goal.y()}},
        {"wind", {t.wind.x(), t.wind.y()}},
        {"goal_radius", t.goal_radius},
        {"max_episode_length", t.max_episode_length},
    });
  }
  serial::write_file(path, doc.dump(2) + "\n");
}

std::vector<TaskSpec> read_task_set(const std::filesystem::path& path,
                                    std::uint64_t* seed_out) {
  json doc;
  try {
    doc = json::parse(serial::read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("task set " + path.string() + ": parse error: " +
                             e.what());
  }
  const Family family = family_from_string(doc.at("family").get<std::string>());
  if (seed_out != nullptr) *seed_out = doc.at("seed").get<std::uint64_t>();
  std::vector<TaskSpec> tasks;
  for (const auto& e : doc.at("tasks")) {
    TaskSpec t;
    t.family = family;
    t.task_id = e.at("task_id").get<int>();
    t.goal = Eigen::Vector2d(e.at("goal")[0].get<double>(),
                             e.at("goal")[1].get<double>());
    t.wind = Eigen::Vector2d(e.at("wind")[0].get<double>(),
                             e.at("wind")[1].get<double>());
    t.goal_radius = e.at("goal_radius").get<double>();
    t.max_episode_length = e.at("max_episode_length").get<int>();
    tasks.push_back(t);
  }
  return tasks;
}

}  // namespace focal::envs
