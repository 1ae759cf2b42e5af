#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "delaymatch/matcher.hpp"
#include "delaymatch/simulator.hpp"

namespace delaymatch {

struct FeatureConfig {
  /// Zone counts are divided by this and clamped to 1.
  double count_scale = 10.0;
};

/// Raw per-zone supply/demand view shared by every agent in an interval.
struct GlobalState {
  std::vector<double> leftover_waiting_count;
  std::vector<double> leftover_idle_count;
  std::vector<double> expected_new_passenger_rate;
  std::vector<double> expected_new_driver_rate;

  int zones() const { return static_cast<int>(leftover_waiting_count.size()); }
  /// [waiting, idle, passenger rate, driver rate] normalised into [0, 1].
  Eigen::VectorXd normalized(const FeatureConfig& cfg) const;
};

struct LocalState {
  int zone = 0;
  int zone_count = 0;
  double cumulative_wait = 0.0;  // waited seconds / (T · interval seconds)
  double expected_pickup = 0.0;  // virtual pickup seconds / c_max

  std::vector<double> zone_one_hot() const;
};

/// s = [global (4M), zone one-hot (M), wait, expected pickup]; the global
/// block is shared between all agents of an interval.
class AgentStateVector {
 public:
  AgentStateVector() = default;
  AgentStateVector(std::shared_ptr<const Eigen::VectorXd> global, LocalState local);

  static Eigen::Index dimension(int zones) { return 5 * static_cast<Eigen::Index>(zones) + 2; }
  Eigen::Index size() const;
  const LocalState& local() const { return local_; }
  const std::shared_ptr<const Eigen::VectorXd>& global() const { return global_; }

  /// Writes the dense vector into `out` (length size()).
  template <typename Derived>
  void write(Eigen::DenseBase<Derived>& out) const {
    const Eigen::Index g = global_->size();
    out.head(g) = global_->transpose();
    out.segment(g, local_.zone_count).setZero();
    out(g + local_.zone) = 1.0;
    out(g + local_.zone_count) = local_.cumulative_wait;
    out(g + local_.zone_count + 1) = local_.expected_pickup;
  }
  Eigen::VectorXd dense() const;

 private:
  std::shared_ptr<const Eigen::VectorXd> global_;
  LocalState local_;
};

GlobalState build_global_state(const WorldState& world);

/// Assignment over every waiting request and idle driver, used only to
/// estimate pickup times; the world is not touched.
MatchPlan virtual_match(const WorldState& world);

/// `index` is the position of the agent in `world.waiting()`.
LocalState build_local_state(std::size_t index, const MatchPlan& virtual_plan,
                             const WorldState& world);

struct JointState {
  int t = 0;
  std::shared_ptr<const Eigen::VectorXd> global;
  std::vector<AgentStateVector> agents;  // one per waiting request, same order

  /// Dense N_t × (5M+2) matrix.
  Eigen::MatrixXd matrix() const;
};

JointState assemble_joint_state(const WorldState& world, const FeatureConfig& cfg = {});

void write_feature_header(std::ostream& out, int zones);
void write_feature_rows(std::ostream& out, const JointState& joint,
                        std::span<const std::int64_t> request_ids);

}  // namespace delaymatch
