#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace delaymatch {

/// Dense I×J pickup-time matrix, rows are passengers and columns drivers.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  std::span<const double> values() const { return data_; }

  /// Throws std::invalid_argument naming the first negative or non-finite cell.
  void validate() const;

  std::vector<std::int64_t> passenger_ids;
  std::vector<std::int64_t> driver_ids;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct MatchPlan {
  /// (passenger row, driver column), sorted by passenger row.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// Minimum-cost maximum-cardinality assignment (|pairs| = min(I, J)).
/// Among optimal plans the lexicographically smallest pair list is returned.
MatchPlan solve_assignment(const CostMatrix& m);

/// Exhaustive reference solver with the same contract and tie-break.
/// Rejects min(I, J) > 8 or more than ~2e7 candidate injections.
MatchPlan brute_force_assignment(const CostMatrix& m);

/// Absolute tolerance used to call two plan costs equal.
double cost_tolerance(const CostMatrix& m);

}  // namespace delaymatch
