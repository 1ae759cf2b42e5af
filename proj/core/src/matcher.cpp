#include "delaymatch/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace delaymatch {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols)
    throw std::invalid_argument("CostMatrix: data size does not match rows*cols");
}

void CostMatrix::validate() const {
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) {
      const double c = (*this)(i, j);
      if (!std::isfinite(c) || c < 0.0) {
        throw std::invalid_argument("CostMatrix: cost(" + std::to_string(i) + "," +
                                    std::to_string(j) + ") = " + std::to_string(c) +
                                    " is negative or non-finite");
      }
    }
  }
  if (!passenger_ids.empty() && passenger_ids.size() != rows_)
    throw std::invalid_argument("CostMatrix: passenger_ids size mismatch");
  if (!driver_ids.empty() && driver_ids.size() != cols_)
    throw std::invalid_argument("CostMatrix: driver_ids size mismatch");
}

double cost_tolerance(const CostMatrix& m) {
  double max_c = 0.0;
  for (double c : m.values()) max_c = std::max(max_c, c);
  return 1e-9 * (1.0 + max_c);
}

namespace {

struct SquareSolution {
  std::vector<double> u, v;
  std::vector<std::size_t> row_to_col;
};

// Shortest augmenting path Hungarian method on a square matrix with potentials.
SquareSolution hungarian_square(const std::vector<double>& a, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based internal indexing, column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  SquareSolution s;
  s.u.assign(u.begin() + 1, u.end());
  s.v.assign(v.begin() + 1, v.end());
  s.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) s.row_to_col[p[j] - 1] = j - 1;
  return s;
}

// Moves the current perfect matching to the lexicographically smallest one
// among matchings that use only tight edges.
class TightGraphRefiner {
 public:
  TightGraphRefiner(std::vector<std::vector<char>> tight, std::vector<std::size_t> row_to_col)
      : n_(row_to_col.size()), tight_(std::move(tight)), row_to_col_(std::move(row_to_col)),
        col_to_row_(n_), fixed_(n_, 0), seen_(n_) {
    for (std::size_t i = 0; i < n_; ++i) col_to_row_[row_to_col_[i]] = i;
  }

  void refine(std::size_t rows_to_fix) {
    for (std::size_t i = 0; i < rows_to_fix; ++i) {
      fixed_[i] = 1;
      const std::size_t target = row_to_col_[i];
      for (std::size_t j = 0; j < target; ++j) {
        if (!tight_[i][j]) continue;
        const std::size_t r = col_to_row_[j];
        if (fixed_[r]) continue;
        std::fill(seen_.begin(), seen_.end(), 0);
        seen_[j] = 1;  // j is reserved for row i
        if (find_path(r, target)) {
          // r's chain was rotated by find_path; row i now takes column j.
          row_to_col_[i] = j;
          col_to_row_[j] = i;
          break;
        }
      }
    }
  }

  const std::vector<std::size_t>& row_to_col() const { return row_to_col_; }

 private:
  // DFS over unfixed rows: can `row` move so that column `free_col` gets taken?
  bool find_path(std::size_t row, std::size_t free_col) {
    for (std::size_t c = 0; c < n_; ++c) {
      if (!tight_[row][c] || seen_[c] || c == row_to_col_[row]) continue;
      seen_[c] = 1;
      if (c == free_col) {
        assign(row, c);
        return true;
      }
      const std::size_t next = col_to_row_[c];
      if (fixed_[next]) continue;
      if (find_path(next, free_col)) {
        assign(row, c);
        return true;
      }
    }
    return false;
  }

  void assign(std::size_t row, std::size_t col) {
    row_to_col_[row] = col;
    col_to_row_[col] = row;
  }

  std::size_t n_;
  std::vector<std::vector<char>> tight_;
  std::vector<std::size_t> row_to_col_;
  std::vector<std::size_t> col_to_row_;
  std::vector<char> fixed_;
  std::vector<char> seen_;
};

MatchPlan plan_from_rows(const CostMatrix& m, const std::vector<std::size_t>& row_to_col) {
  MatchPlan plan;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const std::size_t j = row_to_col[i];
    if (j < m.cols()) {
      plan.pairs.emplace_back(i, j);
      plan.total_cost += m(i, j);
    }
  }
  return plan;
}

}  // namespace

MatchPlan solve_assignment(const CostMatrix& m) {
  m.validate();
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  if (rows == 0 || cols == 0) return {};

  // Dummy rows/columns carry a constant cost: every dummy is matched exactly
  // once, so they shift all complete assignments by the same amount and the
  // real part is a min-cost maximum-cardinality matching.
  const std::size_t n = std::max(rows, cols);
  std::vector<double> square(n * n, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) square[i * n + j] = m(i, j);

  SquareSolution sol = hungarian_square(square, n);

  const double tol = 1e-10 * (1.0 + *std::max_element(square.begin(), square.end()));
  std::vector<std::vector<char>> tight(n, std::vector<char>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tight[i][j] = (square[i * n + j] - sol.u[i] - sol.v[j]) <= tol;
  for (std::size_t i = 0; i < n; ++i) tight[i][sol.row_to_col[i]] = 1;

  TightGraphRefiner refiner(std::move(tight), std::move(sol.row_to_col));
  refiner.refine(rows);
  return plan_from_rows(m, refiner.row_to_col());
}

namespace {

class Enumerator {
 public:
  Enumerator(const CostMatrix& m) : m_(m), transposed_(m.rows() > m.cols()) {
    small_ = transposed_ ? m.cols() : m.rows();
    large_ = transposed_ ? m.rows() : m.cols();
    tol_ = cost_tolerance(m);
    used_.assign(large_, 0);
    choice_.assign(small_, 0);
  }

  MatchPlan run() {
    recurse(0, 0.0);
    return best_;
  }

 private:
  double cost(std::size_t s, std::size_t l) const { return transposed_ ? m_(l, s) : m_(s, l); }

  void recurse(std::size_t depth, double acc) {
    if (depth == small_) {
      consider(acc);
      return;
    }
    for (std::size_t l = 0; l < large_; ++l) {
      if (used_[l]) continue;
      used_[l] = 1;
      choice_[depth] = l;
      recurse(depth + 1, acc + cost(depth, l));
      used_[l] = 0;
    }
  }

  void consider(double total) {
    MatchPlan cand;
    cand.total_cost = total;
    cand.pairs.reserve(small_);
    for (std::size_t s = 0; s < small_; ++s) {
      if (transposed_)
        cand.pairs.emplace_back(choice_[s], s);
      else
        cand.pairs.emplace_back(s, choice_[s]);
    }
    std::sort(cand.pairs.begin(), cand.pairs.end());
    if (!have_best_ || total < best_.total_cost - tol_ ||
        (std::abs(total - best_.total_cost) <= tol_ && cand.pairs < best_.pairs)) {
      best_ = std::move(cand);
      have_best_ = true;
    }
  }

  const CostMatrix& m_;
  bool transposed_;
  std::size_t small_ = 0, large_ = 0;
  double tol_ = 0.0;
  std::vector<char> used_;
  std::vector<std::size_t> choice_;
  MatchPlan best_;
  bool have_best_ = false;
};

}  // namespace

MatchPlan brute_force_assignment(const CostMatrix& m) {
  m.validate();
  const std::size_t small = std::min(m.rows(), m.cols());
  const std::size_t large = std::max(m.rows(), m.cols());
  if (small > 8) throw std::invalid_argument("brute_force_assignment: min(I,J) exceeds 8");
  double injections = 1.0;
  for (std::size_t k = 0; k < small; ++k) injections *= static_cast<double>(large - k);
  if (injections > 2e7)
    throw std::invalid_argument("brute_force_assignment: instance too large to enumerate");
  if (small == 0) return {};
  return Enumerator(m).run();
}

}  // namespace delaymatch
