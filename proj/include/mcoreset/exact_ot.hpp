#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "mcoreset/points.hpp"

namespace mcoreset {

constexpr Index kExactOtSupportGuard = 512;

struct TransportPlan {
  Matrix coupling;  // row marginals = source weights, column marginals = target
  double cost = 0.0;
};

struct ExactWp {
  double wp = 0.0;
  TransportPlan plan;
};

namespace detail {

// Transportation simplex (MODI) with Bland's anti-cycling rule: entering arc
// is the lexicographically first with negative reduced cost, leaving arc the
// first bottleneck along the cycle.
class TransportSimplex {
 public:
  TransportSimplex(const Matrix& cost, Vector supply, Vector demand)
      : c_(cost),
        na_(cost.rows()),
        nb_(cost.cols()),
        supply_(std::move(supply)),
        demand_(std::move(demand)),
        flow_(Matrix::Zero(cost.rows(), cost.cols())),
        basic_(static_cast<std::size_t>(cost.rows() * cost.cols()), 0) {}

  TransportPlan solve() {
    northwest_corner();
    const double tol = 1e-12 * (1.0 + c_.cwiseAbs().maxCoeff());
    const long max_pivots = 200 * static_cast<long>(na_ + nb_) * static_cast<long>(na_ + nb_) + 1000;
    long pivots = 0;
    while (true) {
      compute_potentials();
      Index ei = -1, ej = -1;
      for (Index i = 0; i < na_ && ei < 0; ++i)
        for (Index j = 0; j < nb_; ++j) {
          if (is_basic(i, j)) continue;
          if (c_(i, j) - u_(i) - v_(j) < -tol) {
            ei = i;
            ej = j;
            break;
          }
        }
      if (ei < 0) break;
      pivot(ei, ej);
      if (++pivots > max_pivots)
        throw NumericError("transportation simplex failed to terminate");
    }
    TransportPlan plan;
    plan.coupling = flow_;
    plan.cost = (flow_.array() * c_.array()).sum();
    return plan;
  }

 private:
  bool is_basic(Index i, Index j) const {
    return basic_[static_cast<std::size_t>(i * nb_ + j)] != 0;
  }
  void set_basic(Index i, Index j, bool on) {
    basic_[static_cast<std::size_t>(i * nb_ + j)] = on ? 1 : 0;
  }

  // Always produces exactly na + nb - 1 basic arcs; ties advance the row
  // index so degenerate zero-flow arcs stay in the basis.
  void northwest_corner() {
    Vector ra = supply_, rb = demand_;
    Index i = 0, j = 0;
    while (true) {
      const double t = std::max(0.0, std::min(ra(i), rb(j)));
      flow_(i, j) = t;
      set_basic(i, j, true);
      ra(i) -= t;
      rb(j) -= t;
      if (i == na_ - 1 && j == nb_ - 1) break;
      if (i < na_ - 1 && (ra(i) <= rb(j) || j == nb_ - 1))
        ++i;
      else
        ++j;
    }
  }

  void compute_potentials() {
    build_adjacency();
    u_.resize(na_);
    v_.resize(nb_);
    std::vector<char> seen(static_cast<std::size_t>(na_ + nb_), 0);
    std::deque<Index> queue;
    u_(0) = 0.0;
    seen[0] = 1;
    queue.push_back(0);
    Index visited = 1;
    while (!queue.empty()) {
      const Index node = queue.front();
      queue.pop_front();
      if (node < na_) {
        for (Index j : row_adj_[static_cast<std::size_t>(node)]) {
          if (seen[static_cast<std::size_t>(na_ + j)]) continue;
          seen[static_cast<std::size_t>(na_ + j)] = 1;
          v_(j) = c_(node, j) - u_(node);
          queue.push_back(na_ + j);
          ++visited;
        }
      } else {
        const Index j = node - na_;
        for (Index i : col_adj_[static_cast<std::size_t>(j)]) {
          if (seen[static_cast<std::size_t>(i)]) continue;
          seen[static_cast<std::size_t>(i)] = 1;
          u_(i) = c_(i, j) - v_(j);
          queue.push_back(i);
          ++visited;
        }
      }
    }
    if (visited != na_ + nb_) throw NumericError("basis is not a spanning tree");
  }

  void build_adjacency() {
    row_adj_.assign(static_cast<std::size_t>(na_), {});
    col_adj_.assign(static_cast<std::size_t>(nb_), {});
    for (Index i = 0; i < na_; ++i)
      for (Index j = 0; j < nb_; ++j)
        if (is_basic(i, j)) {
          row_adj_[static_cast<std::size_t>(i)].push_back(j);
          col_adj_[static_cast<std::size_t>(j)].push_back(i);
        }
  }

  // Finds the unique basis path from row node ei to column node ej, applies
  // the alternating adjustment, and swaps the entering/leaving arcs.
  void pivot(Index ei, Index ej) {
    // nodes: rows are 0..na-1, columns are na..na+nb-1
    build_adjacency();
    const Index ncols = na_ + nb_;
    std::vector<Index> parent(static_cast<std::size_t>(ncols), -1);
    std::vector<char> seen(static_cast<std::size_t>(ncols), 0);
    std::deque<Index> queue;
    queue.push_back(ei);
    seen[static_cast<std::size_t>(ei)] = 1;
    while (!queue.empty()) {
      const Index node = queue.front();
      queue.pop_front();
      if (node == na_ + ej) break;
      if (node < na_) {
        for (Index j : row_adj_[static_cast<std::size_t>(node)]) {
          const Index other = na_ + j;
          if (!seen[static_cast<std::size_t>(other)]) {
            seen[static_cast<std::size_t>(other)] = 1;
            parent[static_cast<std::size_t>(other)] = node;
            queue.push_back(other);
          }
        }
      } else {
        const Index j = node - na_;
        for (Index i : col_adj_[static_cast<std::size_t>(j)]) {
          if (!seen[static_cast<std::size_t>(i)]) {
            seen[static_cast<std::size_t>(i)] = 1;
            parent[static_cast<std::size_t>(i)] = node;
            queue.push_back(i);
          }
        }
      }
    }
    if (!seen[static_cast<std::size_t>(na_ + ej)])
      throw NumericError("no basis path for entering arc");

    // cycle arcs in order from the entering row node; signs alternate -+-+
    std::vector<Index> path;  // node sequence ej-side back to ei
    for (Index node = na_ + ej; node != -1; node = parent[static_cast<std::size_t>(node)])
      path.push_back(node);
    // path = [col ej, ..., row ei]; walk from ei end for determinism
    std::vector<std::pair<Index, Index>> minus_arcs, plus_arcs;
    bool minus = true;
    for (std::size_t s = path.size() - 1; s > 0; --s) {
      const Index from = path[s], to = path[s - 1];
      const Index row = from < na_ ? from : to;
      const Index col = from < na_ ? to - na_ : from - na_;
      (minus ? minus_arcs : plus_arcs).emplace_back(row, col);
      minus = !minus;
    }

    double theta = std::numeric_limits<double>::infinity();
    std::pair<Index, Index> leaving{-1, -1};
    for (const auto& [i, j] : minus_arcs) {
      if (flow_(i, j) < theta) {
        theta = flow_(i, j);
        leaving = {i, j};
      }
    }

    for (const auto& [i, j] : minus_arcs) flow_(i, j) -= theta;
    for (const auto& [i, j] : plus_arcs) flow_(i, j) += theta;
    flow_(ei, ej) = theta;
    flow_(leaving.first, leaving.second) = 0.0;
    set_basic(leaving.first, leaving.second, false);
    set_basic(ei, ej, true);
  }

  Matrix c_;
  Index na_, nb_;
  Vector supply_, demand_;
  Matrix flow_;
  std::vector<char> basic_;
  std::vector<std::vector<Index>> row_adj_, col_adj_;
  Vector u_, v_;
};

// Deterministic total order so exact_wp(a, b) and exact_wp(b, a) run the
// same instance and agree bitwise.
inline int compare_point_sets(const PointSet& a, const PointSet& b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  if (a.dim() != b.dim()) return a.dim() < b.dim() ? -1 : 1;
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < a.dim(); ++j) {
      if (a.points(i, j) != b.points(i, j)) return a.points(i, j) < b.points(i, j) ? -1 : 1;
    }
  for (Index i = 0; i < a.size(); ++i) {
    if (a.weight(i) != b.weight(i)) return a.weight(i) < b.weight(i) ? -1 : 1;
  }
  return 0;
}

}  // namespace detail

// Exact discrete optimal transport between small weighted point sets.
inline ExactWp exact_wp(const PointSet& a, const PointSet& b, int p) {
  a.validate();
  b.validate();
  if (p != 1 && p != 2) throw ConfigError("exponent p must be 1 or 2");
  if (a.size() + b.size() > kExactOtSupportGuard)
    throw ConfigError("combined support exceeds the exact solver guard of " +
                      std::to_string(kExactOtSupportGuard) + " points");
  for (Index i = 0; i < a.size(); ++i)
    if (a.weight(i) <= 0.0) throw DataError("degenerate (nonpositive) source weight");
  for (Index j = 0; j < b.size(); ++j)
    if (b.weight(j) <= 0.0) throw DataError("degenerate (nonpositive) target weight");

  if (detail::compare_point_sets(a, b) > 0) {
    ExactWp swapped = exact_wp(b, a, p);
    swapped.plan.coupling.transposeInPlace();
    return swapped;
  }

  detail::TransportSimplex simplex(pairwise_cost(a.points, b.points, p), a.weight_vector(),
                                   b.weight_vector());
  ExactWp out;
  out.plan = simplex.solve();
  const double clamped = std::max(out.plan.cost, 0.0);
  out.wp = p == 1 ? clamped : std::sqrt(clamped);
  return out;
}

}  // namespace mcoreset
