#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mcoreset/points.hpp"
#include "mcoreset/samplers.hpp"

namespace mcoreset {

// Candidate coreset support: uniform weights 1/n, pairwise distinct sites.
struct SiteSet {
  Matrix sites;

  SiteSet() = default;
  explicit SiteSet(Matrix s) : sites(std::move(s)) {}

  Index n() const { return sites.rows(); }
  Index dim() const { return sites.cols(); }

  PointSet as_point_set() const { return PointSet(sites); }

  double min_pairwise_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n(); ++i)
      for (Index j = i + 1; j < n(); ++j)
        best = std::min(best, (sites.row(i) - sites.row(j)).norm());
    return best;
  }

  void validate() const {
    if (n() == 0) throw DataError("site set is empty");
    if (!sites.allFinite()) throw DataError("site set contains non-finite coordinates");
    if (n() > 1 && !(min_pairwise_distance() > 0.0))
      throw DataError("sites must be pairwise distinct");
  }
};

inline void check_exponent(int p) {
  if (p != 1 && p != 2) throw ConfigError("exponent p must be 1 or 2");
}

// Query-to-cell map under the shifted cost |y - x_i|^p - v_i.
struct CellAssignment {
  std::vector<Index> cell;     // per query: owning site, ties to lowest index
  std::vector<Index> counts;   // occupancy over sites
  Vector min_power;            // per query: min_i |y - x_i|^p - v_i
};

inline CellAssignment assign(const Matrix& queries, const SiteSet& sites, const Vector& v,
                             int p) {
  check_exponent(p);
  if (queries.cols() != sites.dim()) throw DataError("query/site dimension mismatch");
  if (v.size() != sites.n()) throw DataError("dual weight length != number of sites");

  const Index m = queries.rows();
  const Index n = sites.n();

  // |y - x|^2 = |y|^2 + |x|^2 - 2 y.x ; the cross term is one GEMM.
  const Vector qn = queries.rowwise().squaredNorm();
  const Vector sn = sites.sites.rowwise().squaredNorm();
  Matrix cross = queries * sites.sites.transpose();  // m x n

  CellAssignment out;
  out.cell.resize(static_cast<std::size_t>(m));
  out.counts.assign(static_cast<std::size_t>(n), 0);
  out.min_power.resize(m);

  for (Index k = 0; k < m; ++k) {
    double best = std::numeric_limits<double>::infinity();
    Index best_i = 0;
    const double yk = qn(k);
    for (Index i = 0; i < n; ++i) {
      double sq = yk + sn(i) - 2.0 * cross(k, i);
      if (sq < 0.0) sq = 0.0;
      const double power = (p == 2 ? sq : std::sqrt(sq)) - v(i);
      if (power < best) {
        best = power;
        best_i = i;
      }
    }
    out.cell[static_cast<std::size_t>(k)] = best_i;
    out.counts[static_cast<std::size_t>(best_i)] += 1;
    out.min_power(k) = best;
  }
  return out;
}

inline CellAssignment assign(const PointSet& queries, const SiteSet& sites, const Vector& v,
                             int p) {
  return assign(queries.points, sites, v, p);
}

namespace detail {

inline double objective_from(const CellAssignment& cells, const Vector& v) {
  return cells.min_power.mean() + v.mean();
}

inline Vector gradient_from(const CellAssignment& cells, Index n) {
  const double m = static_cast<double>(cells.cell.size());
  Vector g(n);
  for (Index i = 0; i < n; ++i)
    g(i) = 1.0 / static_cast<double>(n) -
           static_cast<double>(cells.counts[static_cast<std::size_t>(i)]) / m;
  return g;
}

}  // namespace detail

// Unbiased minibatch estimate of the semi-discrete dual
//   E_mu[min_i |Y - x_i|^p - v_i] + (1/n) sum_i v_i.
inline double dual_objective(const PointSet& minibatch, const SiteSet& sites, const Vector& v,
                             int p) {
  if (minibatch.size() == 0) throw DataError("empty minibatch");
  return detail::objective_from(assign(minibatch, sites, v, p), v);
}

// Stochastic supergradient in v: component i is 1/n minus the assigned fraction.
inline Vector dual_gradient_v(const PointSet& minibatch, const SiteSet& sites, const Vector& v,
                              int p) {
  if (minibatch.size() == 0) throw DataError("empty minibatch");
  return detail::gradient_from(assign(minibatch, sites, v, p), sites.n());
}

// Objective and gradient off one shared assignment.
struct DualEval {
  CellAssignment cells;
  double objective = 0.0;
  Vector gradient;
};

inline DualEval dual_eval(const PointSet& minibatch, const SiteSet& sites, const Vector& v,
                          int p) {
  if (minibatch.size() == 0) throw DataError("empty minibatch");
  DualEval out;
  out.cells = assign(minibatch, sites, v, p);
  out.objective = detail::objective_from(out.cells, v);
  out.gradient = detail::gradient_from(out.cells, sites.n());
  return out;
}

inline void gauge_fix(Vector& v) { v.array() -= v.mean(); }

// Averaged stochastic ascent state. v_avg is the Polyak mean of all iterates
// seen by the solve that produced it.
struct DualState {
  Vector v;
  Vector v_avg;
  std::int64_t step_count = 0;
  std::vector<double> objective_trace;
};

struct DualSolveOptions {
  Index minibatch = 64;
  int steps = 200;
  double alpha = 1.0;          // step alpha / sqrt(k)
  bool record_trace = true;
};

// Maximizes the concave dual by v <- v + (alpha/sqrt(k)) g with iterate
// averaging; both v and v_avg are reported gauge-fixed (mean zero).
inline DualState solve_dual(Sampler& sampler, const SiteSet& sites, int p,
                            const DualSolveOptions& opts, const Vector* warm_start = nullptr) {
  check_exponent(p);
  if (opts.steps < 1) throw ConfigError("dual solve needs at least one step");
  if (opts.minibatch < 1) throw ConfigError("dual solve needs a positive minibatch");

  const Index n = sites.n();
  Vector v = warm_start ? *warm_start : Vector::Zero(n);
  if (v.size() != n) throw ConfigError("warm start length != number of sites");
  Vector v_sum = Vector::Zero(n);

  DualState state;
  if (opts.record_trace) state.objective_trace.reserve(static_cast<std::size_t>(opts.steps));

  for (int k = 1; k <= opts.steps; ++k) {
    PointSet mb;
    try {
      mb = sampler.draw(opts.minibatch);
    } catch (const StreamEnd& e) {
      throw StreamEnd(e.delivered, "sampler exhausted after " + std::to_string(k - 1) +
                                       " dual steps");
    }
    DualEval eval = dual_eval(mb, sites, v, p);
    v += (opts.alpha / std::sqrt(static_cast<double>(k))) * eval.gradient;
    v_sum += v;
    if (opts.record_trace) state.objective_trace.push_back(eval.objective);
  }

  state.v = v;
  state.v_avg = v_sum / static_cast<double>(opts.steps);
  gauge_fix(state.v);
  gauge_fix(state.v_avg);
  state.step_count = opts.steps;
  return state;
}

// Monte Carlo estimate of W_p at the solved dual. Any feasible v makes this
// a lower bound on W_p^p in expectation, so the power estimate is clamped at
// zero before rooting.
struct WpEstimate {
  double wp = 0.0;        // p-th root of the clamped power estimate
  double power = 0.0;     // dual value estimate of W_p^p
  double power_se = 0.0;  // standard error of `power`
  double wp_se = 0.0;     // delta-method SE on the rooted scale
  Index samples = 0;
};

inline WpEstimate estimate_wp(Sampler& sampler, const SiteSet& sites, const DualState& dual,
                              int p, Index eval_samples) {
  check_exponent(p);
  if (eval_samples < 30) throw ConfigError("need at least 30 evaluation samples");

  const double vbar_term = dual.v_avg.mean();
  double sum = 0.0, sumsq = 0.0;
  Index done = 0;
  const Index chunk = 8192;
  while (done < eval_samples) {
    const Index take = std::min(chunk, eval_samples - done);
    PointSet mb = sampler.draw(take);
    CellAssignment cells = assign(mb, sites, dual.v_avg, p);
    sum += cells.min_power.sum();
    sumsq += cells.min_power.squaredNorm();
    done += take;
  }
  const double mdbl = static_cast<double>(eval_samples);
  const double mean = sum / mdbl;
  const double var = std::max(0.0, (sumsq - mdbl * mean * mean) / (mdbl - 1.0));

  WpEstimate est;
  est.samples = eval_samples;
  est.power = mean + vbar_term;
  est.power_se = std::sqrt(var / mdbl);
  const double clamped = std::max(est.power, 0.0);
  est.wp = p == 1 ? clamped : std::sqrt(clamped);
  if (p == 1)
    est.wp_se = est.power_se;
  else
    est.wp_se = est.power > 0.0 ? est.power_se / (2.0 * std::sqrt(est.power)) : est.power_se;
  return est;
}

}  // namespace mcoreset
