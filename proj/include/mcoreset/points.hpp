#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcoreset {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Index = Eigen::Index;

// Exit-code contract: config errors -> 2, data errors -> 3, numerical -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// End-of-data on a single-pass source. Distinct from failure.
struct StreamEnd : std::runtime_error {
  explicit StreamEnd(Index delivered_rows, const std::string& what = "stream exhausted")
      : std::runtime_error(what), delivered(delivered_rows) {}
  Index delivered;
};

constexpr double kWeightSumTol = 1e-12;

// Points are rows of a dense matrix; empty weights mean uniform 1/n.
struct PointSet {
  Matrix points;
  Vector weights;

  PointSet() = default;
  explicit PointSet(Matrix pts) : points(std::move(pts)) {}
  PointSet(Matrix pts, Vector w) : points(std::move(pts)), weights(std::move(w)) {}

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  bool uniform() const { return weights.size() == 0; }

  double weight(Index i) const {
    return uniform() ? 1.0 / static_cast<double>(size()) : weights(i);
  }

  Vector weight_vector() const {
    if (!uniform()) return weights;
    return Vector::Constant(size(), 1.0 / static_cast<double>(size()));
  }

  void validate() const {
    if (size() == 0) throw DataError("point set is empty");
    if (dim() < 1) throw DataError("point dimension must be >= 1");
    if (!points.allFinite()) throw DataError("point set contains non-finite coordinates");
    if (!uniform()) {
      if (weights.size() != size())
        throw DataError("weight vector length does not match point count");
      if ((weights.array() < 0.0).any()) throw DataError("negative weight");
      if (std::abs(weights.sum() - 1.0) > kWeightSumTol)
        throw DataError("weights do not sum to 1");
    }
  }

  static PointSet from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const Index n = static_cast<Index>(rows.size());
    const Index d = n > 0 ? static_cast<Index>(rows.begin()->size()) : 0;
    Matrix m(n, d);
    Index i = 0;
    for (const auto& r : rows) {
      if (static_cast<Index>(r.size()) != d) throw DataError("ragged row list");
      Index j = 0;
      for (double x : r) m(i, j++) = x;
      ++i;
    }
    return PointSet(std::move(m));
  }
};

struct LabeledPointSet {
  PointSet points;
  std::vector<int> labels;

  Index size() const { return points.size(); }
};

// Bounding-box diagonal; the library's notion of "data scale".
inline double bounding_box_diagonal(const Matrix& pts) {
  if (pts.rows() == 0) return 0.0;
  const RowVec lo = pts.colwise().minCoeff();
  const RowVec hi = pts.colwise().maxCoeff();
  return (hi - lo).norm();
}

// C_ij = |a_i - b_j|^p for p in {1, 2}.
inline Matrix pairwise_cost(const Matrix& a, const Matrix& b, int p) {
  if (p != 1 && p != 2) throw ConfigError("cost exponent p must be 1 or 2");
  if (a.cols() != b.cols()) throw DataError("dimension mismatch between point sets");
  const Vector an = a.rowwise().squaredNorm();
  const Vector bn = b.rowwise().squaredNorm();
  Matrix c = -2.0 * (a * b.transpose());
  c.colwise() += an;
  c.rowwise() += bn.transpose();
  c = c.cwiseMax(0.0);
  if (p == 1) c = c.cwiseSqrt();
  return c;
}

}  // namespace mcoreset
