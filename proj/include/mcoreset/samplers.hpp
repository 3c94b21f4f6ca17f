#pragma once

#include <Eigen/Eigenvalues>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcoreset/csv.hpp"
#include "mcoreset/points.hpp"
#include "mcoreset/rng.hpp"

namespace mcoreset {

using PointMap = std::function<RowVec(const RowVec&)>;

// Sample access to a distribution. Immutable after construction except for
// RNG state; concurrent use needs per-thread forks or external locking.
class Sampler {
 public:
  virtual ~Sampler() = default;

  virtual Index dim() const = 0;

  // Exactly `count` i.i.d. samples; throws StreamEnd on a dried-up source.
  virtual PointSet draw(Index count) = 0;

  // Like draw but a single-pass source may return fewer rows at the end.
  virtual PointSet draw_up_to(Index count) { return draw(count); }

  // Exact copy, same RNG state.
  virtual std::unique_ptr<Sampler> clone() const = 0;

  // Copy with an independent RNG stream (for worker threads).
  virtual std::unique_ptr<Sampler> fork(std::uint64_t stream_id) const = 0;

  virtual bool has_rng() const { return true; }
  virtual Rng& rng() = 0;
};

namespace detail {

class RngSampler : public Sampler {
 public:
  explicit RngSampler(Rng rng) : rng_(std::move(rng)) {}
  Rng& rng() override { return rng_; }

 protected:
  Rng rng_;
};

}  // namespace detail

// --- synthetic specs -------------------------------------------------------

struct GaussianSpec {
  Vector mean;
  Matrix cov;  // symmetric PSD

  static GaussianSpec standard(Index d) {
    return GaussianSpec{Vector::Zero(d), Matrix::Identity(d, d)};
  }
};

struct MixtureSpec {
  std::vector<GaussianSpec> components;
  Vector weights;
};

struct UniformCubeSpec {
  Index dim = 1;  // uniform on [0,1]^dim
};

// Pushforward of a standard 2-D Gaussian through (x, y) -> (x, x^2 + y).
struct BananaSpec {};

using SyntheticSpec = std::variant<GaussianSpec, MixtureSpec, UniformCubeSpec, BananaSpec>;

inline RowVec banana_map(const RowVec& p) {
  RowVec out(2);
  out(0) = p(0);
  out(1) = p(0) * p(0) + p(1);
  return out;
}

namespace detail {

// Factor a PSD covariance as A with A*A^T = cov (eigendecomposition keeps
// semi-definite inputs usable).
inline Matrix psd_factor(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw ConfigError("covariance must be square");
  if (!cov.isApprox(cov.transpose(), 1e-10))
    throw ConfigError("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  Vector evals = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, evals.cwiseAbs().maxCoeff());
  for (Index i = 0; i < evals.size(); ++i) {
    if (evals(i) < -tol) throw ConfigError("covariance is not positive semi-definite");
    evals(i) = std::max(evals(i), 0.0);
  }
  return es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
}

class GaussianSampler final : public RngSampler {
 public:
  GaussianSampler(GaussianSpec spec, Rng rng)
      : RngSampler(std::move(rng)), mean_(std::move(spec.mean)), factor_(psd_factor(spec.cov)) {
    if (mean_.size() != factor_.rows()) throw ConfigError("mean/covariance dimension mismatch");
  }

  Index dim() const override { return mean_.size(); }

  PointSet draw(Index count) override {
    const Index d = dim();
    Matrix z(count, d);
    for (Index i = 0; i < count; ++i)
      for (Index j = 0; j < d; ++j) z(i, j) = rng_.normal();
    Matrix pts = z * factor_.transpose();
    pts.rowwise() += mean_.transpose();
    return PointSet(std::move(pts));
  }

  std::unique_ptr<Sampler> clone() const override {
    return std::make_unique<GaussianSampler>(*this);
  }
  std::unique_ptr<Sampler> fork(std::uint64_t id) const override {
    auto copy = std::make_unique<GaussianSampler>(*this);
    copy->rng_ = rng_.stream(id);
    return copy;
  }

 private:
  Vector mean_;
  Matrix factor_;
};

class UniformCubeSampler final : public RngSampler {
 public:
  UniformCubeSampler(UniformCubeSpec spec, Rng rng) : RngSampler(std::move(rng)), d_(spec.dim) {
    if (d_ < 1) throw ConfigError("cube dimension must be >= 1");
  }

  Index dim() const override { return d_; }

  PointSet draw(Index count) override {
    Matrix pts(count, d_);
    for (Index i = 0; i < count; ++i)
      for (Index j = 0; j < d_; ++j) pts(i, j) = rng_.uniform();
    return PointSet(std::move(pts));
  }

  std::unique_ptr<Sampler> clone() const override {
    return std::make_unique<UniformCubeSampler>(*this);
  }
  std::unique_ptr<Sampler> fork(std::uint64_t id) const override {
    auto copy = std::make_unique<UniformCubeSampler>(*this);
    copy->rng_ = rng_.stream(id);
    return copy;
  }

 private:
  Index d_;
};

class MixtureSampler final : public RngSampler {
 public:
  MixtureSampler(const MixtureSpec& spec, Rng rng) : RngSampler(std::move(rng)) {
    if (spec.components.empty()) throw ConfigError("mixture needs at least one component");
    if (spec.weights.size() != static_cast<Index>(spec.components.size()))
      throw ConfigError("mixture weights/components mismatch");
    if ((spec.weights.array() < 0.0).any() || std::abs(spec.weights.sum() - 1.0) > kWeightSumTol)
      throw ConfigError("mixture weights must be nonnegative and sum to 1");
    d_ = spec.components.front().mean.size();
    cum_.resize(spec.weights.size());
    double acc = 0.0;
    for (Index i = 0; i < spec.weights.size(); ++i) {
      acc += spec.weights(i);
      cum_[static_cast<std::size_t>(i)] = acc;
    }
    cum_.back() = 1.0;
    for (const auto& c : spec.components) {
      if (c.mean.size() != d_) throw ConfigError("mixture components must share a dimension");
      means_.push_back(c.mean);
      factors_.push_back(psd_factor(c.cov));
    }
  }

  Index dim() const override { return d_; }

  PointSet draw(Index count) override {
    Matrix pts(count, d_);
    RowVec z(d_);
    for (Index i = 0; i < count; ++i) {
      const double u = rng_.uniform();
      std::size_t c = 0;
      while (c + 1 < cum_.size() && u >= cum_[c]) ++c;
      for (Index j = 0; j < d_; ++j) z(j) = rng_.normal();
      pts.row(i) = means_[c].transpose() + z * factors_[c].transpose();
    }
    return PointSet(std::move(pts));
  }

  std::unique_ptr<Sampler> clone() const override {
    return std::make_unique<MixtureSampler>(*this);
  }
  std::unique_ptr<Sampler> fork(std::uint64_t id) const override {
    auto copy = std::make_unique<MixtureSampler>(*this);
    copy->rng_ = rng_.stream(id);
    return copy;
  }

 private:
  Index d_ = 0;
  std::vector<double> cum_;
  std::vector<Vector> means_;
  std::vector<Matrix> factors_;
};

class EmpiricalSampler final : public RngSampler {
 public:
  EmpiricalSampler(PointSet data, Rng rng)
      : RngSampler(std::move(rng)), data_(std::make_shared<PointSet>(std::move(data))) {
    data_->validate();
  }
  EmpiricalSampler(std::shared_ptr<const PointSet> data, Rng rng)
      : RngSampler(std::move(rng)), data_(std::move(data)) {}

  Index dim() const override { return data_->dim(); }

  PointSet draw(Index count) override {
    const Index n = data_->size();
    Matrix pts(count, dim());
    if (data_->uniform()) {
      for (Index i = 0; i < count; ++i)
        pts.row(i) = data_->points.row(static_cast<Index>(rng_.uniform_index(static_cast<std::uint64_t>(n))));
    } else {
      for (Index i = 0; i < count; ++i) {
        double u = rng_.uniform();
        double acc = 0.0;
        Index pick = n - 1;
        for (Index r = 0; r < n; ++r) {
          acc += data_->weights(r);
          if (u < acc) {
            pick = r;
            break;
          }
        }
        pts.row(i) = data_->points.row(pick);
      }
    }
    return PointSet(std::move(pts));
  }

  std::unique_ptr<Sampler> clone() const override {
    return std::make_unique<EmpiricalSampler>(*this);
  }
  std::unique_ptr<Sampler> fork(std::uint64_t id) const override {
    auto copy = std::make_unique<EmpiricalSampler>(*this);
    copy->rng_ = rng_.stream(id);
    return copy;
  }

 private:
  std::shared_ptr<const PointSet> data_;
};

// Single-pass newline-delimited rows; buffers nothing beyond the requested
// batch. Malformed input is a DataError, running dry is StreamEnd.
class StreamSampler final : public Sampler {
 public:
  explicit StreamSampler(std::istream& in) : in_(in) {
    std::string line;
    long lineno = 0;
    while (std::getline(in_, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      first_row_ = detail_parse(line, lineno);
      have_first_ = true;
      break;
    }
    if (!have_first_) throw DataError("stream has no data rows");
    line_number_ = lineno;
    d_ = static_cast<Index>(first_row_.size());
  }

  Index dim() const override { return d_; }

  PointSet draw(Index count) override {
    PointSet got = draw_up_to(count);
    if (got.size() < count) throw StreamEnd(got.size());
    return got;
  }

  PointSet draw_up_to(Index count) override {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(count));
    if (have_first_ && count > 0) {
      rows.push_back(std::move(first_row_));
      have_first_ = false;
    }
    std::string line;
    while (static_cast<Index>(rows.size()) < count && std::getline(in_, line)) {
      ++line_number_;
      if (line.empty() || line == "\r") continue;
      auto fields = detail_parse(line, line_number_);
      if (static_cast<Index>(fields.size()) != d_)
        throw DataError("row " + std::to_string(line_number_) + ": expected " +
                        std::to_string(d_) + " fields, got " + std::to_string(fields.size()));
      rows.push_back(std::move(fields));
    }
    Matrix pts(static_cast<Index>(rows.size()), d_);
    for (Index i = 0; i < pts.rows(); ++i)
      for (Index j = 0; j < d_; ++j) pts(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return PointSet(std::move(pts));
  }

  std::unique_ptr<Sampler> clone() const override {
    throw ConfigError("stream samplers cannot be cloned");
  }
  std::unique_ptr<Sampler> fork(std::uint64_t) const override {
    throw ConfigError("stream samplers cannot be forked");
  }
  bool has_rng() const override { return false; }
  Rng& rng() override { throw ConfigError("stream samplers have no RNG"); }

 private:
  static std::vector<double> detail_parse(const std::string& line, long lineno) {
    return mcoreset::detail::parse_csv_row(line, lineno);
  }

  std::istream& in_;
  Index d_ = 0;
  std::vector<double> first_row_;
  bool have_first_ = false;
  long line_number_ = 0;
};

class PushforwardSampler final : public Sampler {
 public:
  PushforwardSampler(std::shared_ptr<Sampler> base, PointMap map,
                     std::optional<double> lipschitz_bound)
      : base_(std::move(base)), map_(std::move(map)), lipschitz_(lipschitz_bound) {
    if (lipschitz_ && *lipschitz_ <= 0.0) throw ConfigError("Lipschitz bound must be positive");
    RowVec probe = RowVec::Zero(base_->dim());
    out_dim_ = map_(probe).size();
  }

  Index dim() const override { return out_dim_; }

  PointSet draw(Index count) override { return apply(base_->draw(count)); }
  PointSet draw_up_to(Index count) override { return apply(base_->draw_up_to(count)); }

  std::unique_ptr<Sampler> clone() const override {
    return std::make_unique<PushforwardSampler>(base_->clone(), map_, lipschitz_);
  }
  std::unique_ptr<Sampler> fork(std::uint64_t id) const override {
    return std::make_unique<PushforwardSampler>(base_->fork(id), map_, lipschitz_);
  }
  bool has_rng() const override { return base_->has_rng(); }
  Rng& rng() override { return base_->rng(); }

  std::optional<double> lipschitz_bound() const { return lipschitz_; }

 private:
  PointSet apply(PointSet in) {
    Matrix out(in.size(), out_dim_);
    for (Index i = 0; i < in.size(); ++i) {
      RowVec mapped = map_(in.points.row(i));
      if (mapped.size() != out_dim_) throw DataError("map changed output dimension");
      if (!mapped.allFinite()) throw NumericError("pushforward map produced non-finite output");
      out.row(i) = mapped;
    }
    return PointSet(std::move(out));
  }

  std::shared_ptr<Sampler> base_;
  PointMap map_;
  std::optional<double> lipschitz_;
  Index out_dim_;
};

}  // namespace detail

inline std::unique_ptr<Sampler> pushforward(std::shared_ptr<Sampler> base, PointMap map,
                                            std::optional<double> lipschitz_bound = std::nullopt) {
  return std::make_unique<detail::PushforwardSampler>(std::move(base), std::move(map),
                                                      lipschitz_bound);
}

// Each sampler owns the "sampler" sub-stream of its seed, so independent
// components seeded from the same master never share draws.
inline std::unique_ptr<Sampler> make_sampler(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng = Rng(seed).stream("sampler");
  if (std::holds_alternative<GaussianSpec>(spec))
    return std::make_unique<detail::GaussianSampler>(std::get<GaussianSpec>(spec), rng);
  if (std::holds_alternative<UniformCubeSpec>(spec))
    return std::make_unique<detail::UniformCubeSampler>(std::get<UniformCubeSpec>(spec), rng);
  if (std::holds_alternative<MixtureSpec>(spec))
    return std::make_unique<detail::MixtureSampler>(std::get<MixtureSpec>(spec), rng);
  // banana: same construction path as pushforward(gaussian) so both agree bitwise
  auto base = std::make_shared<detail::GaussianSampler>(GaussianSpec::standard(2), rng);
  return pushforward(std::move(base), banana_map);
}

inline std::unique_ptr<Sampler> make_sampler(PointSet data, std::uint64_t seed) {
  return std::make_unique<detail::EmpiricalSampler>(std::move(data), Rng(seed).stream("sampler"));
}

inline std::unique_ptr<Sampler> make_stream_sampler(std::istream& in) {
  return std::make_unique<detail::StreamSampler>(in);
}

}  // namespace mcoreset
