#include "ipp3d/belief.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

#include "ipp3d/errors.hpp"
#include "ipp3d/groundtruth.hpp"
#include "ipp3d/simd/kernels.hpp"

namespace ipp3d {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary dumps assume a little-endian host");

void symmetrize(RowMatrix& p) {
  const Eigen::Index n = p.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = 0.5 * (p(i, j) + p(j, i));
      p(i, j) = s;
      p(j, i) = s;
    }
    if (p(i, i) < 0.0) p(i, i) = 0.0;
  }
}

// Solves S X = rhs for symmetric positive definite S. Throws when S is not.
RowMatrix solve_spd(const Eigen::MatrixXd& s, const RowMatrix& rhs) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("innovation covariance is not positive definite");
  }
  const auto d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(d.minCoeff() > dmax * 1e-15)) {
    throw NumericalError("innovation covariance is numerically singular");
  }
  RowMatrix x = ldlt.solve(rhs);
  if (!x.allFinite()) throw NumericalError("non-finite Kalman gain");
  return x;
}

// P <- P - G^T (H P), where G = S^{-1} H P holds the transposed gain (m x n).
void apply_covariance_downdate(RowMatrix& p, const RowMatrix& gain_t,
                               const RowMatrix& hp) {
  const auto n = static_cast<std::size_t>(p.rows());
  const auto m = static_cast<std::size_t>(gain_t.rows());
  simd::kernels().gemm_tn(n, n, m, -1.0, gain_t.data(), n, hp.data(), n,
                          p.data(), n);
  symmetrize(p);
}

}  // namespace

void GpHyperparams::validate() const {
  if (!(length_scale > 0.0) || !(signal_variance > 0.0) || !(noise_variance > 0.0)) {
    throw ConfigError("GP hyperparameters must all be strictly positive");
  }
}

double se_kernel(double sq_dist, const GpHyperparams& hp) {
  return hp.signal_variance *
         std::exp(-sq_dist / (2.0 * hp.length_scale * hp.length_scale));
}

std::vector<double> BeliefState::std_devs() const {
  std::vector<double> s(mu.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    s[i] = std::sqrt(std::max(v, 0.0));
  }
  return s;
}

std::vector<double> BeliefState::clamped_mean() const {
  std::vector<double> c(mu);
  for (double& v : c) v = std::clamp(v, 0.0, 1.0);
  return c;
}

void MeasurementBatch::validate(std::size_t cells) const {
  if (values.size() != cell_indices.size() || variances.size() != cell_indices.size()) {
    throw DimensionError("measurement batch lists differ in length");
  }
  for (std::size_t i = 0; i < cell_indices.size(); ++i) {
    if (cell_indices[i] >= cells) throw IndexError("measurement cell out of range");
    if (!(variances[i] > 0.0)) throw DomainError("measurement variance must be > 0");
  }
}

BeliefState init_prior(const GridGeometry& grid, const GpHyperparams& hp) {
  hp.validate();
  const std::size_t n = grid.size();
  if (n == 0) throw DimensionError("init_prior: empty grid");
  BeliefState b;
  b.mu.assign(n, kPriorMean);
  b.cov.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double dx = grid.center_x(i) - grid.center_x(j);
      const double dy = grid.center_y(i) - grid.center_y(j);
      const double k = se_kernel(dx * dx + dy * dy, hp);
      b.cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k;
      b.cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = k;
    }
  }
  return b;
}

BeliefState gp_condition(const BeliefState& prior, const CellSet& observed,
                         std::span<const double> z, const GpHyperparams& hp) {
  hp.validate();
  if (observed.size() != z.size()) {
    throw DimensionError("gp_condition: observation and value counts differ");
  }
  if (observed.empty()) return prior;
  const auto n = static_cast<Eigen::Index>(prior.size());
  const auto m = static_cast<Eigen::Index>(observed.size());
  for (std::size_t c : observed) {
    if (c >= prior.size()) throw IndexError("gp_condition: cell out of range");
  }

  // K(X*, X): n x m, K(X, X) + sigma_n^2 I: m x m
  Eigen::MatrixXd kxs(n, m);
  Eigen::MatrixXd kxx(m, m);
  Eigen::VectorXd resid(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto cj = static_cast<Eigen::Index>(observed[static_cast<std::size_t>(j)]);
    kxs.col(j) = prior.cov.col(cj);
    for (Eigen::Index i = 0; i < m; ++i) {
      kxx(i, j) = prior.cov(static_cast<Eigen::Index>(observed[static_cast<std::size_t>(i)]), cj);
    }
    resid(j) = z[static_cast<std::size_t>(j)] - prior.mu[static_cast<std::size_t>(cj)];
  }
  constexpr double kJitter = 1e-10;
  kxx.diagonal().array() += hp.noise_variance + kJitter;

  Eigen::LLT<Eigen::MatrixXd> llt(kxx);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("gp_condition: observation covariance not positive definite");
  }
  const Eigen::MatrixXd a = llt.solve(kxs.transpose());  // m x n
  const Eigen::VectorXd alpha = llt.solve(resid);

  BeliefState post;
  post.mu.resize(prior.size());
  const Eigen::VectorXd dmu = kxs * alpha;
  for (Eigen::Index i = 0; i < n; ++i) {
    post.mu[static_cast<std::size_t>(i)] = prior.mu[static_cast<std::size_t>(i)] + dmu(i);
  }
  post.cov = prior.cov - kxs * a;
  symmetrize(post.cov);
  return post;
}

void kalman_update_inplace(BeliefState& belief, const MeasurementBatch& batch) {
  batch.validate(belief.size());
  const std::size_t m = batch.size();
  if (m == 0) return;
  const std::size_t n = belief.size();
  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);

  // H P: the measured rows of P (m x n). S = H P H^T + R.
  RowMatrix hp(mi, ni);
  Eigen::MatrixXd s(mi, mi);
  Eigen::VectorXd innovation(mi);
  for (std::size_t r = 0; r < m; ++r) {
    const auto cr = static_cast<Eigen::Index>(batch.cell_indices[r]);
    hp.row(static_cast<Eigen::Index>(r)) = belief.cov.row(cr);
    innovation(static_cast<Eigen::Index>(r)) =
        batch.values[r] - belief.mu[batch.cell_indices[r]];
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          hp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(batch.cell_indices[c]));
    }
    s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) +=
        batch.variances[r] + kInnovationJitter;
  }
  s = 0.5 * (s + s.transpose()).eval();

  // K^T = S^{-1} H P (P symmetric), so nu += (K^T)^T v, P -= (K^T)^T H P.
  const RowMatrix gain_t = solve_spd(s, hp);
  const auto& k = simd::kernels();
  for (std::size_t r = 0; r < m; ++r) {
    k.axpy(innovation(static_cast<Eigen::Index>(r)),
           gain_t.data() + r * n, belief.mu.data(), n);
  }
  apply_covariance_downdate(belief.cov, gain_t, hp);
}

BeliefState kalman_update(const BeliefState& belief, const MeasurementBatch& batch) {
  BeliefState out = belief;
  kalman_update_inplace(out, batch);
  return out;
}

void kalman_covariance_update_inplace(BeliefState& belief,
                                      std::span<const std::size_t> cells,
                                      std::span<const double> variances) {
  if (cells.size() != variances.size()) {
    throw DimensionError("covariance update: cell and variance counts differ");
  }
  const std::size_t m = cells.size();
  if (m == 0) return;
  const auto ni = static_cast<Eigen::Index>(belief.size());
  const auto mi = static_cast<Eigen::Index>(m);
  RowMatrix hp(mi, ni);
  Eigen::MatrixXd s(mi, mi);
  for (std::size_t r = 0; r < m; ++r) {
    if (cells[r] >= belief.size()) throw IndexError("covariance update: cell out of range");
    if (!(variances[r] > 0.0)) throw DomainError("measurement variance must be > 0");
    hp.row(static_cast<Eigen::Index>(r)) = belief.cov.row(static_cast<Eigen::Index>(cells[r]));
  }
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          hp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cells[c]));
    }
    s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) +=
        variances[r] + kInnovationJitter;
  }
  s = 0.5 * (s + s.transpose()).eval();
  apply_covariance_downdate(belief.cov, solve_spd(s, hp), hp);
}

double trace_over(const BeliefState& belief, const CellSet& cells) {
  double t = 0.0;
  for (std::size_t c : cells) {
    if (c >= belief.size()) throw IndexError("trace_over: cell index out of range");
    t += belief.cov(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
  }
  return t;
}

double full_trace(const BeliefState& belief) { return belief.cov.trace(); }

void write_covariance_lower(std::ostream& out, const BeliefState& belief) {
  const auto n = static_cast<std::uint64_t>(belief.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (Eigen::Index i = 0; i < belief.cov.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = belief.cov(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
}

RowMatrix read_covariance_lower(std::istream& in) {
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n)) {
    throw FormatError("covariance dump: missing size");
  }
  RowMatrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = 0.0;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw FormatError("covariance dump: truncated");
      }
      p(i, j) = v;
      p(j, i) = v;
    }
  }
  return p;
}

void save_belief(const std::string& mean_path, const std::string& cov_path,
                 const GridGeometry& grid, const BeliefState& belief) {
  std::ofstream mean(mean_path, std::ios::binary);
  if (!mean) throw FormatError("cannot open for writing: " + mean_path);
  write_grid(mean, grid, belief.mu);
  std::ofstream cov(cov_path, std::ios::binary);
  if (!cov) throw FormatError("cannot open for writing: " + cov_path);
  write_covariance_lower(cov, belief);
}

}  // namespace ipp3d
