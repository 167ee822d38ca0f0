#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ipp3d/geometry.hpp"

namespace ipp3d {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Isotropic squared-exponential kernel parameters. length_scale is in meters.
struct GpHyperparams {
  double length_scale = 3.67;
  double signal_variance = 1.82;
  double noise_variance = 1.42;

  void validate() const;
};

double se_kernel(double sq_dist, const GpHyperparams& hp);

// GP posterior over every grid cell. The mean is kept unclamped.
struct BeliefState {
  std::vector<double> mu;
  RowMatrix cov;

  std::size_t size() const { return mu.size(); }
  std::vector<double> std_devs() const;
  std::vector<double> clamped_mean() const;
};

// One row per measured cell; H selects a single cell per row.
struct MeasurementBatch {
  std::vector<std::size_t> cell_indices;
  std::vector<double> values;
  std::vector<double> variances;

  std::size_t size() const { return cell_indices.size(); }
  void validate(std::size_t cells) const;
};

inline constexpr double kPriorMean = 0.5;
inline constexpr double kInnovationJitter = 1e-8;

BeliefState init_prior(const GridGeometry& grid, const GpHyperparams& hp);

// Batch GP conditioning on noisy observations (noise hp.noise_variance) using
// the prior's covariance as the kernel matrix. Reference route for
// kalman_update.
BeliefState gp_condition(const BeliefState& prior, const CellSet& observed,
                         std::span<const double> z, const GpHyperparams& hp);

BeliefState kalman_update(const BeliefState& belief, const MeasurementBatch& batch);
void kalman_update_inplace(BeliefState& belief, const MeasurementBatch& batch);

// Covariance-only update used when the measurement equals the current mean
// (planner look-ahead); the mean is left untouched.
void kalman_covariance_update_inplace(BeliefState& belief,
                                      std::span<const std::size_t> cells,
                                      std::span<const double> variances);

double trace_over(const BeliefState& belief, const CellSet& cells);
double full_trace(const BeliefState& belief);

// Mean as a text grid plus the lower triangle of the covariance as raw
// little-endian doubles preceded by the cell count (uint64).
void save_belief(const std::string& mean_path, const std::string& cov_path,
                 const GridGeometry& grid, const BeliefState& belief);
void write_covariance_lower(std::ostream& out, const BeliefState& belief);
RowMatrix read_covariance_lower(std::istream& in);

}  // namespace ipp3d
