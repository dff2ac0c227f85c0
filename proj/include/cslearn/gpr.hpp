#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace cslearn::gpr {

// Squared-exponential kernel parameters.
struct Hyperparams {
  double sigma = 1.0;   // signal scale, > 0
  double length = 1.0;  // length scale, > 0
};

// Column-per-point training data. Weights scale each point's influence on the
// fit: the model divides the diagonal noise entry by the weight, so weight
// 0.5 doubles the point's noise floor relative to weight 1. Weights are
// normalized to mean 1 at fit time; all-equal weights reproduce the
// unweighted fit exactly.
struct TrainingSet {
  Eigen::MatrixXd states;        // d_x x n
  Eigen::MatrixXd controls;      // d_u x n
  Eigen::VectorXd point_weights; // n, all > 0; empty means all 1
};

// Relative numerical floor: every diagonal entry gets at least this times
// sigma^2 regardless of the requested noise floor, keeping the factorization
// positive definite. Deliberately not proportional to the candidate sigma
// alone: an absolute noise floor is what keeps likelihood selection honest,
// because a sigma-proportional noise term lets an inflated signal scale buy
// enough noise tolerance to explain any rough data as a flat function.
inline constexpr double kNumericalJitterScale = 1e-8;

double kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj, const Hyperparams& theta);

// Dense n x n kernel matrix (no jitter).
Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& states, const Hyperparams& theta);

// 1 x n cross-covariance of a query against the training states.
Eigen::RowVectorXd cross_covariance(const Eigen::VectorXd& query, const Eigen::MatrixXd& states,
                                    const Hyperparams& theta);

// Multi-output GP regressor from sensed states to controls. All outputs share
// one kernel matrix and one Cholesky factorization. With center on, controls
// are centered before fitting and far from the data the prediction falls back
// to the training mean; with center off the prior is zero everywhere, which
// suits regressors whose far field must read as "no signal" rather than "as
// much as the average training point".
//
// Inputs are standardized per channel to the training data's weighted spread
// before the kernel sees them, so one isotropic length can both resolve sharp
// structure along a wide channel and generalize across narrow ones.
// theta.length is in those standardized units; the training set itself is
// stored raw, and a reload recomputes the same scales from it.
class Model {
 public:
  Model() = default;

  // theta empty: pick hyperparameters by log marginal likelihood over a
  // sigma/length grid scaled to the data, then refine once coordinate-wise
  // (needs n >= 3). noise_floor is an absolute noise variance: each diagonal
  // entry is (noise_floor + kNumericalJitterScale sigma^2) / point weight.
  static Model fit(TrainingSet data, std::optional<Hyperparams> theta = std::nullopt,
                   double noise_floor = 0.0, bool center = true);

  bool empty() const { return data_.states.cols() == 0; }
  int input_dim() const { return static_cast<int>(data_.states.rows()); }
  int output_dim() const { return static_cast<int>(data_.controls.rows()); }
  int size() const { return static_cast<int>(data_.states.cols()); }

  Eigen::VectorXd predict(const Eigen::VectorXd& query) const;

  // Kernel row of a query against the training points, in the model's
  // standardized input space. kernel_row(x)(i) is the influence of training
  // point i on predictions at x.
  Eigen::RowVectorXd kernel_row(const Eigen::VectorXd& query) const;

  const TrainingSet& data() const { return data_; }
  const Hyperparams& theta() const { return theta_; }
  double noise_floor() const { return noise_floor_; }
  const Eigen::VectorXd& control_mean() const { return control_mean_; }
  const Eigen::VectorXd& input_scale() const { return input_scale_; }

  // Kernel evaluations spent in predict() since construction. Shared across
  // copies; increments are atomic so concurrent predict() calls stay safe.
  std::uint64_t kernel_evaluations() const;
  void reset_kernel_evaluations();

  // Byte layout is the write sequence in save(). Loading refactorizes.
  void save(std::ostream& out) const;
  static Model load(std::istream& in);

 private:
  void factorize();

  TrainingSet data_;
  Hyperparams theta_;
  double noise_floor_ = 0.0;
  bool center_ = true;
  Eigen::VectorXd input_scale_;    // per-channel divisor, all > 0
  Eigen::MatrixXd scaled_states_;  // data_.states with each row divided by its scale
  Eigen::VectorXd control_mean_;
  Eigen::MatrixXd alpha_;  // n x d_u, K^-1 (U - mean)^T
  std::shared_ptr<std::atomic<std::uint64_t>> predict_evals_;
};

// Log marginal likelihood of the centered controls under theta, summed over
// output dimensions, with the same diagonal noise rule as Model::fit.
// Exposed for tests; fit() maximizes this.
double log_marginal_likelihood(const TrainingSet& data, const Hyperparams& theta,
                               double noise_floor = 0.0);

}  // namespace cslearn::gpr
