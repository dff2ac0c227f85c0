#include "cslearn/gpr.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "cslearn/error.hpp"
#include "cslearn/snapshot.hpp"

namespace cslearn::gpr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr std::uint32_t kModelMagic = 0x4c47534du;  // "MSGL"
constexpr std::uint32_t kModelVersion = 1;

void check_training_set(const TrainingSet& ts) {
  Eigen::Index n = ts.states.cols();
  if (n == 0) throw Error("empty training set");
  if (ts.controls.cols() != n) {
    throw Error("states and controls disagree on point count");
  }
  if (ts.controls.rows() == 0) throw Error("training set has no control dimensions");
  if (!ts.states.allFinite() || !ts.controls.allFinite()) {
    throw Error("non-finite training data");
  }
  if (ts.point_weights.size() != 0) {
    if (ts.point_weights.size() != n) throw Error("one weight per training point required");
    if (!ts.point_weights.allFinite() || (ts.point_weights.array() <= 0.0).any()) {
      throw Error("point weights must be positive and finite");
    }
  }
}

void check_theta(const Hyperparams& theta) {
  if (!(theta.sigma > 0.0) || !std::isfinite(theta.sigma)) {
    throw Error("kernel sigma must be positive");
  }
  if (!(theta.length > 0.0) || !std::isfinite(theta.length)) {
    throw Error("kernel length scale must be positive");
  }
}

// Evenly strided subsample of point indices, at most cap of them. Used only
// for hyperparameter selection; the final factorization always sees all data.
std::vector<Eigen::Index> strided_indices(Eigen::Index n, Eigen::Index cap) {
  std::vector<Eigen::Index> idx;
  if (n <= cap) {
    for (Eigen::Index i = 0; i < n; ++i) idx.push_back(i);
    return idx;
  }
  for (Eigen::Index k = 0; k < cap; ++k) idx.push_back(k * n / cap);
  return idx;
}

TrainingSet subset(const TrainingSet& ts, const std::vector<Eigen::Index>& idx) {
  TrainingSet out;
  out.states.resize(ts.states.rows(), static_cast<Eigen::Index>(idx.size()));
  out.controls.resize(ts.controls.rows(), static_cast<Eigen::Index>(idx.size()));
  out.point_weights.resize(static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    out.states.col(static_cast<Eigen::Index>(k)) = ts.states.col(idx[k]);
    out.controls.col(static_cast<Eigen::Index>(k)) = ts.controls.col(idx[k]);
    out.point_weights(static_cast<Eigen::Index>(k)) = ts.point_weights(idx[k]);
  }
  return out;
}

double median_pairwise_distance(const Eigen::MatrixXd& states) {
  Eigen::Index n = states.cols();
  std::vector<Eigen::Index> idx = strided_indices(n, 256);
  std::vector<double> d;
  d.reserve(idx.size() * (idx.size() - 1) / 2);
  for (size_t i = 0; i < idx.size(); ++i) {
    for (size_t j = i + 1; j < idx.size(); ++j) {
      d.push_back((states.col(idx[i]) - states.col(idx[j])).norm());
    }
  }
  if (d.empty()) return 0.0;
  size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<long>(mid), d.end());
  return d[mid];
}

}  // namespace

double kernel(const Eigen::VectorXd& xi, const Eigen::VectorXd& xj, const Hyperparams& theta) {
  double d2 = (xi - xj).squaredNorm();
  return theta.sigma * theta.sigma * std::exp(-d2 / (theta.length * theta.length));
}

Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& states, const Hyperparams& theta) {
  Eigen::Index n = states.cols();
  double s2 = theta.sigma * theta.sigma;
  double inv_l2 = 1.0 / (theta.length * theta.length);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = s2;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = s2 * std::exp(-(states.col(i) - states.col(j)).squaredNorm() * inv_l2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::RowVectorXd cross_covariance(const Eigen::VectorXd& query, const Eigen::MatrixXd& states,
                                    const Hyperparams& theta) {
  if (query.size() != states.rows()) {
    throw Error("query has dimension " + std::to_string(query.size()) + ", training data has " +
                std::to_string(states.rows()));
  }
  Eigen::Index n = states.cols();
  double s2 = theta.sigma * theta.sigma;
  double inv_l2 = 1.0 / (theta.length * theta.length);
  Eigen::RowVectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i) = s2 * std::exp(-(states.col(i) - query).squaredNorm() * inv_l2);
  }
  return k;
}

double log_marginal_likelihood(const TrainingSet& data, const Hyperparams& theta,
                               double noise_floor) {
  check_training_set(data);
  check_theta(theta);
  Eigen::Index n = data.states.cols();
  Eigen::VectorXd w = data.point_weights.size() ? data.point_weights : Eigen::VectorXd::Ones(n);
  w *= static_cast<double>(n) / w.sum();
  Eigen::VectorXd wmean = data.controls * (w / w.sum());
  Eigen::MatrixXd centered = data.controls.colwise() - wmean;

  Eigen::MatrixXd k = covariance_matrix(data.states, theta);
  double eps = noise_floor + kNumericalJitterScale * theta.sigma * theta.sigma;
  for (Eigen::Index i = 0; i < n; ++i) k(i, i) += eps / w(i);
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();

  Eigen::MatrixXd solved = llt.solve(centered.transpose());  // n x d_u
  double half_logdet = llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double lml = 0.0;
  Eigen::Index du = data.controls.rows();
  for (Eigen::Index d = 0; d < du; ++d) {
    lml += -0.5 * centered.row(d).dot(solved.col(d));
  }
  lml -= static_cast<double>(du) * half_logdet;
  lml -= 0.5 * static_cast<double>(du * n) * kLog2Pi;
  return lml;
}

Model Model::fit(TrainingSet data, std::optional<Hyperparams> theta, double noise_floor,
                 bool center) {
  check_training_set(data);
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor)) {
    throw Error("noise floor must be non-negative");
  }
  Eigen::Index n = data.states.cols();
  if (data.point_weights.size() == 0) data.point_weights = Eigen::VectorXd::Ones(n);
  data.point_weights *= static_cast<double>(n) / data.point_weights.sum();

  Model m;
  m.data_ = std::move(data);
  m.noise_floor_ = noise_floor;
  m.center_ = center;
  m.predict_evals_ = std::make_shared<std::atomic<std::uint64_t>>(0);

  // Standardize each input channel to its weighted spread. A constant channel
  // contributes no distance either way; it keeps scale 1 to stay invertible.
  {
    const Eigen::VectorXd wn = m.data_.point_weights / m.data_.point_weights.sum();
    const Eigen::VectorXd smean = m.data_.states * wn;
    const Eigen::VectorXd var =
        (m.data_.states.colwise() - smean).array().square().matrix() * wn;
    m.input_scale_ = var.array().sqrt();
    for (Eigen::Index i = 0; i < m.input_scale_.size(); ++i)
      if (!(m.input_scale_(i) > 1e-12)) m.input_scale_(i) = 1.0;
    m.scaled_states_ = m.input_scale_.cwiseInverse().asDiagonal() * m.data_.states;
  }

  if (theta) {
    check_theta(*theta);
    m.theta_ = *theta;
  } else {
    if (n < 3) {
      throw Error("hyperparameter selection needs at least 3 points; pass theta explicitly");
    }
    // Likelihood lives on a subsample when the set is large; the search cost
    // is cubic in the evaluation size and the optimum moves little. The search
    // sees the standardized states, the same geometry predictions run in.
    TrainingSet scaled_view;
    scaled_view.states = m.scaled_states_;
    scaled_view.controls = m.data_.controls;
    scaled_view.point_weights = m.data_.point_weights;
    TrainingSet eval = subset(scaled_view, strided_indices(n, 256));
    Eigen::VectorXd wmean = eval.controls * (eval.point_weights / eval.point_weights.sum());
    Eigen::MatrixXd centered = eval.controls.colwise() - wmean;
    double sigma_base =
        std::sqrt((centered.array().square().matrix() * eval.point_weights).sum() /
                  static_cast<double>(eval.point_weights.sum() * centered.rows()));
    if (!(sigma_base > 1e-12)) sigma_base = 1.0;
    double length_base = median_pairwise_distance(eval.states);
    if (!(length_base > 1e-12)) length_base = 1.0;

    Hyperparams best;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (int es = -4; es <= 4; ++es) {
      for (int el = -4; el <= 4; ++el) {
        Hyperparams cand{sigma_base * std::exp2(es), length_base * std::exp2(el)};
        double lml = log_marginal_likelihood(eval, cand, noise_floor);
        if (lml > best_lml) {
          best_lml = lml;
          best = cand;
        }
      }
    }
    // One coordinate-descent pass on a finer multiplicative grid.
    const double steps[] = {std::exp2(-0.5), std::exp2(-0.25), 1.0, std::exp2(0.25),
                            std::exp2(0.5)};
    for (double f : steps) {
      Hyperparams cand{best.sigma * f, best.length};
      double lml = log_marginal_likelihood(eval, cand, noise_floor);
      if (lml > best_lml) {
        best_lml = lml;
        best.sigma = cand.sigma;
      }
    }
    for (double f : steps) {
      Hyperparams cand{best.sigma, best.length * f};
      double lml = log_marginal_likelihood(eval, cand, noise_floor);
      if (lml > best_lml) {
        best_lml = lml;
        best.length = cand.length;
      }
    }
    m.theta_ = best;
  }

  m.factorize();
  return m;
}

void Model::factorize() {
  Eigen::Index n = data_.states.cols();
  if (center_)
    control_mean_ = data_.controls * (data_.point_weights / data_.point_weights.sum());
  else
    control_mean_ = Eigen::VectorXd::Zero(data_.controls.rows());
  Eigen::MatrixXd centered = data_.controls.colwise() - control_mean_;
  Eigen::MatrixXd k = covariance_matrix(scaled_states_, theta_);
  double eps = noise_floor_ + kNumericalJitterScale * theta_.sigma * theta_.sigma;
  for (Eigen::Index i = 0; i < n; ++i) k(i, i) += eps / data_.point_weights(i);
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    throw Error(
        "kernel matrix is not positive definite; the training set is too "
        "ill-conditioned (select a better-conditioned subset or raise the noise floor)");
  }
  alpha_ = llt.solve(centered.transpose());
}

Eigen::VectorXd Model::predict(const Eigen::VectorXd& query) const {
  if (empty()) throw Error("predict on an unfitted model");
  if (query.size() != input_dim()) {
    throw Error("query has dimension " + std::to_string(query.size()) + ", training data has " +
                std::to_string(input_dim()));
  }
  Eigen::RowVectorXd ks =
      cross_covariance(query.cwiseQuotient(input_scale_), scaled_states_, theta_);
  predict_evals_->fetch_add(static_cast<std::uint64_t>(ks.size()), std::memory_order_relaxed);
  return (ks * alpha_).transpose() + control_mean_;
}

Eigen::RowVectorXd Model::kernel_row(const Eigen::VectorXd& query) const {
  if (empty()) throw Error("kernel_row on an unfitted model");
  if (query.size() != input_dim()) {
    throw Error("query has dimension " + std::to_string(query.size()) + ", training data has " +
                std::to_string(input_dim()));
  }
  return cross_covariance(query.cwiseQuotient(input_scale_), scaled_states_, theta_);
}

std::uint64_t Model::kernel_evaluations() const {
  return predict_evals_ ? predict_evals_->load(std::memory_order_relaxed) : 0;
}

void Model::reset_kernel_evaluations() {
  if (predict_evals_) predict_evals_->store(0, std::memory_order_relaxed);
}

void Model::save(std::ostream& out) const {
  if (empty()) throw Error("cannot save an unfitted model");
  snapshot::write_header(out, kModelMagic, kModelVersion);
  snapshot::write_f64(out, theta_.sigma);
  snapshot::write_f64(out, theta_.length);
  snapshot::write_f64(out, noise_floor_);
  snapshot::write_u32(out, center_ ? 1 : 0);
  snapshot::write_matrix(out, data_.states);
  snapshot::write_matrix(out, data_.controls);
  snapshot::write_vector(out, data_.point_weights);
  if (!out) throw Error("model snapshot write failed");
}

Model Model::load(std::istream& in) {
  snapshot::expect_header(in, kModelMagic, kModelVersion, "model");
  Hyperparams theta;
  theta.sigma = snapshot::read_f64(in);
  theta.length = snapshot::read_f64(in);
  double noise_floor = snapshot::read_f64(in);
  const bool center = snapshot::read_u32(in) != 0;
  TrainingSet ts;
  ts.states = snapshot::read_matrix(in);
  ts.controls = snapshot::read_matrix(in);
  ts.point_weights = snapshot::read_vector(in);
  return fit(std::move(ts), theta, noise_floor, center);
}

}  // namespace cslearn::gpr
