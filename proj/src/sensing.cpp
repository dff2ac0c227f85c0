#include "cslearn/sensing.hpp"

#include <cmath>

#include "cslearn/error.hpp"

namespace cslearn::sensing {

TaylorModel build_taylor_model(int order, double tick) {
  if (order < 0) throw Error("expansion order must be >= 0");
  if (!(tick > 0.0)) throw Error("tick must be positive");
  TaylorModel m;
  m.order = order;
  m.tick = tick;
  int n = order + 1;
  m.phi = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    double term = 1.0;
    for (int b = a; b < n; ++b) {
      m.phi(a, b) = term;
      term *= tick / static_cast<double>(b - a + 1);
    }
  }
  m.gamma.resize(n);
  for (int c = 0; c < n; ++c) {
    int p = n - c;  // r + 1 - c
    double term = 1.0;
    for (int i = 1; i <= p; ++i) term *= tick / static_cast<double>(i);
    m.gamma(c) = term;
  }
  return m;
}

DualRateFilter::DualRateFilter(const Config& config) : cfg_(config) {
  int n = cfg_.model.order + 1;
  if (cfg_.model.phi.rows() != n || cfg_.model.phi.cols() != n ||
      cfg_.model.gamma.size() != n) {
    throw Error("Taylor model matrices do not match its order");
  }
  if (cfg_.channel.frame_period_ticks < 1) throw Error("frame period must be >= 1 tick");
  if (cfg_.channel.delay_ticks < 0) throw Error("negative measurement delay");
  if (cfg_.channel.measurement_variance < 0.0) throw Error("negative measurement variance");
  if (!(cfg_.rho > 0.0 && cfg_.rho <= 1.0)) throw Error("rho must be in (0, 1]");
  if (!(cfg_.q_init > 0.0)) throw Error("q_init must be positive");
  if (!(cfg_.q_floor >= 0.0)) throw Error("q_floor must be >= 0");
  if (cfg_.x0.size() == 0) {
    cfg_.x0 = Eigen::VectorXd::Zero(n);
  } else if (cfg_.x0.size() != n) {
    throw Error("x0 does not match the Taylor state dimension");
  }
  if (cfg_.p0.size() == 0) {
    cfg_.p0 = Eigen::MatrixXd::Identity(n, n);
  } else if (cfg_.p0.rows() != n || cfg_.p0.cols() != n) {
    throw Error("p0 does not match the Taylor state dimension");
  }
  int needed = cfg_.channel.delay_ticks + cfg_.channel.frame_period_ticks + 2;
  if (cfg_.history_ticks == 0) {
    cfg_.history_ticks = needed;
  } else if (cfg_.history_ticks < needed) {
    throw Error("history ring shorter than delay + frame period");
  }
  q_ = cfg_.q_init;
  history_.push_back({cfg_.x0, cfg_.p0});
}

void DualRateFilter::propagate(Snapshot& s) const {
  s.x = cfg_.model.phi * s.x;
  s.p = cfg_.model.phi * s.p * cfg_.model.phi.transpose() +
        q_ * cfg_.model.gamma * cfg_.model.gamma.transpose();
  s.p = 0.5 * (s.p + s.p.transpose()).eval();
}

void DualRateFilter::predict_tick() {
  Snapshot next = history_.back();
  propagate(next);
  history_.push_back(std::move(next));
  ++tick_;
  while (static_cast<int>(history_.size()) > cfg_.history_ticks + 1) {
    history_.pop_front();
    ++history_start_;
  }
}

DualRateFilter::Snapshot& DualRateFilter::at_tick(long tick) {
  long idx = tick - history_start_;
  if (idx < 0 || idx >= static_cast<long>(history_.size())) {
    throw Error("tick " + std::to_string(tick) + " outside the history ring");
  }
  return history_[static_cast<size_t>(idx)];
}

void DualRateFilter::measurement_update(double y, long tick) {
  int n_period = cfg_.channel.frame_period_ticks;
  if (tick <= 0 || tick % n_period != 0) {
    throw Error("frame tick " + std::to_string(tick) + " is not a multiple of the frame period");
  }
  if (tick > tick_) throw Error("frame from the future: tick " + std::to_string(tick));
  long capture = tick - cfg_.channel.delay_ticks;
  if (capture < 0) throw Error("frame captured before tick 0");

  Snapshot& s = at_tick(capture);
  double innovation = y - s.x(0);
  double variance = s.p(0, 0) + cfg_.channel.measurement_variance;
  if (!(variance > 0.0)) throw Error("degenerate innovation variance");
  Eigen::VectorXd gain = s.p.col(0) / variance;
  Eigen::RowVectorXd top = s.p.row(0);
  s.x += gain * innovation;
  s.p -= gain * top;
  s.p = 0.5 * (s.p + s.p.transpose()).eval();
  innovations_.push_back({innovation, variance});

  // Re-propagate the corrected past state to the head of the ring. Later
  // frames have not arrived yet, so the overwritten segment contained only
  // predictions.
  for (long t = capture + 1; t <= tick_; ++t) {
    Snapshot next = at_tick(t - 1);
    propagate(next);
    at_tick(t) = std::move(next);
  }
}

void DualRateFilter::adapt_noise() {
  if (innovations_.empty()) {
    throw Error("no innovations recorded since the last adaptation");
  }
  for (const Innovation& in : innovations_) {
    double implied = q_ * (in.nu * in.nu) / in.s;
    q_ = cfg_.rho * q_ + (1.0 - cfg_.rho) * implied;
    if (q_ < cfg_.q_floor) q_ = cfg_.q_floor;
  }
  innovations_.clear();
}

const Eigen::VectorXd& DualRateFilter::state() const { return history_.back().x; }

const Eigen::MatrixXd& DualRateFilter::covariance() const { return history_.back().p; }

double DualRateFilter::derivative(int k) const {
  if (k < 0 || k > cfg_.model.order) throw Error("derivative order out of range");
  return state()(k);
}

}  // namespace cslearn::sensing
