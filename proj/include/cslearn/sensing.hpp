#pragma once

#include <Eigen/Dense>
#include <deque>
#include <vector>

namespace cslearn::sensing {

// Taylor-expansion state-space model of a smooth scalar signal: the state
// holds derivatives 0..r, phi propagates them over one tick, and gamma
// injects the truncated derivative (order r+1) as process noise.
struct TaylorModel {
  int order = 2;
  double tick = 1e-3;
  Eigen::MatrixXd phi;    // (r+1) x (r+1), phi(a,b) = T^(b-a)/(b-a)! for b >= a
  Eigen::VectorXd gamma;  // gamma(c) = T^(r+1-c)/(r+1-c)!
};

TaylorModel build_taylor_model(int order, double tick);

// A slow sensor reporting the signal with a fixed transport delay: the frame
// at tick j carries the position at tick j - delay_ticks and arrives at j,
// every frame_period_ticks.
struct DelayedMeasurementChannel {
  int frame_period_ticks = 33;  // ~30 Hz at a 1 kHz tick
  int delay_ticks = 33;         // one frame of latency
  double measurement_variance = 2.5e-5;
};

// Kalman filter running at the tick rate with delayed, subsampled position
// measurements. A delayed frame is applied against the stored estimate at its
// capture tick and the correction is re-propagated forward through the
// history ring (fixed-lag smoothing); memory stays bounded by the ring.
// Process noise is a scalar spectral density on the truncated derivative,
// adapted from innovations ("equivalent noise" style) with forgetting rho.
class DualRateFilter {
 public:
  struct Config {
    TaylorModel model;
    DelayedMeasurementChannel channel;
    Eigen::VectorXd x0;      // initial derivative state; zero if empty
    Eigen::MatrixXd p0;      // initial covariance; diagonal default if empty
    double q_init = 1.0;
    double q_floor = 1e-10;
    double rho = 0.98;       // forgetting factor for Q adaptation, in (0, 1]
    int history_ticks = 0;   // ring length; 0 = delay + period + margin
  };

  explicit DualRateFilter(const Config& config);

  // Advance one tick: x <- phi x, P <- phi P phi' + gamma q gamma'.
  void predict_tick();

  // Apply the frame that arrived at tick j (j must be a positive multiple of
  // the frame period and not ahead of the current tick). y is the measured
  // position at tick j - delay.
  void measurement_update(double y, long tick);

  // Fold recorded innovations into q: q <- rho q + (1-rho) q_implied, floored.
  // Requires at least one innovation since construction.
  void adapt_noise();

  long current_tick() const { return tick_; }
  const Eigen::VectorXd& state() const;
  const Eigen::MatrixXd& covariance() const;
  double position() const { return state()(0); }
  double derivative(int k) const;
  double process_noise() const { return q_; }
  int innovation_count() const { return static_cast<int>(innovations_.size()); }

 private:
  struct Snapshot {
    Eigen::VectorXd x;
    Eigen::MatrixXd p;
  };

  void propagate(Snapshot& s) const;
  Snapshot& at_tick(long tick);

  Config cfg_;
  double q_;
  long tick_ = 0;
  std::deque<Snapshot> history_;  // history_.back() is the current tick
  long history_start_ = 0;        // tick of history_.front()
  struct Innovation {
    double nu;
    double s;  // innovation variance
  };
  std::vector<Innovation> innovations_;
};

}  // namespace cslearn::sensing
