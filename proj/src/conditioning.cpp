#include "cslearn/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cslearn/error.hpp"

namespace cslearn::conditioning {

namespace {

struct Cpqr {
  std::vector<int> permutation;
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
};

// Householder QR with greedy column pivoting on residual norms. Ties go to
// the lowest original column index so duplicated columns order
// deterministically.
Cpqr cpqr(const Eigen::MatrixXd& a) {
  Eigen::Index d = a.rows();
  Eigen::Index n = a.cols();
  Eigen::Index steps = std::min(d, n);
  Cpqr out;
  out.permutation.resize(static_cast<size_t>(n));
  std::iota(out.permutation.begin(), out.permutation.end(), 0);
  out.q = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd work = a;

  for (Eigen::Index k = 0; k < steps; ++k) {
    Eigen::Index best = k;
    double best_norm = work.col(k).tail(d - k).norm();
    for (Eigen::Index j = k + 1; j < n; ++j) {
      double nj = work.col(j).tail(d - k).norm();
      if (nj > best_norm ||
          (nj == best_norm && out.permutation[j] < out.permutation[best])) {
        best = j;
        best_norm = nj;
      }
    }
    if (best != k) {
      work.col(k).swap(work.col(best));
      std::swap(out.permutation[static_cast<size_t>(k)], out.permutation[static_cast<size_t>(best)]);
    }
    if (best_norm == 0.0) continue;  // remaining block is zero; R stays zero

    Eigen::VectorXd x = work.col(k).tail(d - k);
    double alpha = (x(0) >= 0.0 ? -1.0 : 1.0) * x.norm();
    Eigen::VectorXd v = x;
    v(0) -= alpha;
    double vtv = v.squaredNorm();
    if (vtv > 0.0) {
      double beta = 2.0 / vtv;
      Eigen::RowVectorXd w = v.transpose() * work.block(k, k, d - k, n - k);
      work.block(k, k, d - k, n - k).noalias() -= beta * v * w;
      Eigen::VectorXd qv = out.q.block(0, k, d, d - k) * v;
      out.q.block(0, k, d, d - k).noalias() -= beta * qv * v.transpose();
    }
    work(k, k) = alpha;
    work.col(k).tail(d - k - 1).setZero();
  }
  out.r = work.triangularView<Eigen::Upper>();
  return out;
}

Eigen::MatrixXd permuted(const Eigen::MatrixXd& a, const std::vector<int>& perm) {
  Eigen::MatrixXd out(a.rows(), a.cols());
  for (size_t j = 0; j < perm.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = a.col(perm[j]);
  }
  return out;
}

// Grow a leading block of `block` kept columns to m total. Past the rank
// bound conditioning carries no more signal, so the tail switches objective:
// greedy farthest-point picks, maximizing the minimum distance to the columns
// already kept. That spreads the extras over the data manifold and keeps the
// kernel matrix of the selection well separated. Ties go to the lowest
// original index. Ascending result.
std::vector<int> extend_selection(const Eigen::MatrixXd& stack, const std::vector<int>& perm,
                                  int block, int m) {
  std::vector<int> idx(perm.begin(), perm.begin() + block);
  const int n = static_cast<int>(stack.cols());
  if (m > block) {
    std::vector<char> taken(static_cast<size_t>(n), 0);
    std::vector<double> dist(static_cast<size_t>(n),
                             std::numeric_limits<double>::infinity());
    for (int i : idx) taken[static_cast<size_t>(i)] = 1;
    for (int j = 0; j < n; ++j) {
      if (taken[static_cast<size_t>(j)]) continue;
      for (int i : idx) {
        dist[static_cast<size_t>(j)] = std::min(dist[static_cast<size_t>(j)],
                                                (stack.col(j) - stack.col(i)).norm());
      }
    }
    for (int picked = block; picked < m; ++picked) {
      int best = -1;
      double best_dist = -1.0;
      for (int j = 0; j < n; ++j) {
        if (!taken[static_cast<size_t>(j)] && dist[static_cast<size_t>(j)] > best_dist) {
          best = j;
          best_dist = dist[static_cast<size_t>(j)];
        }
      }
      idx.push_back(best);
      taken[static_cast<size_t>(best)] = 1;
      for (int j = 0; j < n; ++j) {
        if (taken[static_cast<size_t>(j)]) continue;
        dist[static_cast<size_t>(j)] = std::min(dist[static_cast<size_t>(j)],
                                                (stack.col(j) - stack.col(best)).norm());
      }
    }
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

RrqrResult rrqr(const Eigen::MatrixXd& stack, int m, double f) {
  Eigen::Index d = stack.rows();
  Eigen::Index n = stack.cols();
  if (n < 1 || d < 1) throw Error("empty stack");
  if (!stack.allFinite()) throw Error("non-finite stack entries");
  if (stack.norm() == 0.0) throw Error("all-zero stack");
  if (m < 1 || m > std::min(d, n)) {
    throw Error("subset size " + std::to_string(m) + " out of range [1, " +
                std::to_string(std::min(d, n)) + "]");
  }
  if (!(f >= 1.0)) throw Error("swap tolerance f must be >= 1");

  Cpqr base = cpqr(stack);
  std::vector<int> perm = base.permutation;
  double f2 = f * f;

  // Gu/Eisenstat swap phase: exchange a leading column for a trailing one
  // while that grows |det(R11)| by more than f. Each accepted swap multiplies
  // the determinant by > f > 1, so the loop terminates; the cap is a safety
  // net against floating-point cycling.
  if (m < n) {
    long cap = 4 * static_cast<long>(m) * static_cast<long>(n - m) + 16;
    for (long iter = 0; iter < cap; ++iter) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(permuted(stack, perm));
      Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
      Eigen::MatrixXd r11 = r.topLeftCorner(m, m);
      bool singular = false;
      for (int i = 0; i < m; ++i) {
        if (r11(i, i) == 0.0) singular = true;
      }
      if (singular) break;  // rank < m; the bound is vacuous here

      Eigen::MatrixXd a = r11.triangularView<Eigen::Upper>().solve(
          r.block(0, m, m, n - m));                       // R11^-1 R12
      Eigen::MatrixXd r11_inv = r11.inverse();
      Eigen::VectorXd row_inv_norm = r11_inv.rowwise().norm();  // 1/omega_i
      Eigen::VectorXd gamma(n - m);
      if (d > m) {
        gamma = r.block(m, m, d - m, n - m).colwise().norm();
      } else {
        gamma.setZero();
      }

      double best = f2;
      int bi = -1, bj = -1;
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n - m; ++j) {
          double crit = a(i, j) * a(i, j) +
                        gamma(j) * gamma(j) * row_inv_norm(i) * row_inv_norm(i);
          if (crit > best) {
            best = crit;
            bi = i;
            bj = j;
          }
        }
      }
      if (bi < 0) break;
      std::swap(perm[static_cast<size_t>(bi)], perm[static_cast<size_t>(m + bj)]);
    }
  }

  // Canonical order inside the kept block: re-pivot the m survivors so
  // |diag(R11)| is nonincreasing. The subset is unchanged, so the bound the
  // swap phase established still applies.
  {
    Eigen::MatrixXd kept(d, m);
    for (int j = 0; j < m; ++j) kept.col(j) = stack.col(perm[static_cast<size_t>(j)]);
    Cpqr inner = cpqr(kept);
    std::vector<int> head(m);
    for (int j = 0; j < m; ++j) head[j] = perm[static_cast<size_t>(inner.permutation[j])];
    std::copy(head.begin(), head.end(), perm.begin());
  }

  Cpqr fin = cpqr(permuted(stack, perm));
  // cpqr on an already-ordered matrix may still pivot among equal norms;
  // compose its permutation with ours to keep S*P = Q*R exact.
  std::vector<int> composed(perm.size());
  for (size_t j = 0; j < perm.size(); ++j) {
    composed[j] = perm[static_cast<size_t>(fin.permutation[j])];
  }

  RrqrResult res;
  res.permutation = std::move(composed);
  res.q = std::move(fin.q);
  res.r = std::move(fin.r);
  res.m = m;
  res.f = f;
  return res;
}

std::vector<int> select_indices(const Eigen::MatrixXd& stack, int m, double f) {
  const Eigen::Index n = stack.cols();
  if (m < 1 || m > n) {
    throw Error("subset size " + std::to_string(m) + " out of range [1, " + std::to_string(n) +
                "]");
  }
  const int block = static_cast<int>(std::min<Eigen::Index>(m, std::min(stack.rows(), n)));
  RrqrResult res = rrqr(stack, block, f);
  return extend_selection(stack, res.permutation, block, m);
}

gpr::TrainingSet select_subset(const gpr::TrainingSet& data, int m, double f) {
  Eigen::Index n = data.states.cols();
  if (m == static_cast<int>(n)) {
    if (m < 1) throw Error("subset size " + std::to_string(m) + " out of range");
    return data;
  }
  const std::vector<int> idx = select_indices(data.states, m, f);
  gpr::TrainingSet out;
  out.states.resize(data.states.rows(), m);
  out.controls.resize(data.controls.rows(), m);
  if (data.point_weights.size()) out.point_weights.resize(m);
  for (int j = 0; j < m; ++j) {
    out.states.col(j) = data.states.col(idx[static_cast<size_t>(j)]);
    out.controls.col(j) = data.controls.col(idx[static_cast<size_t>(j)]);
    if (data.point_weights.size()) {
      out.point_weights(j) = data.point_weights(idx[static_cast<size_t>(j)]);
    }
  }
  return out;
}

int choose_subset_size(const Eigen::MatrixXd& stack, double cond_ceiling) {
  if (!(cond_ceiling > 1.0)) throw Error("condition ceiling must be > 1");
  Eigen::Index d = stack.rows();
  Eigen::Index n = stack.cols();
  if (stack.norm() == 0.0) throw Error("all-zero stack");
  Cpqr base = cpqr(stack);
  Eigen::Index steps = std::min(d, n);
  double top = std::abs(base.r(0, 0));
  int m = 1;
  for (Eigen::Index k = 1; k < steps; ++k) {
    double rkk = std::abs(base.r(k, k));
    if (rkk == 0.0 || top / rkk > cond_ceiling) break;
    m = static_cast<int>(k) + 1;
  }
  int lo = static_cast<int>(std::min(d, n));
  return std::clamp(m, std::min(lo, static_cast<int>(n)), static_cast<int>(n));
}

double diag_spread(const Eigen::MatrixXd& stack, int m) {
  if (m < 1 || m > stack.cols()) throw Error("diag_spread: m out of range");
  Cpqr base = cpqr(stack);
  const Eigen::Index k = std::min<Eigen::Index>(m, std::min(stack.rows(), stack.cols()));
  double top = std::abs(base.r(0, 0));
  double bottom = std::abs(base.r(k - 1, k - 1));
  if (bottom == 0.0) return std::numeric_limits<double>::infinity();
  return top / bottom;
}

}  // namespace cslearn::conditioning
