#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cslearn/gpr.hpp"

namespace cslearn::conditioning {

// Rank-revealing QR of a d x n stack of training states (one column per
// point): stack * P = Q * R with |diag(R)| nonincreasing over the first m
// entries and the leading m columns a provably well-conditioned basis. The
// strong variant bounds sigma_m(R11) below by
// sigma_m(stack) / sqrt(1 + f^2 m (n - m)).
struct RrqrResult {
  std::vector<int> permutation;  // column order; first m entries are the keepers
  Eigen::MatrixXd q;             // d x d orthogonal
  Eigen::MatrixXd r;             // d x n upper triangular (in permuted order)
  int m = 0;                     // requested subset size
  double f = 2.0;                // swap threshold used
};

// Greedy column-pivoted Householder QR followed by Gu/Eisenstat swaps until
// no leading-block exchange can grow |det(R11)| by more than factor f.
// Requires 1 <= m <= min(d, n). Ties in the pivot norm go to the lowest
// original column index, which keeps the result deterministic.
RrqrResult rrqr(const Eigen::MatrixXd& stack, int m, double f = 2.0);

// Original indices of the m columns to keep, ascending. Up to min(d, n)
// columns come from rrqr; a larger m continues with greedy farthest-point
// picks over the remaining columns, since past the rank bound conditioning
// has no more signal and coverage of the data manifold is what is left to
// optimize.
std::vector<int> select_indices(const Eigen::MatrixXd& stack, int m, double f = 2.0);

// The m selected training points, in their original relative order.
gpr::TrainingSet select_subset(const gpr::TrainingSet& data, int m, double f = 2.0);

// Largest leading subset whose spread |r_11|/|r_kk| on the pivoted diagonal
// stays within cond_ceiling, clamped to [min(d, n), n] so no state dimension
// is starved. Returns n untouched when the whole stack already complies.
int choose_subset_size(const Eigen::MatrixXd& stack, double cond_ceiling = 1e4);

// |r_11|/|r_kk| of the pivoted factorization at k = min(m, d, n), an estimate
// (and upper-bound witness) of the selected block's spread. Exposed for
// reporting.
double diag_spread(const Eigen::MatrixXd& stack, int m);

}  // namespace cslearn::conditioning
