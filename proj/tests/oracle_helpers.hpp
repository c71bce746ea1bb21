#pragma once

// Test-only oracles, kept independent of the library's implementation paths.

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace oracle {

// Frobenius objective of the alignment problem, recomputed locally.
inline double frobenius_objective(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& cs,
                                  const Eigen::MatrixXd& ct) {
  return (a.transpose() * cs * a - ct).squaredNorm();
}

// Brute-force numerical minimizer of ||A^T C_S A - C_T||_F^2 over dense A.
// Plain gradient descent with Armijo backtracking from A = I. For symmetric
// C_S the gradient is 4 C_S A (A^T C_S A - C_T).
inline Eigen::MatrixXd minimize_alignment_objective(const Eigen::MatrixXd& cs,
                                                    const Eigen::MatrixXd& ct,
                                                    int max_iters = 20000,
                                                    double grad_tol = 1e-10) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(cs.rows(), cs.cols());
  double f = frobenius_objective(a, cs, ct);
  double step = 1e-2;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXd residual = a.transpose() * cs * a - ct;
    const Eigen::MatrixXd grad = 4.0 * cs * a * residual;
    const double gnorm = grad.norm();
    if (gnorm < grad_tol) break;
    // Backtracking line search.
    double t = step;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::MatrixXd cand = a - t * grad;
      const double fc = frobenius_objective(cand, cs, ct);
      if (fc < f - 1e-4 * t * gnorm * gnorm) {
        a = cand;
        f = fc;
        step = t * 1.5;  // be a bit more ambitious next round
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    if (f < 1e-16) break;
  }
  return a;
}

// Random symmetric positive-definite matrix with comfortable conditioning.
inline Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd b(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) b(i, j) = gauss(rng);
  Eigen::MatrixXd m = b * b.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
  return ((m + m.transpose()) * 0.5).eval();
}

}  // namespace oracle
