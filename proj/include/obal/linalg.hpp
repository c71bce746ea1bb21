#pragma once

#include <span>

#include <Eigen/Dense>

#include "obal/core.hpp"

namespace obal {

/// Closed-form covariance alignment: A maps a source batch into the target
/// covariance structure (whitening followed by re-coloring with the top-r
/// target eigenstructure, r = min(rank C_S, rank C_T)).
struct AlignmentTransform {
  Eigen::MatrixXd matrix;        // d x d
  int effective_rank = 0;        // r
  Eigen::VectorXd source_spectrum;  // eigenvalues of C_S at fit time
  Eigen::VectorXd target_spectrum;  // eigenvalues of C_T at fit time

  int dimension() const { return static_cast<int>(matrix.rows()); }

  static AlignmentTransform identity(int d);
};

/// Weighted sample covariance of the row-scaled batch plus the identity.
/// Each row is scaled by its weight before the covariance is taken
/// (a literal cov(w .* X) + I, not an importance-weighted covariance).
/// Denominator is n-1. Output is exactly symmetrized.
/// Empty `weights` means unit weights.
Eigen::MatrixXd regularized_covariance(const DataBatch& batch,
                                       std::span<const double> weights = {});

/// Relative eigenvalue threshold below which a direction counts as null.
inline constexpr double kRankEpsilon = 1e-10;

/// Frobenius objective of the alignment problem: ||A^T C_S A - C_T||_F^2.
double alignment_objective(const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& c_source,
                           const Eigen::MatrixXd& c_target);

/// Closed-form minimizer of alignment_objective for symmetric PSD inputs.
AlignmentTransform coral_transform(const Eigen::MatrixXd& c_source,
                                   const Eigen::MatrixXd& c_target);

/// Scales each row by its weight, then right-multiplies by A.
/// Labels and timestamps carry through unchanged.
DataBatch apply_alignment(const DataBatch& batch,
                          std::span<const double> weights,
                          const AlignmentTransform& transform);

}  // namespace obal
