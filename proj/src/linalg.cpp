#include "obal/linalg.hpp"

#include <cmath>

namespace obal {

namespace {

void check_square_symmetric(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw std::invalid_argument(std::string(name) + ": matrix must be square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (((m - m.transpose()).cwiseAbs().maxCoeff()) > 1e-10 * scale) {
    throw std::invalid_argument(std::string(name) + ": matrix not symmetric");
  }
}

}  // namespace

AlignmentTransform AlignmentTransform::identity(int d) {
  AlignmentTransform t;
  t.matrix = Eigen::MatrixXd::Identity(d, d);
  t.effective_rank = d;
  t.source_spectrum = Eigen::VectorXd::Ones(d);
  t.target_spectrum = Eigen::VectorXd::Ones(d);
  return t;
}

Eigen::MatrixXd regularized_covariance(const DataBatch& batch,
                                       std::span<const double> weights) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int d = batch.dimension();
  if (n < 2) {
    throw std::invalid_argument("regularized_covariance: needs >= 2 rows");
  }
  if (!weights.empty()) {
    if (weights.size() != batch.size()) {
      throw std::invalid_argument("regularized_covariance: weight count mismatch");
    }
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0 || !std::isfinite(w)) {
        throw std::invalid_argument("regularized_covariance: weights must be nonnegative");
      }
      total += w;
    }
    if (total == 0.0) {
      throw std::invalid_argument("regularized_covariance: all-zero weights");
    }
  }

  Eigen::MatrixXd scaled = batch.feature_matrix();
  if (!weights.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      scaled.row(i) *= weights[static_cast<std::size_t>(i)];
    }
  }
  const Eigen::RowVectorXd mean = scaled.colwise().mean();
  scaled.rowwise() -= mean;
  Eigen::MatrixXd cov =
      (scaled.transpose() * scaled) / static_cast<double>(n - 1);
  cov = ((cov + cov.transpose()) * 0.5).eval();
  cov += Eigen::MatrixXd::Identity(d, d);
  return cov;
}

double alignment_objective(const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& c_source,
                           const Eigen::MatrixXd& c_target) {
  return (a.transpose() * c_source * a - c_target).squaredNorm();
}

AlignmentTransform coral_transform(const Eigen::MatrixXd& c_source,
                                   const Eigen::MatrixXd& c_target) {
  check_square_symmetric(c_source, "coral_transform(C_S)");
  check_square_symmetric(c_target, "coral_transform(C_T)");
  if (c_source.rows() != c_target.rows()) {
    throw std::invalid_argument("coral_transform: dimension mismatch");
  }
  const int d = static_cast<int>(c_source.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(c_source);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_t(c_target);
  if (es_s.info() != Eigen::Success || es_t.info() != Eigen::Success) {
    throw std::runtime_error("coral_transform: eigendecomposition failed");
  }
  const Eigen::VectorXd ev_s = es_s.eigenvalues();  // ascending
  const Eigen::VectorXd ev_t = es_t.eigenvalues();

  const double tol_s = kRankEpsilon * std::max(0.0, ev_s(d - 1));
  const double tol_t = kRankEpsilon * std::max(0.0, ev_t(d - 1));
  if (ev_s(0) < -1e-8 * std::max(1.0, std::abs(ev_s(d - 1))) ||
      ev_t(0) < -1e-8 * std::max(1.0, std::abs(ev_t(d - 1)))) {
    throw std::invalid_argument("coral_transform: input not positive semi-definite");
  }

  int rank_s = 0;
  for (int i = 0; i < d; ++i) {
    if (ev_s(i) > tol_s && ev_s(i) > 0.0) ++rank_s;
  }
  int rank_t = 0;
  for (int i = 0; i < d; ++i) {
    if (ev_t(i) > tol_t && ev_t(i) > 0.0) ++rank_t;
  }
  const int r = std::min(rank_s, rank_t);

  // Whitening: U_S diag(lambda^{-1/2} on the non-null part) U_S^T.
  Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < d; ++i) {
    if (ev_s(i) > tol_s && ev_s(i) > 0.0) inv_sqrt(i) = 1.0 / std::sqrt(ev_s(i));
  }
  const Eigen::MatrixXd whiten =
      es_s.eigenvectors() * inv_sqrt.asDiagonal() * es_s.eigenvectors().transpose();

  // Re-coloring with the r largest target eigenpairs (ascending storage,
  // so the top block sits at the high indices).
  Eigen::MatrixXd recolor = Eigen::MatrixXd::Zero(d, d);
  for (int i = d - r; i < d; ++i) {
    recolor += std::sqrt(std::max(0.0, ev_t(i))) * es_t.eigenvectors().col(i) *
               es_t.eigenvectors().col(i).transpose();
  }

  AlignmentTransform t;
  t.matrix = whiten * recolor;
  t.effective_rank = r;
  t.source_spectrum = ev_s;
  t.target_spectrum = ev_t;
  if (!t.matrix.allFinite()) {
    throw std::runtime_error("coral_transform: non-finite transform");
  }
  return t;
}

DataBatch apply_alignment(const DataBatch& batch,
                          std::span<const double> weights,
                          const AlignmentTransform& transform) {
  if (transform.dimension() != batch.dimension()) {
    throw std::invalid_argument("apply_alignment: dimension mismatch");
  }
  if (!weights.empty() && weights.size() != batch.size()) {
    throw std::invalid_argument("apply_alignment: weight count mismatch");
  }
  std::vector<Instance> out;
  out.reserve(batch.size());
  Eigen::RowVectorXd row(batch.dimension());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Instance& src = batch.row(i);
    const double w = weights.empty() ? 1.0 : weights[i];
    for (int j = 0; j < batch.dimension(); ++j) row(j) = w * src.features[j];
    const Eigen::RowVectorXd mapped = row * transform.matrix;
    std::vector<double> feats(mapped.data(), mapped.data() + mapped.size());
    out.emplace_back(std::move(feats), src.label, src.timestamp);
  }
  return DataBatch(std::move(out), batch.class_count());
}

}  // namespace obal
