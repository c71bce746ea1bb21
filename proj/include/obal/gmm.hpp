#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "obal/core.hpp"

namespace obal {

struct EmConfig {
  int max_iters = 200;
  double tol = 1e-6;
  double reg_floor = 1e-6;  // added to every covariance diagonal
  std::uint64_t seed = 0;
};

struct GmmComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double weight = 0.0;
};

/// A fitted Gaussian mixture: P(x) = sum_k w_k N(x; mu_k, Sigma_k).
/// Immutable once fitted; safe to share across streams.
struct GmmModel {
  std::vector<GmmComponent> components;
  int dimension = 0;

  // Fit diagnostics.
  double final_log_likelihood = 0.0;
  int iterations = 0;
  /// Log-likelihood after initialization and after each accepted EM step;
  /// nondecreasing by construction.
  std::vector<double> log_likelihood_trace;
  /// True when a K > 1 request hit a degenerate batch (fewer distinct rows
  /// than components) and the fit fell back to K = 1.
  bool degenerate_fallback = false;

  int component_count() const { return static_cast<int>(components.size()); }
};

/// Fits a K-component mixture by EM with k-means++ seeding (deterministic
/// given config.seed). Log-likelihood is nondecreasing across the recorded
/// trace; an EM step that would lower it (possible only through covariance
/// regularization) is rejected and ends the fit. Throws
/// std::invalid_argument when K < 1 or K exceeds the row count.
GmmModel fit_gmm(const DataBatch& batch, int k, const EmConfig& config = {});

/// Fits K = 1..k_max and keeps the model with the lowest BIC
/// (ties go to the smaller K).
GmmModel fit_gmm_bic(const DataBatch& batch, int k_max = 5,
                     const EmConfig& config = {});

/// Mixture density P(x) = sum_k w_k N(x; mu_k, Sigma_k).
double mixture_density(const GmmModel& model, const Instance& instance);

/// max_k N(x; mu_k, Sigma_k): the raw conditional density of the best
/// component, unweighted by w_k. Clamped to the smallest positive normal
/// double so the value stays positive for every finite input.
double max_component_likelihood(const GmmModel& model,
                                const Instance& instance);

/// max_component_likelihood divided by the winning component's density at
/// its own mean: exp(-(x-mu)' Sigma^-1 (x-mu) / 2) in (0, 1]. The scale-free
/// variant used where the likelihood acts as a multiplicative weight.
double normalized_max_component_likelihood(const GmmModel& model,
                                           const Instance& instance);

nlohmann::json gmm_to_json(const GmmModel& model);
GmmModel gmm_from_json(const nlohmann::json& doc);

}  // namespace obal
