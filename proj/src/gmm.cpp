#include "obal/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace obal {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // ln(2*pi)

// log N(x; mu, Sigma) through the component's Cholesky factor.
double gaussian_log_density(const Eigen::VectorXd& x,
                            const GmmComponent& component) {
  const Eigen::LLT<Eigen::MatrixXd> llt(component.covariance);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("gmm: component covariance not positive definite");
  }
  const Eigen::VectorXd diff = x - component.mean;
  const Eigen::VectorXd z = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    log_det += 2.0 * std::log(llt.matrixL()(i, i));
  }
  return -0.5 * (x.size() * kLog2Pi + log_det + z.squaredNorm());
}

Eigen::VectorXd instance_vector(const Instance& instance, int dimension) {
  if (static_cast<int>(instance.features.size()) != dimension) {
    throw std::invalid_argument("gmm: feature dimension mismatch");
  }
  Eigen::VectorXd x(dimension);
  for (int i = 0; i < dimension; ++i) x(i) = instance.features[i];
  return x;
}

// k-means++ seeding: first center uniform, each next center drawn with
// probability proportional to the squared distance to the closest chosen
// center. Returns row indices; fewer than k when the batch has fewer
// distinct rows.
std::vector<int> kmeanspp_seed(const Eigen::MatrixXd& rows, int k,
                               std::uint64_t seed) {
  const int n = static_cast<int>(rows.rows());
  std::mt19937_64 rng(seed);
  std::vector<int> centers;
  std::uniform_int_distribution<int> first(0, n - 1);
  centers.push_back(first(rng));
  Eigen::VectorXd min_sq =
      (rows.rowwise() - rows.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = min_sq.sum();
    if (total <= 0.0) break;  // every row coincides with a chosen center
    std::uniform_real_distribution<double> pick(0.0, total);
    double target = pick(rng);
    int chosen = n - 1;
    for (int i = 0; i < n; ++i) {
      target -= min_sq(i);
      if (target <= 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(chosen);
    min_sq = min_sq.cwiseMin(
        (rows.rowwise() - rows.row(chosen)).rowwise().squaredNorm());
  }
  return centers;
}

struct EStepResult {
  Eigen::MatrixXd responsibilities;  // n x K
  double log_likelihood = 0.0;
};

EStepResult e_step(const Eigen::MatrixXd& rows,
                   const std::vector<GmmComponent>& components) {
  const int n = static_cast<int>(rows.rows());
  const int k = static_cast<int>(components.size());
  Eigen::MatrixXd log_joint(n, k);
  for (int c = 0; c < k; ++c) {
    const double log_w = std::log(components[c].weight);
    for (int i = 0; i < n; ++i) {
      log_joint(i, c) =
          log_w + gaussian_log_density(rows.row(i).transpose(), components[c]);
    }
  }
  EStepResult out;
  out.responsibilities.resize(n, k);
  for (int i = 0; i < n; ++i) {
    const double top = log_joint.row(i).maxCoeff();
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
      out.responsibilities(i, c) = std::exp(log_joint(i, c) - top);
      total += out.responsibilities(i, c);
    }
    out.responsibilities.row(i) /= total;
    out.log_likelihood += top + std::log(total);
  }
  return out;
}

std::vector<GmmComponent> m_step(const Eigen::MatrixXd& rows,
                                 const Eigen::MatrixXd& responsibilities,
                                 const std::vector<GmmComponent>& previous,
                                 double reg_floor) {
  const int n = static_cast<int>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  const int k = static_cast<int>(responsibilities.cols());
  std::vector<GmmComponent> components(k);
  double weight_total = 0.0;
  for (int c = 0; c < k; ++c) {
    const double nk = responsibilities.col(c).sum();
    if (nk < 1e-12) {
      // Collapsed component: freeze its shape, let its weight vanish.
      components[c] = previous[c];
      components[c].weight = nk / n;
    } else {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
      for (int i = 0; i < n; ++i) {
        mean += responsibilities(i, c) * rows.row(i).transpose();
      }
      mean /= nk;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd diff = rows.row(i).transpose() - mean;
        cov += responsibilities(i, c) * diff * diff.transpose();
      }
      cov /= nk;
      cov = ((cov + cov.transpose()) * 0.5).eval();
      cov += reg_floor * Eigen::MatrixXd::Identity(d, d);
      components[c] = {std::move(mean), std::move(cov), nk / n};
    }
    weight_total += components[c].weight;
  }
  for (auto& component : components) component.weight /= weight_total;
  return components;
}

// Closed-form single-Gaussian fit: MLE mean and covariance plus the floor.
GmmModel fit_single(const Eigen::MatrixXd& rows, double reg_floor) {
  const int n = static_cast<int>(rows.rows());
  const int d = static_cast<int>(rows.cols());
  GmmComponent component;
  component.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - component.mean.transpose();
  component.covariance =
      (centered.transpose() * centered) / n +
      reg_floor * Eigen::MatrixXd::Identity(d, d);
  component.weight = 1.0;

  GmmModel model;
  model.dimension = d;
  model.components.push_back(std::move(component));
  model.final_log_likelihood = e_step(rows, model.components).log_likelihood;
  model.iterations = 0;
  model.log_likelihood_trace = {model.final_log_likelihood};
  return model;
}

}  // namespace

GmmModel fit_gmm(const DataBatch& batch, int k, const EmConfig& config) {
  if (k < 1) throw std::invalid_argument("fit_gmm: K must be >= 1");
  if (static_cast<std::size_t>(k) > batch.size()) {
    throw std::invalid_argument("fit_gmm: K exceeds the batch row count");
  }
  const Eigen::MatrixXd rows = batch.feature_matrix();
  if (k == 1) return fit_single(rows, config.reg_floor);

  const std::vector<int> centers = kmeanspp_seed(rows, k, config.seed);
  if (static_cast<int>(centers.size()) < k) {
    // Fewer distinct rows than components: the mixture is unidentifiable.
    GmmModel model = fit_single(rows, config.reg_floor);
    model.degenerate_fallback = true;
    return model;
  }

  // Hard-assign rows to the nearest seed to form initial components.
  const int n = static_cast<int>(rows.rows());
  Eigen::MatrixXd assignment = Eigen::MatrixXd::Zero(n, k);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double sq = (rows.row(i) - rows.row(centers[c])).squaredNorm();
      if (sq < best_sq) {
        best_sq = sq;
        best = c;
      }
    }
    assignment(i, best) = 1.0;
  }
  std::vector<GmmComponent> seeds(k);
  for (int c = 0; c < k; ++c) {
    seeds[c].mean = rows.row(centers[c]).transpose();
    seeds[c].covariance = Eigen::MatrixXd::Identity(rows.cols(), rows.cols());
  }
  std::vector<GmmComponent> current =
      m_step(rows, assignment, seeds, config.reg_floor);

  GmmModel model;
  model.dimension = static_cast<int>(rows.cols());

  EStepResult e = e_step(rows, current);
  model.log_likelihood_trace.push_back(e.log_likelihood);
  double ll_prev = e.log_likelihood;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    std::vector<GmmComponent> candidate =
        m_step(rows, e.responsibilities, current, config.reg_floor);
    const EStepResult e_next = e_step(rows, candidate);
    if (e_next.log_likelihood < ll_prev) {
      // Only regularization can push the likelihood down; stop on the last
      // accepted parameters so the trace stays nondecreasing.
      break;
    }
    current = std::move(candidate);
    e = e_next;
    model.log_likelihood_trace.push_back(e.log_likelihood);
    const double gain = e.log_likelihood - ll_prev;
    ll_prev = e.log_likelihood;
    if (gain < config.tol) break;
  }

  model.components = std::move(current);
  model.final_log_likelihood = ll_prev;
  model.iterations =
      static_cast<int>(model.log_likelihood_trace.size()) - 1;
  return model;
}

GmmModel fit_gmm_bic(const DataBatch& batch, int k_max,
                     const EmConfig& config) {
  if (k_max < 1) throw std::invalid_argument("fit_gmm_bic: k_max must be >= 1");
  const double n = static_cast<double>(batch.size());
  const double d = batch.dimension();
  GmmModel best;
  double best_bic = std::numeric_limits<double>::infinity();
  const int k_cap = std::min<int>(k_max, static_cast<int>(batch.size()));
  for (int k = 1; k <= k_cap; ++k) {
    EmConfig per_k = config;
    per_k.seed = mix_seed(config.seed, static_cast<std::uint64_t>(k));
    GmmModel model = fit_gmm(batch, k, per_k);
    const double kk = model.component_count();
    const double params = (kk - 1) + kk * d + kk * d * (d + 1) / 2.0;
    const double bic =
        -2.0 * model.final_log_likelihood + params * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(model);
    }
  }
  return best;
}

double mixture_density(const GmmModel& model, const Instance& instance) {
  const Eigen::VectorXd x = instance_vector(instance, model.dimension);
  double density = 0.0;
  for (const GmmComponent& component : model.components) {
    density +=
        component.weight * std::exp(gaussian_log_density(x, component));
  }
  return density;
}

double max_component_likelihood(const GmmModel& model,
                                const Instance& instance) {
  if (model.components.empty()) {
    throw std::logic_error("gmm: model has no components");
  }
  const Eigen::VectorXd x = instance_vector(instance, model.dimension);
  double best = -std::numeric_limits<double>::infinity();
  for (const GmmComponent& component : model.components) {
    best = std::max(best, gaussian_log_density(x, component));
  }
  return std::max(std::exp(best), std::numeric_limits<double>::min());
}

double normalized_max_component_likelihood(const GmmModel& model,
                                           const Instance& instance) {
  if (model.components.empty()) {
    throw std::logic_error("gmm: model has no components");
  }
  const Eigen::VectorXd x = instance_vector(instance, model.dimension);
  double best = -std::numeric_limits<double>::infinity();
  double best_peak = 0.0;
  for (const GmmComponent& component : model.components) {
    const double log_density = gaussian_log_density(x, component);
    if (log_density > best) {
      best = log_density;
      best_peak = gaussian_log_density(component.mean, component);
    }
  }
  return std::max(std::exp(best - best_peak),
                  std::numeric_limits<double>::min());
}

nlohmann::json gmm_to_json(const GmmModel& model) {
  nlohmann::json components = nlohmann::json::array();
  for (const GmmComponent& c : model.components) {
    nlohmann::json cov = nlohmann::json::array();
    for (int i = 0; i < c.covariance.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < c.covariance.cols(); ++j) {
        row.push_back(c.covariance(i, j));
      }
      cov.push_back(std::move(row));
    }
    components.push_back(
        {{"mean", std::vector<double>(c.mean.begin(), c.mean.end())},
         {"covariance", std::move(cov)},
         {"weight", c.weight}});
  }
  return {{"format", 1},
          {"type", "gmm"},
          {"dimension", model.dimension},
          {"components", std::move(components)},
          {"final_log_likelihood", model.final_log_likelihood},
          {"iterations", model.iterations},
          {"log_likelihood_trace", model.log_likelihood_trace},
          {"degenerate_fallback", model.degenerate_fallback}};
}

GmmModel gmm_from_json(const nlohmann::json& doc) {
  if (doc.at("type") != "gmm" || doc.at("format") != 1) {
    throw std::invalid_argument("snapshot: not a gmm v1");
  }
  GmmModel model;
  model.dimension = doc.at("dimension").get<int>();
  for (const auto& cj : doc.at("components")) {
    GmmComponent c;
    const auto mean = cj.at("mean").get<std::vector<double>>();
    c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    const auto& cov = cj.at("covariance");
    c.covariance.resize(model.dimension, model.dimension);
    for (int i = 0; i < model.dimension; ++i) {
      for (int j = 0; j < model.dimension; ++j) {
        c.covariance(i, j) = cov.at(i).at(j).get<double>();
      }
    }
    c.weight = cj.at("weight").get<double>();
    model.components.push_back(std::move(c));
  }
  model.final_log_likelihood = doc.at("final_log_likelihood").get<double>();
  model.iterations = doc.at("iterations").get<int>();
  model.log_likelihood_trace =
      doc.at("log_likelihood_trace").get<std::vector<double>>();
  model.degenerate_fallback = doc.at("degenerate_fallback").get<bool>();
  return model;
}

}  // namespace obal
