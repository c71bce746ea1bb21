#include "obal/drift.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace obal {

DdmDetector::DdmDetector(int warm_up) : warm_up_(warm_up) {
  if (warm_up < 1) {
    throw std::invalid_argument("DdmDetector: warm_up must be >= 1");
  }
  reset();
}

void DdmDetector::reset() {
  count_ = 0;
  errors_ = 0.0;
  p_min_ = std::numeric_limits<double>::infinity();
  s_min_ = std::numeric_limits<double>::infinity();
  status_ = DriftStatus::kStable;
}

double DdmDetector::deviation() const {
  if (count_ <= 0) return 0.0;
  const double p = error_rate();
  return std::sqrt(p * (1.0 - p) / count_);
}

DriftStatus DdmDetector::update(bool correct) {
  ++count_;
  if (!correct) errors_ += 1.0;
  const double p = error_rate();
  const double s = deviation();

  if (count_ < warm_up_) {
    status_ = DriftStatus::kStable;
    return status_;
  }
  if (p + s <= p_min_ + s_min_) {
    p_min_ = p;
    s_min_ = s;
  }
  if (p + s > p_min_ + s_min_ && p + s >= p_min_ + 3.0 * s_min_) {
    reset();  // counters start fresh; the drift is still reported once
    status_ = DriftStatus::kDrift;
  } else if (p + s > p_min_ + s_min_ && p + s >= p_min_ + 2.0 * s_min_) {
    status_ = DriftStatus::kWarning;
  } else {
    status_ = DriftStatus::kStable;
  }
  return status_;
}

bool window_drift_decision(double mu_ref, double mu_det, double sigma, int n,
                           double z_alpha, bool literal) {
  const double shift = mu_det - mu_ref;
  if (!(std::abs(shift) > 0.0)) return false;  // identical windows
  const double threshold = z_alpha * sigma / std::sqrt(n);
  if (literal) return shift >= threshold;
  return std::abs(shift) >= threshold;
}

TargetWindowDetector::TargetWindowDetector(TargetWindowConfig config)
    : config_(config) {
  if (config.window_size < 1) {
    throw std::invalid_argument(
        "TargetWindowDetector: window_size must be >= 1");
  }
  if (config.z_alpha < 0.0) {
    throw std::invalid_argument("TargetWindowDetector: z_alpha must be >= 0");
  }
}

void TargetWindowDetector::warm_up(std::span<const double> likelihoods) {
  for (double v : likelihoods) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("target window: non-finite likelihood");
    }
    values_.push_back(v);
    if (values_.size() > 2 * static_cast<std::size_t>(config_.window_size)) {
      values_.pop_front();
    }
  }
}

bool TargetWindowDetector::update(double likelihood) {
  warm_up({&likelihood, 1});
  if (!warmed()) return false;
  return window_drift_decision(mu_ref(), mu_det(), sigma(),
                               config_.window_size, config_.z_alpha,
                               config_.eq11_literal);
}

double TargetWindowDetector::mu_ref() const {
  const int n = config_.window_size;
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += values_[i];
  return total / n;
}

double TargetWindowDetector::mu_det() const {
  const int n = config_.window_size;
  double total = 0.0;
  for (std::size_t i = n; i < values_.size(); ++i) total += values_[i];
  return total / n;
}

double TargetWindowDetector::sigma() const {
  const int n = config_.window_size;
  if (n < 2) return 0.0;
  const double mean = mu_ref();
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    ss += (values_[i] - mean) * (values_[i] - mean);
  }
  return std::sqrt(ss / (n - 1));
}

void TargetWindowDetector::reset() { values_.clear(); }

}  // namespace obal

namespace obal {

nlohmann::json DdmDetector::to_json() const {
  return {{"warm_up", warm_up_},
          {"count", count_},
          {"errors", errors_},
          {"p_min", p_min_},
          {"s_min", s_min_},
          {"status", static_cast<int>(status_)}};
}

DdmDetector DdmDetector::from_json(const nlohmann::json& j) {
  DdmDetector ddm(j.at("warm_up").get<int>());
  ddm.count_ = j.at("count").get<std::int64_t>();
  ddm.errors_ = j.at("errors").get<double>();
  ddm.p_min_ = j.at("p_min").get<double>();
  ddm.s_min_ = j.at("s_min").get<double>();
  ddm.status_ = static_cast<DriftStatus>(j.at("status").get<int>());
  return ddm;
}

nlohmann::json TargetWindowDetector::to_json() const {
  return {{"window_size", config_.window_size},
          {"z_alpha", config_.z_alpha},
          {"eq11_literal", config_.eq11_literal},
          {"values", std::vector<double>(values_.begin(), values_.end())}};
}

TargetWindowDetector TargetWindowDetector::from_json(const nlohmann::json& j) {
  TargetWindowConfig config;
  config.window_size = j.at("window_size").get<int>();
  config.z_alpha = j.at("z_alpha").get<double>();
  config.eq11_literal = j.at("eq11_literal").get<bool>();
  TargetWindowDetector detector(config);
  const auto values = j.at("values").get<std::vector<double>>();
  detector.warm_up(values);
  return detector;
}

}  // namespace obal
