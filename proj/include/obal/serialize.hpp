#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include "obal/core.hpp"
#include "obal/linalg.hpp"

namespace obal {

/// JSON helpers shared by every checkpointable component. Matrices are
/// stored as row-major nested arrays, batches as row documents; each
/// from_* function validates shape and throws std::invalid_argument on a
/// malformed document.

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

nlohmann::json transform_to_json(const AlignmentTransform& transform);
AlignmentTransform transform_from_json(const nlohmann::json& j);

nlohmann::json batch_to_json(const DataBatch& batch);
DataBatch batch_from_json(const nlohmann::json& j);

}  // namespace obal
