#include "obal/serialize.hpp"

#include <stdexcept>

namespace obal {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw std::invalid_argument("matrix document must be a nested array");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) {
      throw std::invalid_argument("matrix document has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) {
    throw std::invalid_argument("vector document must be an array");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json transform_to_json(const AlignmentTransform& transform) {
  return json{{"matrix", matrix_to_json(transform.matrix)},
              {"effective_rank", transform.effective_rank},
              {"source_spectrum", vector_to_json(transform.source_spectrum)},
              {"target_spectrum", vector_to_json(transform.target_spectrum)}};
}

AlignmentTransform transform_from_json(const json& j) {
  AlignmentTransform transform;
  transform.matrix = matrix_from_json(j.at("matrix"));
  transform.effective_rank = j.at("effective_rank").get<int>();
  transform.source_spectrum = vector_from_json(j.at("source_spectrum"));
  transform.target_spectrum = vector_from_json(j.at("target_spectrum"));
  if (transform.matrix.rows() != transform.matrix.cols()) {
    throw std::invalid_argument("transform matrix must be square");
  }
  return transform;
}

json batch_to_json(const DataBatch& batch) {
  json rows = json::array();
  for (const Instance& instance : batch.rows()) {
    json row{{"features", instance.features},
             {"timestamp", instance.timestamp}};
    if (instance.label.has_value()) row["label"] = *instance.label;
    rows.push_back(std::move(row));
  }
  return json{{"class_count", batch.class_count()}, {"rows", std::move(rows)}};
}

DataBatch batch_from_json(const json& j) {
  std::vector<Instance> rows;
  for (const json& row : j.at("rows")) {
    Instance instance;
    instance.features = row.at("features").get<std::vector<double>>();
    instance.timestamp = row.at("timestamp").get<std::int64_t>();
    if (row.contains("label")) instance.label = row.at("label").get<int>();
    rows.push_back(std::move(instance));
  }
  return DataBatch(std::move(rows), j.at("class_count").get<int>());
}

}  // namespace obal
