#include "ncl/etf.hpp"

#include <algorithm>

namespace ncl {

int ClassPrototypeMap::assign(int task, ClassId label) {
  if (task < 1) throw DomainError("task index must be >= 1");
  if (task < num_tasks())
    throw ProtocolError("tasks must be registered in order; got task " + std::to_string(task) +
                        " after task " + std::to_string(num_tasks()));
  while (num_tasks() < task) task_vertices_.emplace_back();
  if (auto it = class_to_vertex_.find(label); it != class_to_vertex_.end()) return it->second;
  const int vertex = size();
  class_to_vertex_.emplace(label, vertex);
  task_vertices_[static_cast<std::size_t>(task - 1)].push_back(vertex);
  return vertex;
}

ClassPrototypeMap ClassPrototypeMap::from_stream_order(
    const std::vector<std::vector<ClassId>>& labels_per_task) {
  ClassPrototypeMap map;
  for (std::size_t t = 0; t < labels_per_task.size(); ++t) {
    const int task = static_cast<int>(t) + 1;
    while (map.num_tasks() < task) map.task_vertices_.emplace_back();
    const auto& current = map.task_vertices_[t];
    for (ClassId y : labels_per_task[t]) {
      if (map.contains(y) &&
          std::find(current.begin(), current.end(), map.vertex_of(y)) == current.end())
        throw ProtocolError("class " + std::to_string(y) + " appears in more than one task");
      map.assign(task, y);
    }
  }
  return map;
}

int ClassPrototypeMap::vertex_of(ClassId label) const {
  auto it = class_to_vertex_.find(label);
  if (it == class_to_vertex_.end())
    throw MissingClassError("class " + std::to_string(label) + " has no prototype");
  return it->second;
}

const std::vector<int>& ClassPrototypeMap::task_vertices(int task) const {
  if (task < 1 || task > num_tasks())
    throw DomainError("task " + std::to_string(task) + " is not registered");
  return task_vertices_[static_cast<std::size_t>(task - 1)];
}

std::vector<int> ClassPrototypeMap::vertices_through(int task) const {
  std::vector<int> out;
  for (int t = 1; t <= std::min(task, num_tasks()); ++t) {
    const auto& v = task_vertices(t);
    out.insert(out.end(), v.begin(), v.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<ClassId> ClassPrototypeMap::classes_through(int task) const {
  const std::vector<int> vertices = vertices_through(task);
  std::vector<ClassId> out;
  for (const auto& [label, vertex] : class_to_vertex_)
    if (std::binary_search(vertices.begin(), vertices.end(), vertex)) out.push_back(label);
  return out;
}

nlohmann::json to_json(const PrototypeSet<double>& set) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < set.num_classes(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < set.dim(); ++j) row.push_back(set.vectors()(i, j));
    rows.push_back(std::move(row));
  }
  return {{"k", set.num_classes()}, {"d", set.dim()}, {"vectors", std::move(rows)}};
}

PrototypeSet<double> prototype_set_from_json(const nlohmann::json& doc) {
  try {
    const auto k = doc.at("k").get<Eigen::Index>();
    const auto d = doc.at("d").get<Eigen::Index>();
    const auto& rows = doc.at("vectors");
    if (k < 1 || d < 1 || static_cast<Eigen::Index>(rows.size()) != k)
      throw FormatError("prototype document: expected " + std::to_string(k) + " rows");
    Matrix m(k, d);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto& row = rows.at(static_cast<std::size_t>(i));
      if (static_cast<Eigen::Index>(row.size()) != d)
        throw FormatError("prototype document: row " + std::to_string(i) + " has wrong length");
      for (Eigen::Index j = 0; j < d; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
    return PrototypeSet<double>(std::move(m));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("prototype document: ") + e.what());
  }
}

}  // namespace ncl
