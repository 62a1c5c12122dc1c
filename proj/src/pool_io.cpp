#include "poevi/pool_io.hpp"

#include <fstream>

#include "json.hpp"

namespace poevi {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& rows, Index dim) {
  Matrix m(dim, dim);
  if (static_cast<Index>(rows.size()) != dim) {
    throw ParseError("pool: lambda has wrong row count");
  }
  for (Index i = 0; i < dim; ++i) {
    const json& row = rows.at(i);
    if (static_cast<Index>(row.size()) != dim) {
      throw ParseError("pool: lambda row " + std::to_string(i) + " has wrong length");
    }
    for (Index j = 0; j < dim; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = arr.at(i).get<double>();
  return v;
}

}  // namespace

std::string pool_to_json(const PoEDensity& poe) {
  json doc;
  doc["dim"] = poe.dim();
  json experts = json::array();
  for (const Expert& e : poe.experts()) {
    json entry;
    entry["mu"] = std::vector<double>(e.mu().begin(), e.mu().end());
    entry["lambda"] = matrix_to_json(e.lambda());
    experts.push_back(std::move(entry));
  }
  doc["experts"] = std::move(experts);
  doc["alpha"] = std::vector<double>(poe.alpha().begin(), poe.alpha().end());
  return doc.dump(2);
}

PoEDensity pool_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("pool: ") + e.what());
  }
  const Index dim = doc.at("dim").get<Index>();
  ExpertPool experts;
  for (const json& entry : doc.at("experts")) {
    Vector mu = vector_from_json(entry.at("mu"));
    if (mu.size() != dim) throw ParseError("pool: expert mu length != dim");
    experts.emplace_back(std::move(mu), matrix_from_json(entry.at("lambda"), dim));
  }
  Vector alpha = vector_from_json(doc.at("alpha"));
  return PoEDensity(std::move(experts), std::move(alpha));
}

PoEDensity load_pool(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("pool: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return pool_from_json(text);
}

void save_pool(const PoEDensity& poe, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("pool: cannot write " + path);
  out << pool_to_json(poe) << "\n";
}

}  // namespace poevi
