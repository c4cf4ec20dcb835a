#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sargtr/asc.hpp"
#include "sargtr/synth.hpp"

namespace sargtr {

// Dataset interchange: one JSON object per line,
// {"label": int, "centers": [[A, alpha, L, phi, gamma, x, y], ...]}.

inline nlohmann::json to_json(const DatasetRecord& rec) {
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& c : rec.centers)
    centers.push_back({c.amplitude, c.alpha, c.length, c.phi, c.gamma, c.x, c.y});
  return nlohmann::json{{"label", rec.label}, {"centers", centers}};
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord rec;
  rec.label = j.at("label").get<int>();
  for (const auto& row : j.at("centers")) {
    if (!row.is_array() || row.size() != kFeatureCount)
      throw std::invalid_argument("DatasetRecord: center must have 7 values");
    ScatteringCenter c;
    c.amplitude = row[0].get<double>();
    c.alpha = row[1].get<double>();
    c.length = row[2].get<double>();
    c.phi = row[3].get<double>();
    c.gamma = row[4].get<double>();
    c.x = row[5].get<double>();
    c.y = row[6].get<double>();
    validate(c);
    rec.centers.push_back(c);
  }
  return rec;
}

inline void write_jsonl(const std::string& path,
                        const std::vector<DatasetRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_jsonl: cannot open " + path);
  for (const auto& rec : records) os << to_json(rec).dump() << '\n';
  if (!os) throw std::runtime_error("write_jsonl: write failed for " + path);
}

inline std::vector<DatasetRecord> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_jsonl: cannot open " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error("read_jsonl: " + path + ":" + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return out;
}

// Template definitions as JSON:
// [{"name", "scatterers": [[x, y, A, alpha, L, gamma], ...],
//   "position_jitter", "amplitude_jitter", "dropout", "k_min", "k_max"}, ...]

inline ClassTemplate template_from_json(const nlohmann::json& j) {
  ClassTemplate tpl;
  tpl.name = j.at("name").get<std::string>();
  for (const auto& row : j.at("scatterers")) {
    if (!row.is_array() || row.size() != 6)
      throw std::invalid_argument("ClassTemplate: scatterer must have 6 values");
    TemplateScatterer s;
    s.x = row[0].get<double>();
    s.y = row[1].get<double>();
    s.amplitude = row[2].get<double>();
    s.alpha = row[3].get<double>();
    s.length = row[4].get<double>();
    s.gamma = row[5].get<double>();
    tpl.scatterers.push_back(s);
  }
  if (j.contains("position_jitter")) tpl.position_jitter = j.at("position_jitter");
  if (j.contains("amplitude_jitter")) tpl.amplitude_jitter = j.at("amplitude_jitter");
  if (j.contains("dropout")) tpl.dropout = j.at("dropout");
  if (j.contains("k_min")) tpl.k_min = j.at("k_min");
  if (j.contains("k_max")) tpl.k_max = j.at("k_max");
  tpl.validate();
  return tpl;
}

inline std::vector<ClassTemplate> read_templates(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_templates: cannot open " + path);
  nlohmann::json j;
  is >> j;
  if (!j.is_array()) throw std::runtime_error("read_templates: expected an array");
  std::vector<ClassTemplate> out;
  for (const auto& item : j) out.push_back(template_from_json(item));
  return out;
}

}  // namespace sargtr
