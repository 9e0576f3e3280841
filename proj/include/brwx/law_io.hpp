#pragma once

// Law definition files. Two layouts, selected by "form":
//   {"form": "explicit-atoms", "atoms": [{"prob": 0.25, "children": [-1.0, 2.0]}, ...]}
//   {"form": "product",
//    "count": {"values": [1, 2], "probs": [0.8, 0.2]},
//    "displacement": {"values": [-0.5, 0.5], "probs": [0.5, 0.5]}}
// Decimal literals go through the JSON parser's strtod, i.e. correctly
// rounded decimal-to-binary. Validation errors cite the offending key path.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "brwx/model.hpp"

namespace brwx::model {

struct LawParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double need_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw LawParseError(path + ": expected a number");
  return j.get<double>();
}

inline const nlohmann::json& need_key(const nlohmann::json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) throw LawParseError(path + "/" + key + ": missing");
  return *it;
}

inline void parse_dist(const nlohmann::json& j, const std::string& path, std::vector<double>& values,
                       std::vector<double>& probs) {
  if (!j.is_object()) throw LawParseError(path + ": expected an object");
  const auto& jv = need_key(j, "values", path);
  const auto& jp = need_key(j, "probs", path);
  if (!jv.is_array()) throw LawParseError(path + "/values: expected an array");
  if (!jp.is_array()) throw LawParseError(path + "/probs: expected an array");
  if (jv.size() != jp.size()) throw LawParseError(path + ": values/probs length mismatch");
  for (std::size_t i = 0; i < jv.size(); ++i) {
    values.push_back(need_number(jv[i], path + "/values/" + std::to_string(i)));
    probs.push_back(need_number(jp[i], path + "/probs/" + std::to_string(i)));
  }
}

}  // namespace detail

inline OffspringLaw law_from_json(const nlohmann::json& j) {
  using detail::need_key;
  using detail::need_number;
  if (!j.is_object()) throw LawParseError("/: expected an object");
  const auto& form = need_key(j, "form", "");
  if (!form.is_string()) throw LawParseError("/form: expected a string");
  std::string f = form.get<std::string>();
  try {
    if (f == "explicit-atoms") {
      const auto& ja = need_key(j, "atoms", "");
      if (!ja.is_array() || ja.empty()) throw LawParseError("/atoms: expected a non-empty array");
      std::vector<Atom> atoms;
      for (std::size_t i = 0; i < ja.size(); ++i) {
        std::string path = "/atoms/" + std::to_string(i);
        if (!ja[i].is_object()) throw LawParseError(path + ": expected an object");
        Atom a;
        a.prob = need_number(need_key(ja[i], "prob", path), path + "/prob");
        const auto& jc = need_key(ja[i], "children", path);
        if (!jc.is_array()) throw LawParseError(path + "/children: expected an array");
        for (std::size_t k = 0; k < jc.size(); ++k)
          a.children.push_back(need_number(jc[k], path + "/children/" + std::to_string(k)));
        atoms.push_back(std::move(a));
      }
      return OffspringLaw::from_atoms(std::move(atoms));
    }
    if (f == "product") {
      CountDist count;
      DisplacementDist disp;
      std::vector<double> cv;
      detail::parse_dist(need_key(j, "count", ""), "/count", cv, count.probs);
      for (std::size_t i = 0; i < cv.size(); ++i) {
        if (cv[i] < 0 || cv[i] != std::floor(cv[i]))
          throw LawParseError("/count/values/" + std::to_string(i) + ": expected a non-negative integer");
        count.values.push_back(static_cast<int>(cv[i]));
      }
      detail::parse_dist(need_key(j, "displacement", ""), "/displacement", disp.values, disp.probs);
      return OffspringLaw::product(std::move(count), std::move(disp));
    }
  } catch (const std::invalid_argument& e) {
    throw LawParseError(std::string("/: ") + e.what());
  }
  throw LawParseError("/form: must be \"explicit-atoms\" or \"product\"");
}

inline nlohmann::ordered_json law_to_json(const OffspringLaw& law) {
  nlohmann::ordered_json j;
  if (law.form() == OffspringLaw::Form::explicit_atoms) {
    j["form"] = "explicit-atoms";
    auto& arr = j["atoms"] = nlohmann::ordered_json::array();
    for (const auto& a : law.atoms()) arr.push_back({{"prob", a.prob}, {"children", a.children}});
  } else {
    j["form"] = "product";
    j["count"] = {{"values", law.count_dist().values}, {"probs", law.count_dist().probs}};
    j["displacement"] = {{"values", law.displacement_dist().values}, {"probs", law.displacement_dist().probs}};
  }
  return j;
}

inline OffspringLaw load_law(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LawParseError("cannot open law file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw LawParseError(std::string("law file parse error: ") + e.what());
  }
  return law_from_json(j);
}

inline void save_law(const OffspringLaw& law, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw LawParseError("cannot open output law file: " + path);
  out << law_to_json(law).dump(2) << "\n";
}

}  // namespace brwx::model
