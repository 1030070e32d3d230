#include "sibdep/ensemble_io.hpp"

#include <fstream>
#include <sstream>

namespace sibdep {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(where + ": missing key \"" + key + "\"");
  }
  return *it;
}

int require_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer");
  return v.get<int>();
}

double require_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

const json& require_array(const json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  return v;
}

}  // namespace

EnsembleSpec parse_ensemble(const json& doc) {
  EnsembleSpec spec;
  spec.order = require_int(require(doc, "N", "document"), "N");
  if (spec.order < 1) throw ParseError("N: must be >= 1");
  const int n = spec.order;
  if (doc.contains("experiment")) spec.experiment = doc["experiment"];

  const json& envs = require_array(require(doc, "environments", "document"),
                                   "environments");
  if (envs.empty()) throw ParseError("environments: must not be empty");
  for (std::size_t m = 0; m < envs.size(); ++m) {
    const std::string env_at = "environments[" + std::to_string(m) + "]";
    EnsembleSpec::Member member;
    member.weight = require_number(require(envs[m], "weight", env_at), env_at + ".weight");
    const json& laws = require_array(require(envs[m], "laws", env_at), env_at + ".laws");
    std::vector<std::vector<Atom>> by_size(static_cast<std::size_t>(n));
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (std::size_t l = 0; l < laws.size(); ++l) {
      const std::string law_at = env_at + ".laws[" + std::to_string(l) + "]";
      const int i = require_int(require(laws[l], "group_size", law_at),
                                law_at + ".group_size");
      if (i < 1 || i > n) {
        throw ParseError(law_at + ".group_size: " + std::to_string(i) +
                         " outside 1.." + std::to_string(n));
      }
      if (seen[static_cast<std::size_t>(i - 1)]) {
        throw ParseError(law_at + ".group_size: duplicate law for size " +
                         std::to_string(i));
      }
      seen[static_cast<std::size_t>(i - 1)] = true;
      const json& atoms = require_array(require(laws[l], "atoms", law_at), law_at + ".atoms");
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        const std::string atom_at = law_at + ".atoms[" + std::to_string(a) + "]";
        const json& tuple = require_array(require(atoms[a], "tuple", atom_at),
                                          atom_at + ".tuple");
        Atom atom;
        atom.weight = require_number(require(atoms[a], "weight", atom_at), atom_at + ".weight");
        if (static_cast<int>(tuple.size()) != i) {
          throw ParseError(atom_at + ".tuple: length " + std::to_string(tuple.size()) +
                           " != group_size " + std::to_string(i));
        }
        for (std::size_t p = 0; p < tuple.size(); ++p) {
          const std::string pos_at = atom_at + ".tuple[" + std::to_string(p) + "]";
          const int k = require_int(tuple[p], pos_at);
          if (k < 0 || k > n) {
            throw ParseError(pos_at + ": child count " + std::to_string(k) +
                             " outside 0.." + std::to_string(n));
          }
          if (p > 0 && k < atom.children.back()) {
            throw ParseError(pos_at + ": tuple is not non-decreasing (" +
                             std::to_string(k) + " after " +
                             std::to_string(atom.children.back()) + ")");
          }
          atom.children.push_back(k);
        }
        by_size[static_cast<std::size_t>(i - 1)].push_back(std::move(atom));
      }
    }
    for (int i = 1; i <= n; ++i) {
      if (!seen[static_cast<std::size_t>(i - 1)]) {
        throw ParseError(env_at + ".laws: no law for group_size " + std::to_string(i));
      }
      member.laws.emplace_back(i, n, std::move(by_size[static_cast<std::size_t>(i - 1)]));
    }
    spec.members.push_back(std::move(member));
  }
  return spec;
}

EnsembleSpec parse_ensemble_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return parse_ensemble(doc);
}

EnsembleSpec load_ensemble_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_ensemble_text(buffer.str());
}

EnsembleValidation validate(const EnsembleSpec& spec) {
  EnsembleValidation v;
  double total = 0.0;
  for (std::size_t m = 0; m < spec.members.size(); ++m) {
    const auto& member = spec.members[m];
    if (!(member.weight >= 0.0)) {
      v.issues.push_back("environments[" + std::to_string(m) + "]: negative weight");
    }
    total += member.weight;
    for (const SiblingLaw& law : member.laws) {
      v.laws.push_back({m, law.group_size(), validate_sibling_law(law)});
      if (!v.laws.back().report.accepted) {
        v.issues.push_back("environments[" + std::to_string(m) + "] group_size " +
                           std::to_string(law.group_size()) + ": " +
                           v.laws.back().report.issues.front());
      }
    }
  }
  v.weight_defect = std::abs(total - 1.0);
  if (v.weight_defect > kProbabilityTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "environment weights sum to " << total;
    v.issues.push_back(msg.str());
  }
  v.accepted = v.issues.empty();
  return v;
}

nlohmann::json to_json(const EnsembleValidation& v) {
  json out;
  out["accepted"] = v.accepted;
  out["weight_defect"] = v.weight_defect;
  out["issues"] = v.issues;
  json laws = json::array();
  for (const auto& entry : v.laws) {
    laws.push_back({{"environment", entry.member},
                    {"group_size", entry.group_size},
                    {"accepted", entry.report.accepted},
                    {"normalization_defect", entry.report.normalization_defect},
                    {"negative_weights", entry.report.negative_weights},
                    {"out_of_range_entries", entry.report.out_of_range_entries},
                    {"non_canonical_tuples", entry.report.non_canonical_tuples},
                    {"wrong_length_tuples", entry.report.wrong_length_tuples}});
  }
  out["laws"] = laws;
  return out;
}

EnvironmentEnsemble build_ensemble(const EnsembleSpec& spec) {
  const EnsembleValidation v = validate(spec);
  if (!v.accepted) throw InvalidLawError(v.issues.front());
  std::vector<Environment> envs;
  std::vector<double> weights;
  for (const auto& member : spec.members) {
    envs.emplace_back(member.laws);
    weights.push_back(member.weight);
  }
  return EnvironmentEnsemble(std::move(envs), std::move(weights));
}

EnvironmentEnsemble load_ensemble(const std::string& path) {
  return build_ensemble(load_ensemble_spec(path));
}

nlohmann::json to_json(const Environment& env, double weight) {
  json laws = json::array();
  for (int i = 1; i <= env.order(); ++i) {
    json atoms = json::array();
    for (const Atom& a : env.law(i).atoms())
      atoms.push_back({{"tuple", a.children}, {"weight", a.weight}});
    laws.push_back({{"group_size", i}, {"atoms", atoms}});
  }
  return {{"weight", weight}, {"laws", laws}};
}

nlohmann::json to_json(const EnvironmentEnsemble& ens) {
  json envs = json::array();
  for (std::size_t m = 0; m < ens.size(); ++m)
    envs.push_back(to_json(ens.member(m), ens.weights()[m]));
  return {{"N", ens.order()}, {"environments", envs}};
}

}  // namespace sibdep
