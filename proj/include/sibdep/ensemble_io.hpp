#ifndef SIBDEP_ENSEMBLE_IO_HPP
#define SIBDEP_ENSEMBLE_IO_HPP

#include <string>
#include <vector>

#include "json.hpp"

#include "sibdep/env_model.hpp"

namespace sibdep {

/// Ensemble document as written, before probability validation. Parsing
/// rejects schema violations (ParseError); probability defects are left for
/// validate() so they can be reported rather than thrown.
struct EnsembleSpec {
  int order = 0;
  struct Member {
    double weight = 0.0;
    std::vector<SiblingLaw> laws;
  };
  std::vector<Member> members;
  nlohmann::json experiment;  ///< optional "experiment" section, passed through
};

struct EnsembleValidation {
  bool accepted = true;
  double weight_defect = 0.0;
  /// One report per (member, group size), in document order.
  struct LawEntry {
    std::size_t member;
    int group_size;
    ValidationReport report;
  };
  std::vector<LawEntry> laws;
  std::vector<std::string> issues;
};

EnsembleSpec parse_ensemble(const nlohmann::json& doc);
EnsembleSpec parse_ensemble_text(const std::string& text);
EnsembleSpec load_ensemble_spec(const std::string& path);

EnsembleValidation validate(const EnsembleSpec& spec);
nlohmann::json to_json(const EnsembleValidation& v);

/// Throws InvalidLawError when validation fails.
EnvironmentEnsemble build_ensemble(const EnsembleSpec& spec);
EnvironmentEnsemble load_ensemble(const std::string& path);

nlohmann::json to_json(const Environment& env, double weight);
nlohmann::json to_json(const EnvironmentEnsemble& ens);

}  // namespace sibdep

#endif  // SIBDEP_ENSEMBLE_IO_HPP
