#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "sibdep/ensemble_io.hpp"

using namespace sibdep;
using nlohmann::json;

namespace {

json minimal_document() {
  return json::parse(R"({
    "N": 2,
    "environments": [{
      "weight": 1.0,
      "laws": [
        {"group_size": 1, "atoms": [{"tuple": [0], "weight": 0.2},
                                    {"tuple": [1], "weight": 0.3},
                                    {"tuple": [2], "weight": 0.5}]},
        {"group_size": 2, "atoms": [{"tuple": [0, 0], "weight": 0.1},
                                    {"tuple": [0, 1], "weight": 0.3},
                                    {"tuple": [0, 2], "weight": 0.1},
                                    {"tuple": [1, 1], "weight": 0.2},
                                    {"tuple": [1, 2], "weight": 0.2},
                                    {"tuple": [2, 2], "weight": 0.1}]}
      ]
    }]
  })");
}

std::string parse_message(const json& doc) {
  try {
    parse_ensemble(doc);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("a well-formed document parses and builds") {
  const auto spec = parse_ensemble(minimal_document());
  CHECK(spec.order == 2);
  REQUIRE(spec.members.size() == 1);
  CHECK(validate(spec).accepted);
  const auto ens = build_ensemble(spec);
  CHECK(ens.member(0).marginal(2, 1) == doctest::Approx(0.45));
}

TEST_CASE("schema violations name the offending position") {
  auto doc = minimal_document();
  doc["environments"][0]["laws"][1]["atoms"][3]["tuple"] = {2, 1};
  CHECK(parse_message(doc).find("environments[0].laws[1].atoms[3].tuple[1]") != std::string::npos);

  doc = minimal_document();
  doc["environments"][0]["laws"][1]["atoms"][0]["tuple"] = {0};
  CHECK(parse_message(doc).find("environments[0].laws[1].atoms[0].tuple") != std::string::npos);

  doc = minimal_document();
  doc["environments"][0]["laws"][0]["atoms"][0].erase("weight");
  CHECK(parse_message(doc).find("missing key \"weight\"") != std::string::npos);

  doc = minimal_document();
  doc["environments"][0]["laws"][0]["atoms"][2]["tuple"] = {3};
  CHECK_FALSE(parse_message(doc).empty());

  doc = minimal_document();
  doc["environments"][0]["laws"][1]["group_size"] = 1;
  CHECK_FALSE(parse_message(doc).empty());

  doc = minimal_document();
  doc["environments"][0]["laws"].erase(1);
  CHECK(parse_message(doc).find("no law for group_size 2") != std::string::npos);

  CHECK_THROWS_AS(parse_ensemble_text("{not json"), ParseError);
  CHECK_THROWS_AS(load_ensemble_spec("/nonexistent/config.json"), ParseError);
}

TEST_CASE("probability defects are reported, then refused") {
  auto doc = minimal_document();
  doc["environments"][0]["weight"] = 1.1;
  const auto spec = parse_ensemble(doc);
  const auto v = validate(spec);
  CHECK_FALSE(v.accepted);
  CHECK(v.weight_defect == doctest::Approx(0.1));
  CHECK(to_json(v)["weight_defect"].get<double>() == doctest::Approx(0.1));
  CHECK_THROWS_AS(build_ensemble(spec), InvalidLawError);

  doc = minimal_document();
  doc["environments"][0]["laws"][0]["atoms"][0]["weight"] = 0.3;
  const auto v2 = validate(parse_ensemble(doc));
  CHECK_FALSE(v2.accepted);
  REQUIRE(v2.laws.size() == 2);
  CHECK_FALSE(v2.laws[0].report.accepted);
  CHECK(v2.laws[0].report.normalization_defect == doctest::Approx(0.1));
}

TEST_CASE("serialized ensembles round-trip") {
  const auto ens = EnvironmentEnsemble::mixture(fixtures::env_a(), fixtures::env_b(), 0.3);
  const auto back = build_ensemble(parse_ensemble(to_json(ens)));
  REQUIRE(back.size() == 2);
  CHECK(back.weights()[0] == doctest::Approx(0.3).epsilon(1e-15));
  for (std::size_t m = 0; m < 2; ++m)
    CHECK((back.member(m).marginals() - ens.member(m).marginals()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("the experiment section is passed through") {
  auto doc = minimal_document();
  doc["experiment"] = {{"horizon", 12}};
  CHECK(parse_ensemble(doc).experiment["horizon"] == 12);
}
