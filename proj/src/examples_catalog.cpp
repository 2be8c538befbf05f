#include "dstop/examples_catalog.hpp"

#include <mutex>

namespace dstop {

namespace {

// Catalog is data, not code: each entry is a config-compatible problem
// declaration. All rows use horizon 1 and an even prior.
constexpr const char* kCatalogJson = R"json([
  {
    "name": "exp-base",
    "summary": "exponential decay on both curves, unit penalty weight",
    "problem": {
      "a": 2.0, "b": -1.0, "prior": 0.5, "horizon": 1.0,
      "original": {
        "survival0": {"kind": "exponential", "rate": 0.4},
        "survival1": {"kind": "exponential", "rate": 1.0},
        "mode": "strict"
      }
    }
  },
  {
    "name": "exp-strong-signal",
    "summary": "exponential decay with a wide drift gap",
    "problem": {
      "a": 6.0, "b": -1.0, "prior": 0.5, "horizon": 1.0,
      "original": {
        "survival0": {"kind": "exponential", "rate": 0.4},
        "survival1": {"kind": "exponential", "rate": 1.0},
        "mode": "strict"
      }
    }
  },
  {
    "name": "exp-mild-penalty",
    "summary": "exponential decay, half-unit penalty weight",
    "problem": {
      "a": 2.0, "b": -0.5, "prior": 0.5, "horizon": 1.0,
      "original": {
        "survival0": {"kind": "exponential", "rate": 0.4},
        "survival1": {"kind": "exponential", "rate": 1.0},
        "mode": "strict"
      }
    }
  },
  {
    "name": "linear-growth-penalty",
    "summary": "linearly growing penalty curve, relaxed assumption set",
    "problem": {
      "a": 2.8284271247461903, "b": -0.7071067811865476, "prior": 0.5, "horizon": 1.0,
      "original": {
        "survival0": {"kind": "linear", "intercept": 0.3333333333333333,
                      "slope": 0.6666666666666666},
        "survival1": {"kind": "exponential", "rate": 2.0},
        "mode": "relaxed"
      }
    }
  },
  {
    "name": "linear-reward",
    "summary": "exponential penalty decay against a linearly decaying reward",
    "problem": {
      "a": 4.0, "b": -1.0, "prior": 0.5, "horizon": 1.0,
      "original": {
        "survival0": {"kind": "exponential", "rate": 0.49},
        "survival1": {"kind": "linear", "intercept": 1.0, "slope": -0.5},
        "mode": "strict"
      }
    }
  },
  {
    "name": "stepped-decay",
    "summary": "smoothed step drops in both curves",
    "problem": {
      "a": 2.0, "b": -0.3333333333333333, "prior": 0.5, "horizon": 1.0,
      "original": {
        "survival0": {"kind": "smoothed_step_mix", "intercept": 1.0, "slope": 0.0,
                      "sharpness": 1000.0,
                      "steps": [{"weight": -0.3333333333333333, "center": 0.3333333333333333},
                                {"weight": -0.3333333333333333, "center": 0.6666666666666666}]},
        "survival1": {"kind": "smoothed_step_mix", "intercept": 1.0, "slope": -0.1,
                      "sharpness": 1000.0,
                      "steps": [{"weight": -0.5, "center": 0.5}]},
        "mode": "strict"
      }
    }
  }
])json";

std::vector<ExampleRow> build_catalog() {
  const nlohmann::json rows = nlohmann::json::parse(kCatalogJson);
  std::vector<ExampleRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    ExampleRow row;
    row.name = r.at("name").get<std::string>();
    row.summary = r.at("summary").get<std::string>();
    row.declaration = r.at("problem");
    row.spec = problem_from_json(row.declaration);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

const std::vector<ExampleRow>& example_catalog() {
  static const std::vector<ExampleRow> catalog = build_catalog();
  return catalog;
}

const ExampleRow* find_example(const std::string& name) {
  for (const ExampleRow& row : example_catalog()) {
    if (row.name == name) return &row;
  }
  return nullptr;
}

}  // namespace dstop
