#pragma once

#include <string>
#include <vector>

#include "dstop/config.hpp"

namespace dstop {

/// One catalog row: a named, ready-to-run problem declaration. The
/// declaration is config-compatible JSON, so rows double as templates.
struct ExampleRow {
  std::string name;
  std::string summary;
  nlohmann::json declaration;
  ProblemSpec spec;
};

/// The built-in example catalog, in fixed order. Parsed once from
/// embedded JSON data.
const std::vector<ExampleRow>& example_catalog();

/// nullptr when the name is not in the catalog.
const ExampleRow* find_example(const std::string& name);

}  // namespace dstop
