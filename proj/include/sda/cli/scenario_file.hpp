#pragma once

#include "sda/sim/scenario.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sda
{
    struct ScenarioIssue
    {
        /// Dotted location, e.g. "policy.rules[2].dst".
        std::string where;
        std::string message;

        std::string to_string() const { return where + ": " + message; }
    };

    struct LoadResult
    {
        std::optional<Scenario> scenario;
        std::vector<ScenarioIssue> errors;

        bool ok() const noexcept { return scenario.has_value() && errors.empty(); }
    };

    /// Reads and validates a scenario. Missing fields take their defaults.
    LoadResult parse_scenario(const nlohmann::json &doc);
    LoadResult load_scenario_text(const std::string &text);
    LoadResult load_scenario_file(const std::string &path);

    /// Cross-reference and range checks. A scenario without issues runs to
    /// completion without configuration errors.
    std::vector<ScenarioIssue> validate_scenario(const Scenario &sc);

    /// Full scenario including defaults, in the file format.
    nlohmann::json scenario_to_json(const Scenario &sc);
}
