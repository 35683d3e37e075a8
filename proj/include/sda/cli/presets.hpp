#pragma once

#include "sda/cli/scenario_file.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sda
{
    /// Names of the scenario files compiled into the binary.
    std::vector<std::string> preset_names();
    std::optional<std::string> preset_text(const std::string &name);
    /// Parses and validates a bundled preset; unknown names give one error.
    LoadResult load_preset(const std::string &name);
}
