#pragma once

#include <string>

#include "pollisim/mission.hpp"

namespace pollisim {

/// Map rendering: walls, rows with cell boundaries, roadmap ridge, the
/// trajectory colored by phase, and flowers colored by final state.
void write_map_svg(const std::string& path, const Mission& mission);

}  // namespace pollisim
