#pragma once

#include <string_view>

namespace kagent {

enum class Phase { Synthesize, Test, Diagnose, Repair, Optimize, ProfileRefine, Done, Failed };

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

inline bool is_terminal(Phase p)
{
    return p == Phase::Done || p == Phase::Failed;
}

} // namespace kagent
