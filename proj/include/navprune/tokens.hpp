#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace navprune {

using NodeId = std::size_t;

inline constexpr const char* kStartToken = "<s>";
inline constexpr const char* kEndToken = "</s>";

struct InstructionToken {
    std::string text;
    std::vector<double> embedding;
    bool relevant = false;
    std::optional<NodeId> landmark;  // destination node named by a relevant token
};

// Token ids are positions in this vector.
using TokenSeq = std::vector<InstructionToken>;

}  // namespace navprune
