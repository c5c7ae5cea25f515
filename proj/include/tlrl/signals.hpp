#pragma once

#include <cstdint>
#include <vector>

namespace tlrl {

enum class Color : std::uint8_t { Red, Yellow, Green };

constexpr bool is_open(Color c) noexcept { return c != Color::Red; }
const char* to_string(Color c) noexcept;

/// Colors shown by one signalized junction, plus how many whole steps they
/// have been shown unchanged.
struct JunctionSignal {
    Color a = Color::Green;
    Color b = Color::Red;
    int elapsed = 0;

    bool operator==(const JunctionSignal&) const = default;
};

/// The two axes of a junction may never be open (green or yellow) at once.
constexpr bool interlock_ok(const JunctionSignal& s) noexcept { return !(is_open(s.a) && is_open(s.b)); }

/// One JunctionSignal per signalized junction, in Network::signalized_junctions() order.
using SignalAssignment = std::vector<JunctionSignal>;

}  // namespace tlrl
