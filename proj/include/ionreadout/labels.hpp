#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ionreadout {

/// Largest chain the exclusive-label classifiers support (2^12 output classes).
inline constexpr int kMaxIons = 12;

// Basis-state labels are bitstrings with one '0'/'1' character per ion,
// ion 0 first. The class index reads the string as a binary number with
// ion 0 as the most significant bit, so "000" -> 0, "001" -> 1, "111" -> 7.

std::size_t num_classes(int n_ions);

std::string label_from_index(std::size_t index, int n_ions);

/// Throws std::invalid_argument on characters other than '0'/'1' or on an
/// empty / over-long label.
std::size_t index_from_label(std::string_view label);

inline int ion_bit(std::size_t index, int ion, int n_ions)
{
    return static_cast<int>((index >> (n_ions - 1 - ion)) & 1U);
}

}  // namespace ionreadout
