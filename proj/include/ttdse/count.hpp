// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace ttdse {

/// Exact unsigned counter for parameter/FLOP totals and design-space sizes.
/// The largest layers push design-space counts past 1e33, so 64 bits are not
/// enough; every arithmetic helper below throws std::overflow_error instead of
/// wrapping.
using Count = unsigned __int128;

Count checked_add(Count a, Count b);
Count checked_mul(Count a, Count b);
Count checked_pow(Count base, unsigned exp);
Count factorial(unsigned n);

std::string to_string(Count value);
Count parse_count(const std::string& text);
double to_double(Count value);

/// Scientific notation with two significant digits, e.g. "9.5E+08".
/// Rounds half up on the decimal representation, so it is exact for any Count.
std::string to_sci2(Count value);

}  // namespace ttdse
