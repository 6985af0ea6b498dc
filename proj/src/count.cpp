// SPDX-License-Identifier: Apache-2.0
#include "ttdse/count.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace ttdse {

Count checked_add(Count a, Count b) {
    Count out;
    if (__builtin_add_overflow(a, b, &out)) {
        throw std::overflow_error("128-bit count overflow in addition");
    }
    return out;
}

Count checked_mul(Count a, Count b) {
    Count out;
    if (__builtin_mul_overflow(a, b, &out)) {
        throw std::overflow_error("128-bit count overflow in multiplication");
    }
    return out;
}

Count checked_pow(Count base, unsigned exp) {
    Count out = 1;
    for (unsigned i = 0; i < exp; ++i) out = checked_mul(out, base);
    return out;
}

Count factorial(unsigned n) {
    Count out = 1;
    for (unsigned i = 2; i <= n; ++i) out = checked_mul(out, i);
    return out;
}

std::string to_string(Count value) {
    if (value == 0) return "0";
    std::string digits;
    while (value != 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
        value /= 10;
    }
    std::reverse(digits.begin(), digits.end());
    return digits;
}

Count parse_count(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("empty integer literal");
    Count out = 0;
    for (char c : text) {
        if (c < '0' || c > '9') throw std::invalid_argument("not a non-negative integer: " + text);
        out = checked_add(checked_mul(out, 10), static_cast<Count>(c - '0'));
    }
    return out;
}

double to_double(Count value) {
    return static_cast<double>(value);
}

std::string to_sci2(Count value) {
    if (value == 0) return "0.0E+00";
    std::string digits = to_string(value);
    int exponent = static_cast<int>(digits.size()) - 1;
    int lead = digits[0] - '0';
    int second = digits.size() > 1 ? digits[1] - '0' : 0;
    int third = digits.size() > 2 ? digits[2] - '0' : 0;
    if (third >= 5) {
        ++second;
        if (second == 10) {
            second = 0;
            ++lead;
            if (lead == 10) {
                lead = 1;
                ++exponent;
            }
        }
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%d.%dE%c%02d", lead, second, exponent < 0 ? '-' : '+', exponent);
    return buf;
}

}  // namespace ttdse
