// SPDX-License-Identifier: Apache-2.0
#include <stdexcept>

#include "doctest.h"
#include "ttdse/count.hpp"

using namespace ttdse;

TEST_CASE("to_sci2 matches the table formatting") {
    CHECK(to_sci2(948987237) == "9.5E+08");
    CHECK(to_sci2(5439837) == "5.4E+06");
    CHECK(to_sci2(56) == "5.6E+01");
    CHECK(to_sci2(0) == "0.0E+00");
    CHECK(to_sci2(7) == "7.0E+00");
    CHECK(to_sci2(95) == "9.5E+01");
    CHECK(to_sci2(995) == "1.0E+03");
    CHECK(to_sci2(1049) == "1.0E+03");
    CHECK(to_sci2(1050) == "1.1E+03");
}

TEST_CASE("to_sci2 handles counts beyond 64 bits") {
    const Count big = checked_pow(10, 33) * 49;
    CHECK(to_sci2(big) == "4.9E+34");
}

TEST_CASE("string round trip") {
    const Count v = checked_mul(parse_count("123456789012345678901"), 1000);
    CHECK(to_string(v) == "123456789012345678901000");
    CHECK(parse_count(to_string(v)) == v);
    CHECK(to_string(0) == "0");
    CHECK_THROWS(parse_count("12a"));
    CHECK_THROWS(parse_count(""));
}

TEST_CASE("checked arithmetic throws instead of wrapping") {
    const Count max = ~Count{0};
    CHECK_THROWS_AS(checked_add(max, 1), std::overflow_error);
    CHECK_THROWS_AS(checked_mul(max / 2 + 1, 2), std::overflow_error);
    CHECK_THROWS_AS(checked_pow(2, 128), std::overflow_error);
    CHECK(checked_pow(2, 127) == Count{1} << 127);
    CHECK(factorial(5) == 120);
    CHECK(factorial(0) == 1);
    CHECK(to_double(1000) == 1000.0);
}
