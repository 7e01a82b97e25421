#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "airshield/format.hpp"

using namespace airshield;

TEST_CASE("format: fixed decimals and negative zero") {
    CHECK(format_fixed(1.005, 2) == "1.00");  // binary value just below 1.005
    CHECK(format_fixed(2.5, 2) == "2.50");
    CHECK(format_fixed(-0.0, 2) == "0.00");
    CHECK(format_fixed(-0.001, 2) == "0.00");
    CHECK(format_fixed(-0.005001, 2) == "-0.01");
    CHECK(format_fixed(123456.789, 1) == "123456.8");
}

TEST_CASE("format: significant digits") {
    CHECK(format_significant(299792458.0, 9) == "299792458");
    CHECK(format_significant(1.0 / 3.0, 9) == "0.333333333");
    CHECK(format_significant(1e-13, 9) == "1e-13");
    CHECK(format_significant(0.0, 9) == "0");
}

TEST_CASE("format: parse_double is strict") {
    CHECK(parse_double("1.5") == 1.5);
    CHECK(parse_double("+2") == 2.0);
    CHECK(parse_double("-3e-2") == -0.03);
    CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
    CHECK_THROWS_AS(parse_double(" 1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_double("abc"), std::invalid_argument);
}

TEST_CASE("format: 17 significant digits round trip") {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, std::nextafter(1.0, 2.0)}) {
        CHECK(parse_double(format_significant(v, 17)) == v);
    }
}
