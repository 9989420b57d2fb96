#include <doctest.h>

TEST_CASE("placeholder harness") { CHECK(true); }
