#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "xolap/decimal.hpp"

using xolap::Decimal;

TEST(Decimal, ParsesPlainNotation) {
  EXPECT_EQ(Decimal::parse("30")->to_string(), "30");
  EXPECT_EQ(Decimal::parse(" 27.50 ")->to_string(), "27.5");
  EXPECT_EQ(Decimal::parse("-0.25")->to_string(), "-0.25");
  EXPECT_EQ(Decimal::parse("+3.")->to_string(), "3");
  EXPECT_EQ(Decimal::parse(".5")->to_string(), "0.5");
  EXPECT_EQ(Decimal::parse("-0")->to_string(), "0");
}

TEST(Decimal, RejectsNonNumbers) {
  for (const char* s : {"", " ", "abc", "1.2.3", "1e3", "--1", ".", "12a", "0x10"}) {
    EXPECT_FALSE(Decimal::parse(s).has_value()) << s;
  }
  EXPECT_FALSE(Decimal::parse("1000000000000000000000000000").has_value());
}

TEST(Decimal, SumsAreExact) {
  Decimal total;
  for (int i = 0; i < 10; ++i) total = total + *Decimal::parse("0.1");
  EXPECT_EQ(total, Decimal::from_integer(1));
  EXPECT_EQ((*Decimal::parse("30") + *Decimal::parse("25")).to_string(), "55");
}

TEST(Decimal, ComparesNumerically) {
  EXPECT_LT(*Decimal::parse("9"), *Decimal::parse("10"));
  EXPECT_EQ(*Decimal::parse("10.0"), *Decimal::parse("10"));
  EXPECT_GT(*Decimal::parse("-1"), *Decimal::parse("-2"));
}

TEST(Decimal, DivisionRoundsHalfAwayFromZero) {
  EXPECT_EQ(Decimal::parse("55")->divided_by(2).to_string(), "27.5");
  EXPECT_EQ(Decimal::from_integer(1).divided_by(3).to_string(), "0.333333333333");
  EXPECT_EQ(Decimal::from_integer(2).divided_by(3).to_string(), "0.666666666667");
  EXPECT_EQ(Decimal::from_integer(-2).divided_by(3).to_string(), "-0.666666666667");
  EXPECT_THROW(Decimal::from_integer(1).divided_by(0), xolap::NumericDomainError);
}

TEST(Decimal, ExcessFractionDigitsRound) {
  EXPECT_EQ(Decimal::parse("0.0000000000015")->to_string(), "0.000000000002");
  EXPECT_EQ(Decimal::parse("0.0000000000014")->to_string(), "0.000000000001");
}

TEST(Decimal, FromDoubleRejectsNonFinite) {
  EXPECT_EQ(Decimal::from_double(2.5).to_string(), "2.5");
  EXPECT_THROW(Decimal::from_double(std::numeric_limits<double>::infinity()), xolap::NumericDomainError);
  EXPECT_THROW(Decimal::from_double(std::nan("")), xolap::NumericDomainError);
}
