#include <gtest/gtest.h>

#include "grubsim/model.hpp"
#include "grubsim/random.hpp"

using namespace grubsim;

TEST(Bandwidth, AddSubCompare)
{
    EXPECT_EQ(bandwidth_add(Bandwidth(1, 2), Bandwidth(1, 3)), Bandwidth(5, 6));
    EXPECT_TRUE(bandwidth_sub(Bandwidth(1, 2), Bandwidth(1, 2)).is_zero());
    EXPECT_EQ(bandwidth_cmp(Bandwidth(2, 4), Bandwidth(1, 2)), 0);
    EXPECT_LT(bandwidth_cmp(Bandwidth(1, 3), Bandwidth(1, 2)), 0);
}

TEST(Bandwidth, StoredReduced)
{
    Bandwidth b(6, 8);
    EXPECT_EQ(b.to_string(), "3/4");
    EXPECT_EQ(b.value().raw().get_den(), 4);
}

TEST(Bandwidth, UnderflowIsLedgerCorruption)
{
    try {
        bandwidth_sub(Bandwidth(1, 3), Bandwidth(1, 2));
        FAIL() << "no error";
    } catch (const SimError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::LedgerCorruption);
    }
    EXPECT_THROW(Bandwidth(Rational(-1, 5)), SimError);
}

TEST(Rational, Parse)
{
    EXPECT_EQ(Rational::parse("7"), Rational(7));
    EXPECT_EQ(Rational::parse("-3/4"), Rational(-3, 4));
    EXPECT_EQ(Rational::parse("0.125"), Rational(1, 8));
    EXPECT_EQ(Rational::parse("1.2"), Rational(6, 5));
    EXPECT_EQ(Rational::parse("4/8").to_string(), "1/2");
    EXPECT_THROW(Rational::parse(""), SimError);
    EXPECT_THROW(Rational::parse("1e-3"), SimError);
    EXPECT_THROW(Rational::parse("1/0"), SimError);
    EXPECT_THROW(Rational::parse("abc"), SimError);
}

TEST(Rational, FloorCeilRound)
{
    EXPECT_EQ(Rational(7, 2).floor(), 3);
    EXPECT_EQ(Rational(7, 2).ceil(), 4);
    EXPECT_EQ(Rational(7, 2).round(), 4);
    EXPECT_EQ(Rational(-7, 2).floor(), -4);
    EXPECT_EQ(Rational(-7, 2).round(), -4);
    EXPECT_EQ(Rational(70, 3).round(), 23);
    EXPECT_EQ(Rational(5).floor(), 5);
}

TEST(Rational, DivisionByZeroThrows) { EXPECT_THROW(Rational(1) / Rational(0), SimError); }

TEST(Rational, FromDoubleIsExact)
{
    EXPECT_EQ(Rational::from_double_exact(0.375), Rational(3, 8));
    EXPECT_NE(Rational::from_double_exact(0.1), Rational(1, 10));
}

TEST(RationalProperty, AdditionAssociativeAndExact)
{
    Rng rng(2024);
    auto draw = [&] { return Rational(rng.uniform_int(0, 1'000'000), rng.uniform_int(1, 1'000'000)); };
    for (int i = 0; i < 2000; ++i) {
        Rational a = draw(), b = draw(), c = draw();
        Rational l = (a + b) + c;
        Rational r = a + (b + c);
        ASSERT_EQ(l, r);
        ASSERT_EQ(l.raw().get_num(), r.raw().get_num());
        ASSERT_EQ(l.raw().get_den(), r.raw().get_den());
        ASSERT_EQ(l - c - b, a);
    }
}

TEST(TrackedBandwidth, Conservation)
{
    TrackedBandwidth t;
    t.add(Bandwidth(1, 2));
    t.add(Bandwidth(1, 3));
    t.sub(Bandwidth(1, 2));
    EXPECT_EQ(t.value(), Bandwidth(1, 3));
    EXPECT_TRUE(t.conserved());
    EXPECT_EQ(t.total_added(), Rational(5, 6));
    EXPECT_EQ(t.total_removed(), Rational(1, 2));
}
