#include <gtest/gtest.h>

#include "pedsim/pedsim.hpp"

using namespace pedsim;

TEST(Actions, MooreOrderAndOffsets) {
    EXPECT_EQ(kActions.size(), 9u);
    EXPECT_EQ(dx(Action::NW), -1);
    EXPECT_EQ(dy(Action::N), -1);
    EXPECT_EQ(dy(Action::S), 1);
    EXPECT_TRUE(is_diagonal(Action::SE));
    EXPECT_FALSE(is_diagonal(Action::E));
}
