#pragma once

#include "forecaster/common/error.hpp"

#include <gtest/gtest.h>

// Runs f and checks it throws forecaster::Error with the given code.
#define EXPECT_CODE(expr, ec)                                                                                         \
	do {                                                                                                              \
		try {                                                                                                         \
			(void)(expr);                                                                                             \
			ADD_FAILURE() << #expr " did not throw";                                                                  \
		} catch (const ::forecaster::Error &e_) {                                                                     \
			EXPECT_EQ(e_.code(), (ec)) << e_.what();                                                                  \
		}                                                                                                             \
	} while (0)
