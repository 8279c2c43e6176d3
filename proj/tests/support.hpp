#pragma once

#include <gtest/gtest.h>

#include <filesystem>

#include "tinker/error.hpp"

namespace tinker::testing {

inline std::filesystem::path data_dir() { return TINKER_DATA_DIR; }

}  // namespace tinker::testing

#define EXPECT_TINKER_ERROR(stmt, ecode)                                            \
  do {                                                                              \
    try {                                                                           \
      stmt;                                                                         \
      ADD_FAILURE() << "expected " << ::tinker::to_string(ecode) << ", no throw";   \
    } catch (const ::tinker::Error& e_) {                                           \
      EXPECT_EQ(::tinker::to_string(e_.code()), ::tinker::to_string(ecode)) << e_.what(); \
    }                                                                               \
  } while (0)
