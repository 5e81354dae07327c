#pragma once

#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "ause/core.hpp"

namespace ause::testing {

inline void expect_error(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

inline ProbabilityStack stack_from_rows(const std::vector<std::vector<float>>& rows) {
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return ProbabilityStack(1, rows.size(), rows.empty() ? 0 : rows.front().size(), std::move(data));
}

inline ClassCatalog catalog_of(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
  return ClassCatalog(names);
}

}  // namespace ause::testing
