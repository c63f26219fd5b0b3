// Copyright (c) 2026 The erupt authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace erupt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad values (non-finite, out-of-range arguments, zero-length vectors).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Filesystem / serialization failures; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Instrumented allocator budget exceeded (bench "OOM" outcome).
class AllocBudgetError : public Error {
 public:
  using Error::Error;
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline ShapeError shape_mismatch(const char* op, const std::vector<int>& a,
                                 const std::vector<int>& b) {
  return ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                    " vs " + shape_str(b));
}

}  // namespace erupt
