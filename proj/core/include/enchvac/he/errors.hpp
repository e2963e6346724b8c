// Copyright 2026 The enchvac Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace enchvac::he {

class HeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParams : public HeError {
 public:
  using HeError::HeError;
};

// Raised when an operation would need more rescalings than the modulus chain
// has left (operand at level 0 fed to a multiplication, etc.).
class DepthExhausted : public HeError {
 public:
  using HeError::HeError;
};

class SlotMismatch : public HeError {
 public:
  using HeError::HeError;
};

class KeyError : public HeError {
 public:
  using HeError::HeError;
};

class SerializationError : public HeError {
 public:
  using HeError::HeError;
};

}  // namespace enchvac::he
