// Copyright 2026 The RUI-SE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace rui {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RUI_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

RUI_DEFINE_ERROR(FormatError);     // unsupported container or codec
RUI_DEFINE_ERROR(RateError);       // sample rate other than 16 kHz
RUI_DEFINE_ERROR(IoError);         // read/write failure
RUI_DEFINE_ERROR(LengthError);     // signal too short for the operation
RUI_DEFINE_ERROR(ShapeError);      // inconsistent tensor/spectrum shapes
RUI_DEFINE_ERROR(EnergyError);     // silent signal where energy is required
RUI_DEFINE_ERROR(InventoryError);  // missing or empty input collections
RUI_DEFINE_ERROR(ConfigError);     // invalid configuration value or key
RUI_DEFINE_ERROR(ReferenceError);  // zero-energy metric reference
RUI_DEFINE_ERROR(AuditError);      // refinement ledger identity violated

#undef RUI_DEFINE_ERROR

/// Raised when a forward operation produces a non-finite value.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(std::string op)
      : Error("non-finite value produced by operation '" + op + "'"),
        op_(std::move(op)) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

}  // namespace rui
