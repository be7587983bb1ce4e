#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sb {

enum class ErrorCode {
  RowSumExceedsOne,
  RewardOutOfBounds,
  NotAbsorbing,
  SingularSystem,
  ZeroOccupancy,
  TruncationBudgetExceeded,
  NotTransient,
  MaxLenExceeded,
  FixedPointNotContractive,
  ZeroVisits,
  InsufficientBudget,
  NonFiniteIterate,
  BudgetExceeded,
  ParameterMismatch,
  InvalidArgument,
  ParseError,
};

std::string_view to_string(ErrorCode code);

// Input/model problems, as opposed to failures while estimating.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<unsigned long> state = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), state_(state) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<unsigned long> state() const noexcept { return state_; }

 private:
  ErrorCode code_;
  std::optional<unsigned long> state_;
};

}  // namespace sb
