#include "sb/error.hpp"

namespace sb {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RowSumExceedsOne: return "RowSumExceedsOne";
    case ErrorCode::RewardOutOfBounds: return "RewardOutOfBounds";
    case ErrorCode::NotAbsorbing: return "NotAbsorbing";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ZeroOccupancy: return "ZeroOccupancy";
    case ErrorCode::TruncationBudgetExceeded: return "TruncationBudgetExceeded";
    case ErrorCode::NotTransient: return "NotTransient";
    case ErrorCode::MaxLenExceeded: return "MaxLenExceeded";
    case ErrorCode::FixedPointNotContractive: return "FixedPointNotContractive";
    case ErrorCode::ZeroVisits: return "ZeroVisits";
    case ErrorCode::InsufficientBudget: return "InsufficientBudget";
    case ErrorCode::NonFiniteIterate: return "NonFiniteIterate";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::ParameterMismatch: return "ParameterMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::RowSumExceedsOne:
    case ErrorCode::RewardOutOfBounds:
    case ErrorCode::NotAbsorbing:
    case ErrorCode::ParameterMismatch:
    case ErrorCode::InvalidArgument:
    case ErrorCode::ParseError:
    case ErrorCode::NotTransient:
      return true;
    default:
      return false;
  }
}

}  // namespace sb
