/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/error.h
 * \brief Exception taxonomy shared by every module. The CLI maps each kind onto an exit code.
 */
#ifndef CDTAX_ERROR_H_
#define CDTAX_ERROR_H_

#include <stdexcept>
#include <string>

namespace cdtax {

enum class ErrorKind {
  kParse,
  kValidation,
  kLookup,
  kContract,
  kCoverage,
  kZeroMass,
  kDomain,
  kSharedSupport,
  kBudget,
  kBackend,
  kConfig,
  kIo,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define CDTAX_DEFINE_ERROR(Name, Kind)                                          \
  class Name : public Error {                                                   \
   public:                                                                      \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

CDTAX_DEFINE_ERROR(ParseError, kParse)
CDTAX_DEFINE_ERROR(ValidationError, kValidation)
CDTAX_DEFINE_ERROR(LookupError, kLookup)
CDTAX_DEFINE_ERROR(ContractError, kContract)
CDTAX_DEFINE_ERROR(CoverageError, kCoverage)
CDTAX_DEFINE_ERROR(DomainError, kDomain)
CDTAX_DEFINE_ERROR(SharedSupportError, kSharedSupport)
CDTAX_DEFINE_ERROR(BackendError, kBackend)
CDTAX_DEFINE_ERROR(ConfigError, kConfig)
CDTAX_DEFINE_ERROR(IoError, kIo)

#undef CDTAX_DEFINE_ERROR

/*! \brief All valid tokens carry zero model mass; the step index is -1 outside a decode loop. */
class ZeroMassError : public Error {
 public:
  explicit ZeroMassError(const std::string& message, long step = -1)
      : Error(ErrorKind::kZeroMass, message), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class BudgetError : public Error {
 public:
  BudgetError(const std::string& message, double estimated_nodes)
      : Error(ErrorKind::kBudget, message), estimated_nodes_(estimated_nodes) {}
  double estimated_nodes() const { return estimated_nodes_; }

 private:
  double estimated_nodes_;
};

}  // namespace cdtax

#endif  // CDTAX_ERROR_H_
