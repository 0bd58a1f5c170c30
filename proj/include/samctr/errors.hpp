#pragma once

#include <stdexcept>
#include <string>

namespace samctr {

/// Broad failure classes. The CLI maps each to a distinct exit status.
enum class ErrorKind {
  kShape,
  kDomain,
  kContract,
  kCatalog,
  kConfig,
  kData,
  kNumeric,
  kUndefinedMetric,
  kVerification,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define SAMCTR_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

SAMCTR_DEFINE_ERROR(ShapeError, kShape)
SAMCTR_DEFINE_ERROR(DomainError, kDomain)
SAMCTR_DEFINE_ERROR(ContractError, kContract)
SAMCTR_DEFINE_ERROR(CatalogError, kCatalog)
SAMCTR_DEFINE_ERROR(ConfigError, kConfig)
SAMCTR_DEFINE_ERROR(DataError, kData)
SAMCTR_DEFINE_ERROR(NumericError, kNumeric)
SAMCTR_DEFINE_ERROR(UndefinedMetricError, kUndefinedMetric)
SAMCTR_DEFINE_ERROR(VerificationError, kVerification)

#undef SAMCTR_DEFINE_ERROR

}  // namespace samctr
