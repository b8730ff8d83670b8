#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rforge {

// Base of every domain failure. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

// Input-format failures carry the 1-based line of the offending record.
class LineError : public Error {
public:
  LineError(std::string kind, std::size_t line, const std::string& what)
      : Error(std::move(kind), "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

#define RFORGE_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what) : Error(#Name, what) {}             \
  };

#define RFORGE_DEFINE_LINE_ERROR(Name)                                          \
  class Name : public LineError {                                              \
  public:                                                                      \
    Name(std::size_t line, const std::string& what) : LineError(#Name, line, what) {} \
  };

// clicklog
RFORGE_DEFINE_LINE_ERROR(DecodeError)
RFORGE_DEFINE_LINE_ERROR(SequenceError)
RFORGE_DEFINE_LINE_ERROR(OrderError)
RFORGE_DEFINE_ERROR(ConfigError)

// embedding
RFORGE_DEFINE_ERROR(EmptySkeletonError)
RFORGE_DEFINE_ERROR(MissingCoordError)
RFORGE_DEFINE_ERROR(DimensionMismatch)

// geodesic
RFORGE_DEFINE_ERROR(InvalidGrid)
RFORGE_DEFINE_ERROR(OutOfHull)
RFORGE_DEFINE_ERROR(SingularMetric)
RFORGE_DEFINE_ERROR(ShortPrefix)

// probcheck
RFORGE_DEFINE_ERROR(RangeError)
RFORGE_DEFINE_ERROR(ScaleError)
RFORGE_DEFINE_ERROR(InconsistentInput)
RFORGE_DEFINE_ERROR(DegenerateDenominator)

// melucci
RFORGE_DEFINE_ERROR(StarvationError)
RFORGE_DEFINE_ERROR(ModeMismatch)
RFORGE_DEFINE_ERROR(ZeroCount)

// automaton
RFORGE_DEFINE_ERROR(UnknownSymbol)
RFORGE_DEFINE_ERROR(UnknownState)

// rota
RFORGE_DEFINE_ERROR(CycleError)
RFORGE_DEFINE_ERROR(MaskViolation)
RFORGE_DEFINE_ERROR(EmptySubspace)

#undef RFORGE_DEFINE_ERROR
#undef RFORGE_DEFINE_LINE_ERROR

}  // namespace rforge
