#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace panelmc {

// Error taxonomy. Exit-code mapping (used by the CLI): config problems -> 2,
// data problems -> 3, numerical failures -> 4.
enum class ErrorKind {
  Config,
  Io,
  Parse,
  UnbalancedPanel,
  InvalidAdoption,
  EmptyPanel,
  InestimableEffect,
  Dimension,
  EmptySplit,
  EmptyAggregate,
  NoGap,
  EmptyPlacebo,
  RankDeficient,
  DegenerateFit,
  Numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::Config:
      case ErrorKind::Io:
        return 2;
      case ErrorKind::Parse:
      case ErrorKind::UnbalancedPanel:
      case ErrorKind::InvalidAdoption:
      case ErrorKind::EmptyPanel:
      case ErrorKind::InestimableEffect:
      case ErrorKind::Dimension:
      case ErrorKind::EmptySplit:
      case ErrorKind::EmptyAggregate:
      case ErrorKind::NoGap:
      case ErrorKind::EmptyPlacebo:
        return 3;
      case ErrorKind::RankDeficient:
      case ErrorKind::DegenerateFit:
      case ErrorKind::Numerical:
        return 4;
    }
    return 4;
  }

 private:
  ErrorKind kind_;
};

namespace detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& oss, const T& value, const Rest&... rest) {
  oss << value;
  append_all(oss, rest...);
}
}  // namespace detail

template <typename... Parts>
[[noreturn]] void fail(ErrorKind kind, const Parts&... parts) {
  std::ostringstream oss;
  detail::append_all(oss, parts...);
  throw Error(kind, oss.str());
}

template <typename... Parts>
void require(bool condition, ErrorKind kind, const Parts&... parts) {
  if (!condition) fail(kind, parts...);
}

}  // namespace panelmc
