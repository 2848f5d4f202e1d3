#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace immtsf {

template <typename Scalar> using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar> using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

enum class ErrorKind {
  Input,
  Parse,
  Shape,
  Split,
  Capacity,
  Ambiguity,
  UndefinedNormalizer,
  EmptyData,
  ZeroRange,
  InsufficientData,
  NoKeys,
  UndefinedMetric,
  Divergence,
  CheckFailure,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so the CLI can pick an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Caller-side problems (bad files, bad shapes, bad flags) as opposed to internal failures.
  bool is_input_error() const noexcept {
    return kind_ != ErrorKind::Divergence && kind_ != ErrorKind::CheckFailure;
  }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Input: return "input error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Shape: return "dimension mismatch";
    case ErrorKind::Split: return "split error";
    case ErrorKind::Capacity: return "capacity error";
    case ErrorKind::Ambiguity: return "ambiguity error";
    case ErrorKind::UndefinedNormalizer: return "undefined normalizer";
    case ErrorKind::EmptyData: return "empty data";
    case ErrorKind::ZeroRange: return "zero range";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::NoKeys: return "no keys";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::Divergence: return "training divergence";
    case ErrorKind::CheckFailure: return "check failure";
  }
  return "error";
}

}  // namespace immtsf
