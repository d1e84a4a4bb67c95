#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mslds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error taxonomy. Every failure mode surfaced by the library is one of
// these, so callers can catch by contract rather than by message.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotSpdError : Error { using Error::Error; };
struct NotSymmetricError : Error { using Error::Error; };
struct OverflowError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct NoiseFileMissingError : Error { using Error::Error; };
struct RequiresObservationMatrixError : Error { using Error::Error; };
struct NonPositiveRegularizerError : Error { using Error::Error; };
struct ModelMismatchError : Error { using Error::Error; };
struct InsufficientHistoryError : Error { using Error::Error; };
struct NotObservableError : Error { using Error::Error; };
struct NotControllableError : Error { using Error::Error; };
struct NoConvergenceError : Error { using Error::Error; };
struct UnstableFilterError : Error { using Error::Error; };
struct DimensionTooLargeError : Error { using Error::Error; };
struct NonMonicDivisorError : Error { using Error::Error; };
struct NotFoundError : Error { using Error::Error; };
struct MissingConstantsError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// Compensated (Kahan) accumulator. Losses in long marginally stable runs
// span many orders of magnitude, so plain += loses the small increments.
class KahanSum {
public:
    void add(double x) {
        double y = x - comp_;
        double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace mslds
