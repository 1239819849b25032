#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace rfdtp {

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

/// Complex baseband burst plus the sample rate it was captured at.
struct IqFrame {
    CVec samples;
    double sample_rate_hz = 0.0;
    std::string id;

    Eigen::Index size() const { return samples.size(); }
};

// Error taxonomy. Construction-time misuse (bad parameter values) raises
// config_error; bad runtime data raises input_error; the remaining types
// identify which processing stage gave up.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct degenerate_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct detection_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct estimation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct training_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double rms(const CVec& x) {
    if (x.size() == 0) return 0.0;
    return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

inline double rms(const RVec& x) {
    if (x.size() == 0) return 0.0;
    return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

} // namespace rfdtp
