#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace cdomm {

// Malformed or missing input data. CLI exit code 1.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition.
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

// The model produced a value outside the domain of a formula
// (log of a non-positive factor, division by a vanishing weight). CLI exit code 2.
class NumericSingularity : public std::runtime_error {
  public:
    NumericSingularity(std::string module, double t, int k, double x, const std::string& what)
        : std::runtime_error(format(module, t, k, x, what)), module_(std::move(module)), t_(t), k_(k),
          x_(x) {}

    const std::string& module() const { return module_; }
    double t() const { return t_; }
    int k() const { return k_; }
    double x() const { return x_; }

  private:
    static std::string format(const std::string& module, double t, int k, double x,
                              const std::string& what) {
        std::ostringstream os;
        os << module << ": " << what << " at t=" << t << " k=" << k << " x=" << x;
        return os.str();
    }
    std::string module_;
    double t_;
    int k_;
    double x_;
};

// Not enough Monte Carlo samples survive the weighting to form an estimate.
class InsufficientPaths : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

inline void require_data(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

} // namespace cdomm
