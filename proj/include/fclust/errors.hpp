#ifndef FCLUST_ERRORS_HPP
#define FCLUST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fclust {

// Error taxonomy maps onto CLI exit codes: validation -> 1, numerical -> 2, io -> 3.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations inside the library (dimension mismatches etc.).
struct InternalError : std::logic_error {
  explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace fclust

#endif
