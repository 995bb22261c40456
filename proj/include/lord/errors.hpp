#ifndef LORD_ERRORS_HPP
#define LORD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lord {

/// Malformed or inconsistent input files (LSDV, FFD, blueprint, config).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure conditions: singular Jacobians, degenerate densities,
/// empty Funk-Radon bands, failed warp generation.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lord

#endif
