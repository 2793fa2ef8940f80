#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace szaszlab {

// Error taxonomy shared by the C++ core and the C API layer. The CLI maps
// Usage to exit code 2 and everything else to exit code 3.
enum class ErrorKind {
  Usage,        // malformed names, expressions, configs
  Domain,       // point outside a domain (polytope, rho-domain, support)
  Convergence,  // Newton / window growth failed to converge
  Resource,     // truncation caps exceeded
  Dependency,   // missing norm source or derivative data
  Numeric,      // indefinite Hessians, divergent integrals, self-check failures
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

} // namespace szaszlab
