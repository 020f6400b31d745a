#pragma once

#include <stdexcept>
#include <string>

namespace swlab {

// Argument outside the mathematical domain of a function (e.g. x < 1/q in F).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Operation called outside its documented regime (e.g. beta <= q for the
// fixed point, infeasible coupling target).
class precondition_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Enumeration or brute-force oracle asked for an instance above its cost guard.
class size_guard_error : public std::length_error {
 public:
  using std::length_error::length_error;
};

// No profile reached the requested TV level within its time grid.
class profile_too_short_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reading or writing a run file failed.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace swlab
