#pragma once

#include <stdexcept>
#include <string>

namespace iqp {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (purity out of
// [0.5, 1], non-finite parameter, malformed patch, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Both homogeneous components vanished. Cannot happen for the f_p family.
class DegenerateImage : public Error {
 public:
  using Error::Error;
};

// Direction requested for a state at the centre of the Bloch ball.
class CenterState : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

// Orbit landed on a critical point while a strict Lyapunov estimate was requested.
class CriticalOrbitHit : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken (e.g. Bloch vector left the ball by more than
// floating-point drift).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class TaskMismatch : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated binary file.
class CorruptFile : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public CorruptFile {
 public:
  using CorruptFile::CorruptFile;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqp
