#pragma once

#include <stdexcept>
#include <string>

namespace edgeorch {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or identifiers that do not line up (plan vs topology, unlinked pairs).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Malformed or unresolvable scenario/plan configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Scenario cannot be turned into an episode (budget exceeds capacity).
class SetupError : public Error {
 public:
  using Error::Error;
};

// No server can host the next pending instance.
class DeadlockError : public Error {
 public:
  using Error::Error;
};

// A chain stage has no reachable instance.
class UnreachableStageError : public Error {
 public:
  using Error::Error;
};

// lambda >= c * mu
class UnstableQueueError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken (e.g. flow conservation).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameter during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace edgeorch
