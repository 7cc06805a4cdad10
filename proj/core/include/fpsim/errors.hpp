#pragma once

#include <stdexcept>
#include <string>

namespace fpsim {

// Error taxonomy. Callers that can recover catch the specific type; the CLI
// maps ConfigError to exit code 2 and everything else to 3.

// bad user-supplied configuration (out-of-range knob, malformed file, ...)
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// structurally valid input outside an operation's domain (empty sequence, ...)
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// caller broke an API contract (context without BOS, vocabulary mismatch, ...)
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// an attack removed every admissible token; the decode cannot continue
struct AttackDegenerateError : std::runtime_error {
    explicit AttackDegenerateError(const std::string& msg) : std::runtime_error(msg) {}
};

// a generator ran out of fresh material (unique queries, rank candidates, ...)
struct ExhaustedError : std::runtime_error {
    explicit ExhaustedError(const std::string& msg) : std::runtime_error(msg) {}
};

// two inputs that must be distinct collide (duplicate trigger queries, ...)
struct ConflictError : std::runtime_error {
    explicit ConflictError(const std::string& msg) : std::runtime_error(msg) {}
};

// filesystem / serialization failure
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fpsim
