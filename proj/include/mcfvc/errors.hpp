#pragma once

#include <stdexcept>
#include <string>

namespace mcfvc {

// Shape/dimension mismatch between operands.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Input value outside the operation's domain (negative temperature, bad rate, ...).
struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Broken internal contract (non-scalar backward root, mask/parameter mismatch, ...).
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Invalid experiment setup (missing split, insufficient classes, locked run dir, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure during training (divergence, non-finite values).
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mcfvc
