#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relseq {

// Incompatible matrix/vector shapes. Message names both shapes.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values encountered during training or rollout.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t index)
        : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

    // Failing step (rollout) or epoch (training).
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// Malformed or unreadable tensor container.
class ContainerError : public std::runtime_error {
public:
    explicit ContainerError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace relseq
