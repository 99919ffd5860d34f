#pragma once

#include <stdexcept>
#include <string>

namespace partfed {

// Bad scenario/CLI input. Mapped to exit code 1 by the CLI.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / dataset-file trouble. Mapped to exit code 2 by the CLI.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace partfed
