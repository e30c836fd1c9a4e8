#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hype {

// Geometry called with inputs where the result is undefined (apex at the
// origin, coincident points). These indicate caller bugs, not data noise.
struct degenerate_geometry : std::domain_error {
    using std::domain_error::domain_error;
};

// A stream of samples violated a dataset-level invariant (e.g. duplicate id).
struct data_integrity_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Base for binary-format failures. Carries the file path and the byte
// offset where the problem was detected.
struct format_error : std::runtime_error {
    format_error(const std::string& path, std::size_t offset, const std::string& what)
        : std::runtime_error(path + ": " + what + " (byte offset " + std::to_string(offset) + ")"),
          path(path),
          offset(offset) {}

    std::string path;
    std::size_t offset;
};

struct magic_error : format_error {
    using format_error::format_error;
};

struct version_error : format_error {
    using format_error::format_error;
};

struct checksum_error : format_error {
    using format_error::format_error;
};

struct truncation_error : format_error {
    using format_error::format_error;
};

// Training aborted because the loss became non-finite.
struct divergence_error : std::runtime_error {
    divergence_error(std::size_t step, const std::string& what)
        : std::runtime_error(what + " at step " + std::to_string(step)), step(step) {}

    std::size_t step;
};

}  // namespace hype
