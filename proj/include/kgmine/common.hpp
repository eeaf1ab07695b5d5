#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgmine {

// Dense ids handed out in first-appearance order by the interning tables.
using NodeId = std::int32_t;
using LabelId = std::int32_t;
using RelationId = std::int32_t;
using ClassId = std::int32_t;

inline constexpr NodeId kInvalidNode = -1;

/// Error type for everything in this library: parse failures, contract
/// violations, bad configuration. Messages carry file/line context where
/// applicable.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

/// Writes `content` to a temporary file next to `path` and renames it into
/// place, so readers never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& content);

/// Formats a double with enough digits to identify it unambiguously
/// (>= 6 significant digits, typically 17).
std::string format_double(double value);

}  // namespace kgmine
