#pragma once

#include <string>
#include <string_view>

namespace smpcval {

/// Git blob object id: SHA-1 over "blob <size>\0" followed by the content.
std::string git_blob_hash(std::string_view content);

/// Exact hexadecimal rendering of a double ("%a"), for bit-level hashing.
std::string hex_double(double value);

}  // namespace smpcval
