#pragma once

#include <string>

#include "lkfkit/sdp.hpp"

namespace lkfkit {

/// Canonical SDPA sparse (".dat-s") text of a normalized problem:
/// header (variable count, block count, block sizes, zero objective), then
/// "matno blkno i j value" entries, upper triangle only, 17 significant
/// digits, sorted by (matno, blkno, i, j). Exporting an imported problem
/// reproduces the bytes exactly.
std::string export_sdpa(const SdpProblem& p);

/// Parses the format written by export_sdpa (and plain SDPA sparse files).
/// Throws std::runtime_error with a line number on malformed input.
SdpProblem import_sdpa(const std::string& text);

}  // namespace lkfkit
