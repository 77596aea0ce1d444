#pragma once

#include <stdexcept>
#include <string>

namespace segcal {

/// Error categories used across the toolkit. Every distinct validation
/// failure gets its own code so callers (and tests) can tell them apart.
enum class errc {
  io_failure,            // OS-level open/read/write failure
  missing_file,          // referenced path does not exist
  bad_magic,             // file does not start with the expected magic
  unsupported_format,    // recognized but unsupported variant (e.g. ASCII PGM)
  bad_header,            // malformed header fields or unknown version
  bad_maxval,            // PGM maxval is not 255
  truncated,             // payload shorter than the header promises
  trailing_data,         // extra bytes after the payload (strict mode)
  dimension_overflow,    // H*W*C does not fit in addressable memory
  nan_entry,             // non-finite value in a float raster
  not_normalized,        // per-pixel probability sum outside tolerance
  value_out_of_range,    // probability entry outside [0, 1]
  shape_mismatch,        // rasters disagree on H/W (or buffer length is wrong)
  class_out_of_range,    // label id >= C and not the ignore id
  class_count_mismatch,  // accumulators/maps disagree on C
  bin_count_mismatch,    // calibration accumulators disagree on M
  empty_input,           // degenerate input (H*W = 0, empty accumulator, ...)
  duplicate_id,          // manifest ids are not unique
  inconsistent_classes,  // manifest entries disagree on C
  parse_error,           // JSON/text parse failure
  invalid_argument,      // bad parameter value (thresholds, config, ...)
};

const char* errc_name(errc code) noexcept;

/// True for failures of the I/O layer itself (as opposed to invalid content
/// or arguments). The CLI maps these to exit code 2, everything else to 1.
inline bool is_io_error(errc code) noexcept {
  return code == errc::io_failure || code == errc::missing_file;
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace segcal
