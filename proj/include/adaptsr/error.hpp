#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace adaptsr {

enum class Errc {
  malformed_record,
  prob_sum_violation,
  empty_log,
  unsupported_format,
  truncated_file,
  dimension_overflow,
  malformed_image,
  image_too_small,
  dimension_mismatch,
  too_few_frames,
  missing_table_entry,
  missing_probs,
  missing_field,
  empty_input,
  invalid_argument,
  degenerate_labels,
  metric_undefined_on_resample,
  guard_on_non_sr,
  zero_normalizer,
  too_few_subjects,
  invalid_model_params,
  schema_mismatch,
  io_failure,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
// line() is 1-based for log/file errors and 0 when not applicable.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::size_t line = 0);

  Errc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Errc code_;
  std::size_t line_;
};

}  // namespace adaptsr
