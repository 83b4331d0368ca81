#include "adaptsr/error.hpp"

namespace adaptsr {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_record: return "MalformedRecord";
    case Errc::prob_sum_violation: return "ProbSumViolation";
    case Errc::empty_log: return "EmptyLog";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::truncated_file: return "TruncatedFile";
    case Errc::dimension_overflow: return "DimensionOverflow";
    case Errc::malformed_image: return "MalformedImage";
    case Errc::image_too_small: return "ImageTooSmall";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::too_few_frames: return "TooFewFrames";
    case Errc::missing_table_entry: return "MissingTableEntry";
    case Errc::missing_probs: return "MissingProbs";
    case Errc::missing_field: return "MissingField";
    case Errc::empty_input: return "EmptyInput";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::degenerate_labels: return "DegenerateLabels";
    case Errc::metric_undefined_on_resample: return "MetricUndefinedOnResample";
    case Errc::guard_on_non_sr: return "GuardOnNonSR";
    case Errc::zero_normalizer: return "ZeroNormalizer";
    case Errc::too_few_subjects: return "TooFewSubjects";
    case Errc::invalid_model_params: return "InvalidModelParams";
    case Errc::schema_mismatch: return "SchemaMismatch";
    case Errc::io_failure: return "IoFailure";
  }
  return "Unknown";
}

namespace {

std::string format_message(Errc code, const std::string& message, std::size_t line) {
  std::string out(to_string(code));
  if (line > 0) {
    out += " at line " + std::to_string(line);
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(Errc code, const std::string& message, std::size_t line)
    : std::runtime_error(format_message(code, message, line)), code_(code), line_(line) {}

}  // namespace adaptsr
