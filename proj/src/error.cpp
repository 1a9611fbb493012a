#include "pmcad/error.hpp"

namespace pmcad {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::missing_file: return "missing_file";
    case Errc::io_failure: return "io_failure";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_header: return "bad_header";
    case Errc::wrong_kind: return "wrong_kind";
    case Errc::truncated_payload: return "truncated_payload";
    case Errc::trailing_payload: return "trailing_payload";
    case Errc::invalid_dims: return "invalid_dims";
    case Errc::invalid_spacing: return "invalid_spacing";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::out_of_range: return "out_of_range";
    case Errc::dimension_mismatch: return "dimension_mismatch";
    case Errc::empty_input: return "empty_input";
    case Errc::empty_growth: return "empty_growth";
    case Errc::single_class: return "single_class";
    case Errc::resample_failure: return "resample_failure";
    case Errc::case_mismatch: return "case_mismatch";
  }
  return "unknown";
}

Error::Error(Errc code, std::string field, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + " [" + field + "]: " + message),
      code_(code),
      field_(std::move(field)) {}

}  // namespace pmcad
