#pragma once

#include <stdexcept>
#include <string>

namespace pmcad {

enum class Errc {
  missing_file,
  io_failure,
  bad_magic,
  bad_header,
  wrong_kind,
  truncated_payload,
  trailing_payload,
  invalid_dims,
  invalid_spacing,
  invalid_argument,
  out_of_range,
  dimension_mismatch,
  empty_input,
  empty_growth,
  single_class,
  resample_failure,
  case_mismatch,
};

const char* errc_name(Errc code);

// Every library failure is reported as an Error carrying a machine-readable
// code and the name of the offending field or argument.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string field, const std::string& message);

  Errc code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Errc code_;
  std::string field_;
};

}  // namespace pmcad
