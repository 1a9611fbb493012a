#include "pmcad/matrix.hpp"

#include <algorithm>

#include "pmcad/error.hpp"

namespace pmcad {

void Matrix::append_row(std::span<const double> values) {
  if (rows == 0 && cols == 0) cols = values.size();
  if (values.size() != cols) throw Error(Errc::dimension_mismatch, "row", "row length does not match matrix");
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace pmcad
