#ifndef MEDEX_IO_HPP
#define MEDEX_IO_HPP

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace medex::io {

//! Shortest decimal text that round-trips to the same double.
std::string format_real(double v);

//! Up to `precision` significant digits (printf %g semantics).
std::string format_real(double v, int precision);

//! Write content to path via a temp file in the same directory plus rename,
//! so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

//! Split raw CSV text into rows of trimmed cells. No quoting: the formats in
//! this project are purely numeric plus short tokens.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

//! n x p matrix as CSV with header `<prefix>1,...,<prefix>p`.
std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::string& prefix = "x",
                          bool header = true, int precision = 0);

//! Parse a numeric CSV; a non-numeric first row is treated as a header and
//! skipped. Ragged or non-numeric data rows raise FormatError.
Eigen::MatrixXd csv_to_matrix(std::string_view text);

}  // namespace medex::io

#endif
