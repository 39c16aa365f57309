#include "medex/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "medex/errors.hpp"

namespace medex::io {

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_real(double v, int precision) {
  char buf[64];
  auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, precision);
  return std::string(buf, ptr);
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  fs::path tmp = dir / (path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::size_t c = 0;
    while (true) {
      std::size_t comma = line.find(',', c);
      cells.push_back(trim(line.substr(c, comma == std::string_view::npos ? comma : comma - c)));
      if (comma == std::string_view::npos) break;
      c = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::string& prefix, bool header,
                          int precision) {
  std::string out;
  if (header) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += prefix + std::to_string(j + 1);
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += precision > 0 ? format_real(m(i, j), precision) : format_real(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd csv_to_matrix(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty()) return Eigen::MatrixXd(0, 0);

  std::size_t start = 0;
  double probe;
  if (!parse_double(rows[0][0], probe)) start = 1;  // header row
  if (start >= rows.size()) return Eigen::MatrixXd(0, static_cast<Eigen::Index>(rows[0].size()));

  const std::size_t ncol = rows[start].size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size() - start),
                    static_cast<Eigen::Index>(ncol));
  for (std::size_t i = start; i < rows.size(); ++i) {
    if (rows[i].size() != ncol)
      throw FormatError("csv row " + std::to_string(i + 1) + " has " +
                        std::to_string(rows[i].size()) + " cells, expected " +
                        std::to_string(ncol));
    for (std::size_t j = 0; j < ncol; ++j) {
      double v;
      if (!parse_double(rows[i][j], v))
        throw FormatError("csv row " + std::to_string(i + 1) + ", column " +
                          std::to_string(j + 1) + " is not numeric: '" + rows[i][j] + "'");
      m(static_cast<Eigen::Index>(i - start), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return m;
}

}  // namespace medex::io
