#include "pimdn/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pimdn/errors.hpp"

namespace pimdn {

bool Dataset::fully_labeled() const {
  if (label.size() != context.size()) return false;
  for (int c : label) {
    if (c <= 0) return false;
  }
  return true;
}

void validate(const Dataset& data) {
  if (data.target.size() != data.context.size()) {
    throw InvalidInput("dataset has " + std::to_string(data.context.size()) + " contexts but " +
                       std::to_string(data.target.size()) + " targets");
  }
  if (!data.label.empty() && data.label.size() != data.context.size()) {
    throw InvalidInput("dataset label column length does not match the records");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data.context[i]) || !std::isfinite(data.target[i])) {
      throw InvalidInput("dataset record " + std::to_string(i) + " is not finite");
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  validate(data);
  const bool labeled = data.has_labels();
  out << (labeled ? "context,target,label\n" : "context,target\n");
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.context[i]) << ',' << format_double(data.target[i]);
    if (labeled) out << ',' << data.label[i];
    out << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset_csv(out, data);
  if (!out) throw IoError("failed writing " + path.string());
}

namespace detail {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, "not a number: '" + std::string(field) + "'");
  }
  return v;
}

int parse_int(std::string_view field, std::size_t line_no) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, "not an integer: '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace detail

using detail::parse_double;
using detail::parse_int;

Dataset read_dataset_csv(std::istream& in) {
  Dataset data;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool labeled = false;
  if (line == "context,target,label") {
    labeled = true;
  } else if (line != "context,target") {
    throw ParseError(1, "unexpected header '" + line + "'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != (labeled ? 3u : 2u)) {
      throw ParseError(line_no, "expected " + std::to_string(labeled ? 3 : 2) + " fields");
    }
    data.context.push_back(parse_double(fields[0], line_no));
    data.target.push_back(parse_double(fields[1], line_no));
    if (labeled) data.label.push_back(parse_int(fields[2], line_no));
  }
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_dataset_csv(in);
}

Standardization fit_standardization(const Dataset& data) {
  Standardization s;
  if (data.empty()) return s;
  const auto n = static_cast<double>(data.size());
  auto moments = [n](const std::vector<double>& v, double& mean, double& sd) {
    double sum = 0.0;
    for (double x : v) sum += x;
    mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) sd = 1.0;
  };
  moments(data.context, s.context_mean, s.context_std);
  moments(data.target, s.target_mean, s.target_std);
  return s;
}

}  // namespace pimdn
