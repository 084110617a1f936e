#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pimdn {

/// Scalar-context, scalar-target records with optional class labels.
///
/// Labels are 1-based class ids; 0 marks an unlabeled record. An empty
/// `label` vector means the whole dataset is unlabeled.
struct Dataset {
  std::vector<double> context;
  std::vector<double> target;
  std::vector<int> label;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t size() const { return context.size(); }
  bool empty() const { return context.empty(); }
  bool has_labels() const { return !label.empty(); }
  bool fully_labeled() const;
};

/// Throws InvalidInput on length mismatches or non-finite values.
void validate(const Dataset& data);

/// Dataset CSV: header `context,target` or `context,target,label`, one record
/// per line, values printed with 17 significant digits, LF newlines.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Full-precision decimal used by every CSV writer.
std::string format_double(double v);

/// Mean and standard deviation used to standardize contexts and targets.
struct Standardization {
  double context_mean = 0.0;
  double context_std = 1.0;
  double target_mean = 0.0;
  double target_std = 1.0;

  double context_to_unit(double x) const { return (x - context_mean) / context_std; }
  double target_to_unit(double u) const { return (u - target_mean) / target_std; }
  double target_from_unit(double z) const { return target_mean + target_std * z; }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

/// Population mean and standard deviation; a zero spread maps to 1.
Standardization fit_standardization(const Dataset& data);

namespace detail {

std::vector<std::string_view> split_csv(std::string_view line);
/// Whole-field parses; ParseError carries `line_no`.
double parse_double(std::string_view field, std::size_t line_no);
int parse_int(std::string_view field, std::size_t line_no);

}  // namespace detail

}  // namespace pimdn
