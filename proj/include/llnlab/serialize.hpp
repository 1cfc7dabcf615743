#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "llnlab/conditions.hpp"
#include "llnlab/families.hpp"
#include "llnlab/montecarlo.hpp"
#include "llnlab/proofkit.hpp"

namespace llnlab {

using Json = nlohmann::ordered_json;

/// x rounded to 12 significant digits.
double round12(double x);
/// JSON number rounded to 12 significant digits; non-finite values become
/// the strings "inf", "-inf" and "nan".
Json number(double x);
Json numbers(const std::vector<double>& xs);

/// One CSV table. Numbers are written with 12 significant digits, strings are
/// quoted when they contain a comma, quote or line break. LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& add(double x);
  CsvTable& add(std::int64_t x);
  CsvTable& add(int x) { return add(static_cast<std::int64_t>(x)); }
  CsvTable& add(bool x);
  CsvTable& add(const std::string& x);
  /// Ends the current row; throws if it does not match the header width.
  void end_row();
  std::size_t rows() const noexcept { return rows_; }
  std::string str() const { return body_; }

 private:
  std::size_t width_;
  std::size_t pending_ = 0;
  std::size_t rows_ = 0;
  std::string body_;
};

std::string format_number(double x);

/// Writes `content` to `path`, creating parent directories. Error(io_error) on failure.
void write_text(const std::filesystem::path& path, const std::string& content);

Json to_json(const FamilyDescriptor& descriptor);
/// Throws Error(config_invalid) with the offending field in the message.
FamilyDescriptor family_from_json(const Json& j);

Json to_json(const Normalizer& normalizer);
Normalizer normalizer_from_json(const Json& j);

Json summary_json(const SeriesReport& report);
CsvTable series_csv(const SeriesReport& report);

Json summary_json(const RatioReport& report);
CsvTable ratio_csv(const RatioReport& report);

Json summary_json(const ExperimentResult& result);
CsvTable experiment_csv(const ExperimentResult& result);

Json summary_json(const SandwichReport& report);
CsvTable sandwich_csv(const SandwichReport& report);

Json summary_json(const ProbabilityEstimate& estimate);
Json summary_json(const DependenceProbe& probe);
Json summary_json(const ChebyshevCheck& check);

}  // namespace llnlab
