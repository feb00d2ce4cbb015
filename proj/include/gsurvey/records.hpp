#pragma once

// Response records: one row per query outcome, the interchange format for
// data collected by an external survey runner.
//
// JSONL (canonical), one object per line:
//   {"message":"A","persona_id":"p0","perturbation_id":"s3","replicate":0,"response":1}
// with an optional "model_id". CSV uses the same names as header columns.
// Other JSON keys are ignored so collection logs can carry extra fields.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gsurvey/model.hpp"

namespace gsurvey {

enum class DataFormat { kJsonl, kCsv };

DataFormat parse_data_format(std::string_view name);
// ".csv" -> kCsv, anything else -> kJsonl.
DataFormat format_from_path(const std::filesystem::path& path);

struct ResponseRecord {
  std::string message;
  std::string persona_id;
  std::string perturbation_id;
  std::uint64_t replicate = 0;
  std::uint8_t response = 0;
  std::optional<std::string> model_id;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

struct ResponseDataset {
  std::vector<ResponseRecord> records;

  // Message labels in order of first appearance.
  std::vector<std::string> messages() const;

  friend bool operator==(const ResponseDataset&, const ResponseDataset&) = default;
};

// Parses and validates: response must be 0 or 1, and each
// (message, persona, perturbation, replicate) key may appear only once.
// Throws ParseError (with line number) or DuplicateRecordError.
ResponseDataset parse_responses(std::istream& in, DataFormat format, const std::string& source);
ResponseDataset read_responses(const std::filesystem::path& path, DataFormat format);
ResponseDataset read_responses(const std::filesystem::path& path);

void write_responses(std::ostream& out, const ResponseDataset& data, DataFormat format);
void write_responses(const std::filesystem::path& path, const ResponseDataset& data,
                     DataFormat format);

// One missing (message, persona, perturbation) cell and its absent replicates.
struct MissingCell {
  std::string message;
  std::string persona_id;
  std::string perturbation_id;
  std::vector<std::uint64_t> missing_replicates;
};

struct MessageShape {
  std::string message;
  std::vector<std::string> persona_ids;       // first-appearance order
  std::vector<std::string> perturbation_ids;  // first-appearance order
  std::size_t n_replicates = 0;               // 1 + largest replicate index
};

struct CompletenessReport {
  std::vector<MessageShape> shapes;
  std::vector<MissingCell> missing;
  bool complete() const noexcept { return missing.empty(); }
  std::string describe(std::size_t max_cells = 20) const;
};

// Each message must cover the full rectangle of its own personas,
// perturbations and replicate indices 0..R-1.
CompletenessReport check_completeness(const ResponseDataset& data);

struct LabeledTensor {
  ResponseTensor tensor;
  std::vector<std::string> persona_ids;
  std::vector<std::string> perturbation_ids;
};

// Throws DataError if `message` is absent, IncompleteDataError if its
// rectangle has holes.
LabeledTensor to_tensor(const ResponseDataset& data, const std::string& message);

// Pairs two messages by persona id and by perturbation position. Requires
// both complete, the same persona set, and equal M and R.
PairedResponses to_paired(const ResponseDataset& data, const std::string& message_a,
                          const std::string& message_b);

ResponseDataset to_records(const PairedResponses& data, const std::string& label_a = "A",
                           const std::string& label_b = "B",
                           const std::optional<std::string>& model_id = std::nullopt);
ResponseDataset to_records(const LabeledTensor& data, const std::string& label,
                           const std::optional<std::string>& model_id = std::nullopt);

}  // namespace gsurvey
