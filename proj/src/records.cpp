#include "gsurvey/records.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "gsurvey/csv.hpp"
#include "gsurvey/error.hpp"

namespace gsurvey {

namespace {

using nlohmann::json;

std::string record_key(const ResponseRecord& r) {
  std::string key;
  key.reserve(r.message.size() + r.persona_id.size() + r.perturbation_id.size() + 24);
  key.append(r.message).push_back('\x1f');
  key.append(r.persona_id).push_back('\x1f');
  key.append(r.perturbation_id).push_back('\x1f');
  key.append(std::to_string(r.replicate));
  return key;
}

std::string json_id(const json& value, const char* field, const std::string& source,
                    std::size_t line) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<std::int64_t>());
  if (value.is_number_unsigned()) return std::to_string(value.get<std::uint64_t>());
  throw ParseError(source, line, std::string("field '") + field + "' must be a string or integer");
}

ResponseRecord record_from_json(const json& obj, const std::string& source, std::size_t line) {
  if (!obj.is_object()) throw ParseError(source, line, "expected a JSON object");
  auto require = [&](const char* field) -> const json& {
    auto it = obj.find(field);
    if (it == obj.end()) throw ParseError(source, line, std::string("missing field '") + field + "'");
    return *it;
  };
  ResponseRecord r;
  const json& message = require("message");
  if (!message.is_string()) throw ParseError(source, line, "field 'message' must be a string");
  r.message = message.get<std::string>();
  r.persona_id = json_id(require("persona_id"), "persona_id", source, line);
  r.perturbation_id = json_id(require("perturbation_id"), "perturbation_id", source, line);

  const json& replicate = require("replicate");
  if (replicate.is_number_unsigned()) {
    r.replicate = replicate.get<std::uint64_t>();
  } else if (replicate.is_number_integer() && replicate.get<std::int64_t>() >= 0) {
    r.replicate = static_cast<std::uint64_t>(replicate.get<std::int64_t>());
  } else {
    throw ParseError(source, line, "field 'replicate' must be a nonnegative integer");
  }

  const json& response = require("response");
  if (response.is_boolean()) {
    r.response = response.get<bool>() ? 1 : 0;
  } else if (response.is_number_integer() &&
             (response.get<std::int64_t>() == 0 || response.get<std::int64_t>() == 1)) {
    r.response = static_cast<std::uint8_t>(response.get<std::int64_t>());
  } else {
    throw ParseError(source, line, "field 'response' must be 0 or 1");
  }

  if (auto it = obj.find("model_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError(source, line, "field 'model_id' must be a string");
    r.model_id = it->get<std::string>();
  }
  return r;
}

void add_checked(ResponseDataset& data, std::unordered_set<std::string>& seen, ResponseRecord r,
                 const std::string& source, std::size_t line) {
  if (!seen.insert(record_key(r)).second)
    throw DuplicateRecordError(source + ":" + std::to_string(line) + ": duplicate record for (" +
                               r.message + ", " + r.persona_id + ", " + r.perturbation_id +
                               ", replicate " + std::to_string(r.replicate) + ")");
  data.records.push_back(std::move(r));
}

ResponseDataset parse_jsonl(std::istream& in, const std::string& source) {
  ResponseDataset data;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
    }
    add_checked(data, seen, record_from_json(obj, source, line), source, line);
  }
  return data;
}

ResponseDataset parse_csv_records(std::istream& in, const std::string& source) {
  const CsvTable table = read_csv(in, source);
  const std::size_t c_message = table.column("message", source);
  const std::size_t c_persona = table.column("persona_id", source);
  const std::size_t c_perturbation = table.column("perturbation_id", source);
  const std::size_t c_replicate = table.column("replicate", source);
  const std::size_t c_response = table.column("response", source);
  const bool has_model = table.has_column("model_id");
  const std::size_t c_model = has_model ? table.column("model_id", source) : 0;

  ResponseDataset data;
  std::unordered_set<std::string> seen;
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& row = table.rows[k];
    const std::size_t line = table.line_of(k);
    ResponseRecord r;
    r.message = row[c_message];
    r.persona_id = row[c_persona];
    r.perturbation_id = row[c_perturbation];
    const std::int64_t replicate = parse_int(row[c_replicate], source, line);
    if (replicate < 0) throw ParseError(source, line, "replicate must be nonnegative");
    r.replicate = static_cast<std::uint64_t>(replicate);
    const std::string& response = row[c_response];
    if (response == "0" || response == "false") r.response = 0;
    else if (response == "1" || response == "true") r.response = 1;
    else throw ParseError(source, line, "response must be 0 or 1, got '" + response + "'");
    if (has_model && !row[c_model].empty()) r.model_id = row[c_model];
    add_checked(data, seen, std::move(r), source, line);
  }
  return data;
}

// Index of each distinct value in first-appearance order.
struct Indexer {
  std::vector<std::string> labels;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t add(const std::string& label) {
    auto [it, inserted] = index.emplace(label, labels.size());
    if (inserted) labels.push_back(label);
    return it->second;
  }
};

struct MessageGrid {
  MessageShape shape;
  std::vector<std::uint8_t> present;
  ResponseTensor tensor;
};

MessageGrid build_grid(const ResponseDataset& data, const std::string& message) {
  Indexer personas;
  Indexer perturbations;
  std::uint64_t max_replicate = 0;
  bool any = false;
  for (const auto& r : data.records) {
    if (r.message != message) continue;
    personas.add(r.persona_id);
    perturbations.add(r.perturbation_id);
    max_replicate = std::max(max_replicate, r.replicate);
    any = true;
  }
  if (!any) throw DataError("no records for message '" + message + "'");

  MessageGrid grid;
  grid.shape.message = message;
  grid.shape.persona_ids = personas.labels;
  grid.shape.perturbation_ids = perturbations.labels;
  grid.shape.n_replicates = static_cast<std::size_t>(max_replicate) + 1;
  const std::size_t n = personas.labels.size();
  const std::size_t m = perturbations.labels.size();
  const std::size_t reps = grid.shape.n_replicates;
  if (n * m > (std::size_t{1} << 34) / reps)
    throw DataError("message '" + message + "' spans an implausibly large grid; check replicate indices");
  grid.tensor = ResponseTensor(n, m, reps);
  grid.present.assign(n * m * reps, 0);
  for (const auto& r : data.records) {
    if (r.message != message) continue;
    const std::size_t i = personas.index.at(r.persona_id);
    const std::size_t j = perturbations.index.at(r.perturbation_id);
    const auto k = static_cast<std::size_t>(r.replicate);
    grid.tensor.at(i, j, k) = r.response;
    grid.present[(i * m + j) * reps + k] = 1;
  }
  return grid;
}

void collect_missing(const MessageGrid& grid, std::vector<MissingCell>& out) {
  const std::size_t n = grid.shape.persona_ids.size();
  const std::size_t m = grid.shape.perturbation_ids.size();
  const std::size_t reps = grid.shape.n_replicates;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      MissingCell cell;
      for (std::size_t k = 0; k < reps; ++k)
        if (!grid.present[(i * m + j) * reps + k]) cell.missing_replicates.push_back(k);
      if (cell.missing_replicates.empty()) continue;
      cell.message = grid.shape.message;
      cell.persona_id = grid.shape.persona_ids[i];
      cell.perturbation_id = grid.shape.perturbation_ids[j];
      out.push_back(std::move(cell));
    }
}

}  // namespace

DataFormat parse_data_format(std::string_view name) {
  if (name == "jsonl" || name == "json") return DataFormat::kJsonl;
  if (name == "csv") return DataFormat::kCsv;
  throw UsageError("unknown data format '" + std::string(name) + "' (expected jsonl or csv)");
}

DataFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::kCsv : DataFormat::kJsonl;
}

std::vector<std::string> ResponseDataset::messages() const {
  Indexer labels;
  for (const auto& r : records) labels.add(r.message);
  return labels.labels;
}

ResponseDataset parse_responses(std::istream& in, DataFormat format, const std::string& source) {
  return format == DataFormat::kJsonl ? parse_jsonl(in, source) : parse_csv_records(in, source);
}

ResponseDataset read_responses(const std::filesystem::path& path, DataFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open response file '" + path.string() + "'");
  return parse_responses(in, format, path.string());
}

ResponseDataset read_responses(const std::filesystem::path& path) {
  return read_responses(path, format_from_path(path));
}

void write_responses(std::ostream& out, const ResponseDataset& data, DataFormat format) {
  if (format == DataFormat::kJsonl) {
    for (const auto& r : data.records) {
      out << "{\"message\":" << json(r.message).dump() << ",\"persona_id\":"
          << json(r.persona_id).dump() << ",\"perturbation_id\":" << json(r.perturbation_id).dump()
          << ",\"replicate\":" << r.replicate << ",\"response\":" << int{r.response};
      if (r.model_id) out << ",\"model_id\":" << json(*r.model_id).dump();
      out << "}\n";
    }
    return;
  }
  const bool with_model = std::any_of(data.records.begin(), data.records.end(),
                                      [](const ResponseRecord& r) { return r.model_id.has_value(); });
  CsvTable table;
  table.header = {"message", "persona_id", "perturbation_id", "replicate", "response"};
  if (with_model) table.header.push_back("model_id");
  for (const auto& r : data.records) {
    std::vector<std::string> row{r.message, r.persona_id, r.perturbation_id,
                                 std::to_string(r.replicate), std::to_string(int{r.response})};
    if (with_model) row.push_back(r.model_id.value_or(""));
    table.rows.push_back(std::move(row));
  }
  write_csv(out, table);
}

void write_responses(const std::filesystem::path& path, const ResponseDataset& data,
                     DataFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write response file '" + path.string() + "'");
  write_responses(out, data, format);
  if (!out) throw DataError("error while writing '" + path.string() + "'");
}

std::string CompletenessReport::describe(std::size_t max_cells) const {
  if (missing.empty()) return "complete";
  std::ostringstream os;
  os << missing.size() << " incomplete cell(s):";
  for (std::size_t k = 0; k < missing.size() && k < max_cells; ++k) {
    const auto& c = missing[k];
    os << "\n  (message " << c.message << ", persona " << c.persona_id << ", perturbation "
       << c.perturbation_id << ") missing replicate(s)";
    for (auto r : c.missing_replicates) os << ' ' << r;
  }
  if (missing.size() > max_cells) os << "\n  ... " << missing.size() - max_cells << " more";
  return os.str();
}

CompletenessReport check_completeness(const ResponseDataset& data) {
  CompletenessReport report;
  for (const auto& message : data.messages()) {
    MessageGrid grid = build_grid(data, message);
    collect_missing(grid, report.missing);
    report.shapes.push_back(std::move(grid.shape));
  }
  return report;
}

LabeledTensor to_tensor(const ResponseDataset& data, const std::string& message) {
  MessageGrid grid = build_grid(data, message);
  CompletenessReport report;
  collect_missing(grid, report.missing);
  if (!report.complete())
    throw IncompleteDataError("message '" + message + "' is not a complete N x M x R rectangle: " +
                              report.describe());
  return {std::move(grid.tensor), std::move(grid.shape.persona_ids),
          std::move(grid.shape.perturbation_ids)};
}

PairedResponses to_paired(const ResponseDataset& data, const std::string& message_a,
                          const std::string& message_b) {
  if (message_a == message_b) throw DataError("cannot pair message '" + message_a + "' with itself");
  LabeledTensor a = to_tensor(data, message_a);
  LabeledTensor b = to_tensor(data, message_b);
  const std::size_t n = a.tensor.n_personas();
  const std::size_t m = a.tensor.n_perturbations();
  const std::size_t r = a.tensor.n_replicates();
  if (b.tensor.n_perturbations() != m)
    throw ShapeError("messages '" + message_a + "' and '" + message_b + "' have different numbers " +
                     "of perturbations (" + std::to_string(m) + " vs " +
                     std::to_string(b.tensor.n_perturbations()) + ")");
  if (b.tensor.n_replicates() != r)
    throw ShapeError("messages '" + message_a + "' and '" + message_b +
                     "' have different replicate counts");
  if (b.tensor.n_personas() != n) throw ShapeError("messages have different persona sets");

  std::unordered_map<std::string, std::size_t> b_index;
  for (std::size_t i = 0; i < n; ++i) b_index.emplace(b.persona_ids[i], i);
  ResponseTensor b_aligned(n, m, r);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = b_index.find(a.persona_ids[i]);
    if (it == b_index.end())
      throw ShapeError("persona '" + a.persona_ids[i] + "' has responses for '" + message_a +
                       "' but not for '" + message_b + "'");
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = 0; k < r; ++k) b_aligned.at(i, j, k) = b.tensor.at(it->second, j, k);
  }
  return PairedResponses(std::move(a.tensor), std::move(b_aligned), std::move(a.persona_ids),
                         std::move(a.perturbation_ids), std::move(b.perturbation_ids));
}

namespace {

void append_message(ResponseDataset& out, const ResponseTensor& t, const std::string& label,
                    const std::vector<std::string>& personas,
                    const std::vector<std::string>& perturbations,
                    const std::optional<std::string>& model_id) {
  for (std::size_t i = 0; i < t.n_personas(); ++i)
    for (std::size_t j = 0; j < t.n_perturbations(); ++j)
      for (std::size_t k = 0; k < t.n_replicates(); ++k)
        out.records.push_back(
            {label, personas[i], perturbations[j], static_cast<std::uint64_t>(k), t.at(i, j, k),
             model_id});
}

}  // namespace

ResponseDataset to_records(const PairedResponses& data, const std::string& label_a,
                           const std::string& label_b, const std::optional<std::string>& model_id) {
  ResponseDataset out;
  out.records.reserve(2 * data.responses_a.raw().size());
  append_message(out, data.responses_a, label_a, data.persona_ids, data.perturbation_ids_a,
                 model_id);
  append_message(out, data.responses_b, label_b, data.persona_ids, data.perturbation_ids_b,
                 model_id);
  return out;
}

ResponseDataset to_records(const LabeledTensor& data, const std::string& label,
                           const std::optional<std::string>& model_id) {
  ResponseDataset out;
  append_message(out, data.tensor, label, data.persona_ids, data.perturbation_ids, model_id);
  return out;
}

}  // namespace gsurvey
