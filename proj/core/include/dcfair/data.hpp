#pragma once

#include "dcfair/csv.hpp"
#include "dcfair/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcfair::data {

enum class FeatureKind { Numeric, Categorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
};

struct DataSchema {
  std::string target_column;
  std::string positive_label;
  std::optional<std::string> negative_label;  // when unset, any other value maps to y=0
  std::string protected_column;
  std::string protected_one_value;
  std::optional<std::string> protected_zero_value;
  std::vector<FeatureColumn> feature_columns;
  // Append s as a trailing 0/1 input column after the encoded features.
  bool protected_as_input = false;

  void validate() const;
};

// Encoded rows (x, y, s). Rows are immutable once built; derived datasets
// (splits, biased copies) are new values.
struct LabeledDataset {
  Matrix features;
  Labels labels;
  Labels protected_attr;
  std::vector<RowId> row_ids;
  std::vector<std::string> feature_names;

  std::size_t size() const { return labels.size(); }
  std::size_t width() const { return static_cast<std::size_t>(features.cols()); }

  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  void validate() const;
};

// Fitted preprocessing: per-column standardization statistics and category
// levels. Persisted with model checkpoints so new CSVs encode identically.
struct EncodedColumn {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  double mean = 0.0;
  double scale = 1.0;
  std::vector<std::string> levels;  // sorted; 2 levels encode to one indicator of levels[1]
  std::size_t width() const;
};

struct FeatureEncoder {
  DataSchema schema;
  std::vector<EncodedColumn> columns;

  std::size_t width() const;
  std::vector<std::string> feature_names() const;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::size_t encoding_width = 0;
  std::size_t unseen_levels = 0;  // only when encoding with a pre-fitted encoder
  std::vector<std::string> dropped_reasons;

  std::string summary() const;
};

struct LoadedData {
  LabeledDataset dataset;
  FeatureEncoder encoder;
  LoadReport report;
  csv::Table raw;  // kept rows only, aligned with row_ids
};

// Fits the encoder on the loaded rows. If the file carries `__y`, `__s` and
// `__row_id` columns (written by write_dataset_csv) those override the
// schema mapping of labels, protected attribute and ids.
LoadedData load_csv(const std::string& path, const DataSchema& schema);
LoadedData load_table(const csv::Table& table, const DataSchema& schema);

// Encodes with a previously fitted encoder (checkpoint inference path).
LoadedData load_csv_with_encoder(const std::string& path, const FeatureEncoder& encoder);

// Raw columns of `source` for each row of `ds` (matched by row_id) plus
// `__y`, `__s`, `__row_id`.
void write_dataset_csv(const std::string& path, const LoadedData& source, const LabeledDataset& ds);

struct SplitSpec {
  std::array<double, 3> ratios{0.34, 0.33, 0.33};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Splits {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
};

Splits split(const LabeledDataset& ds, const SplitSpec& spec);

// Proportions over (s, y): cell[s][y]. Cells sum to 1.
using GroupLabelTable = std::array<std::array<double, 2>, 2>;
GroupLabelTable group_label_table(const LabeledDataset& ds);

}  // namespace dcfair::data
