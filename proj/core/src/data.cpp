#include "dcfair/data.hpp"

#include "dcfair/errors.hpp"
#include "dcfair/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace dcfair::data {

namespace {

constexpr const char* kYColumn = "__y";
constexpr const char* kSColumn = "__s";
constexpr const char* kRowIdColumn = "__row_id";
constexpr std::size_t kMaxReportedReasons = 20;

struct BinaryMapping {
  std::string one_value;
  std::optional<std::string> zero_value;
  std::string column;
};

std::uint8_t map_binary(const std::string& cell, const BinaryMapping& m, std::size_t row) {
  if (cell == m.one_value) return 1;
  if (cell.empty() || (m.zero_value && cell != *m.zero_value)) {
    throw ValueError("row " + std::to_string(row + 1) + ": value '" + cell + "' in column '" + m.column +
                     "' cannot be mapped to {0,1}");
  }
  return 0;
}

std::uint8_t parse_flag(const std::string& cell, const char* column, std::size_t row) {
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  throw ValueError("row " + std::to_string(row + 1) + ": column " + column + " must be 0 or 1, got '" + cell + "'");
}

// Shared by fit-and-encode and encode-with-fitted-encoder.
LoadedData build(const csv::Table& table, const DataSchema& schema, const FeatureEncoder* fitted) {
  schema.validate();
  const std::size_t target_col = table.column(schema.target_column);
  const std::size_t protected_col = table.column(schema.protected_column);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.feature_columns) feature_cols.push_back(table.column(f.name));

  const auto y_override = table.find_column(kYColumn);
  const auto s_override = table.find_column(kSColumn);
  const auto id_override = table.find_column(kRowIdColumn);

  const BinaryMapping label_map{schema.positive_label, schema.negative_label, schema.target_column};
  const BinaryMapping protected_map{schema.protected_one_value, schema.protected_zero_value,
                                    schema.protected_column};

  LoadedData out;
  out.raw.header = table.header;
  out.report.rows_read = table.rows.size();

  std::vector<std::size_t> kept;
  kept.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::optional<std::string> bad;
    for (std::size_t j = 0; j < feature_cols.size() && !bad; ++j) {
      if (schema.feature_columns[j].kind != FeatureKind::Numeric) continue;
      const auto v = csv::parse_number(row[feature_cols[j]]);
      if (!v || !std::isfinite(*v)) bad = schema.feature_columns[j].name;
    }
    if (bad) {
      ++out.report.rows_dropped;
      if (out.report.dropped_reasons.size() < kMaxReportedReasons) {
        out.report.dropped_reasons.push_back("row " + std::to_string(r + 1) + ": missing numeric value in '" +
                                             *bad + "'");
      }
      continue;
    }
    kept.push_back(r);
  }
  if (kept.empty()) throw DomainError("no usable rows in dataset");

  // Without an explicit negative label, a third distinct value is unmappable.
  auto check_two_values = [&](std::size_t col, const BinaryMapping& m) {
    if (m.zero_value) return;
    std::set<std::string> seen;
    for (std::size_t r : kept) {
      seen.insert(table.rows[r][col]);
      if (seen.size() > 2) {
        throw ValueError("column '" + m.column + "' has more than two distinct values; set the zero value explicitly");
      }
    }
  };
  if (!y_override) check_two_values(target_col, label_map);
  if (!s_override) check_two_values(protected_col, protected_map);

  FeatureEncoder encoder;
  if (fitted) {
    encoder = *fitted;
  } else {
    encoder.schema = schema;
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      EncodedColumn col;
      col.name = schema.feature_columns[j].name;
      col.kind = schema.feature_columns[j].kind;
      if (col.kind == FeatureKind::Numeric) {
        double sum = 0.0;
        for (std::size_t r : kept) sum += *csv::parse_number(table.rows[r][feature_cols[j]]);
        const double mean = sum / static_cast<double>(kept.size());
        double ss = 0.0;
        for (std::size_t r : kept) {
          const double d = *csv::parse_number(table.rows[r][feature_cols[j]]) - mean;
          ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(kept.size()));
        col.mean = mean;
        col.scale = sd > 1e-12 ? sd : 1.0;
      } else {
        std::set<std::string> levels;
        for (std::size_t r : kept) levels.insert(table.rows[r][feature_cols[j]]);
        col.levels.assign(levels.begin(), levels.end());
      }
      encoder.columns.push_back(std::move(col));
    }
  }
  if (encoder.columns.size() != feature_cols.size()) {
    throw SchemaError("encoder does not match schema feature columns");
  }

  const std::size_t n = kept.size();
  const std::size_t width = encoder.width();
  LabeledDataset& ds = out.dataset;
  ds.features = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  ds.labels.resize(n);
  ds.protected_attr.resize(n);
  ds.row_ids.resize(n);
  ds.feature_names = encoder.feature_names();
  out.raw.rows.reserve(n);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = kept[i];
    const auto& row = table.rows[r];
    ds.labels[i] = y_override ? parse_flag(row[*y_override], kYColumn, r) : map_binary(row[target_col], label_map, r);
    ds.protected_attr[i] =
        s_override ? parse_flag(row[*s_override], kSColumn, r) : map_binary(row[protected_col], protected_map, r);
    if (id_override) {
      const auto id = csv::parse_number(row[*id_override]);
      if (!id || *id != std::floor(*id)) throw ValueError("row " + std::to_string(r + 1) + ": bad __row_id");
      ds.row_ids[i] = static_cast<RowId>(*id);
    } else {
      ds.row_ids[i] = static_cast<RowId>(r);
    }

    Eigen::Index c = 0;
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const auto& col = encoder.columns[j];
      const std::string& cell = row[feature_cols[j]];
      if (col.kind == FeatureKind::Numeric) {
        ds.features(static_cast<Eigen::Index>(i), c++) = (*csv::parse_number(cell) - col.mean) / col.scale;
        continue;
      }
      const auto it = std::lower_bound(col.levels.begin(), col.levels.end(), cell);
      const bool known = it != col.levels.end() && *it == cell;
      if (!known) ++out.report.unseen_levels;
      const auto level = static_cast<Eigen::Index>(it - col.levels.begin());
      if (col.levels.size() == 2) {
        ds.features(static_cast<Eigen::Index>(i), c) = (known && level == 1) ? 1.0 : 0.0;
      } else if (known) {
        ds.features(static_cast<Eigen::Index>(i), c + level) = 1.0;
      }
      c += static_cast<Eigen::Index>(col.width());
    }
    if (encoder.schema.protected_as_input) {
      ds.features(static_cast<Eigen::Index>(i), c) = ds.protected_attr[i];
    }
    out.raw.rows.push_back(row);
  }
  out.encoder = std::move(encoder);
  out.report.encoding_width = width;
  ds.validate();
  return out;
}

}  // namespace

void DataSchema::validate() const {
  if (target_column.empty()) throw SchemaError("target_column is empty");
  if (protected_column.empty()) throw SchemaError("protected_column is empty");
  if (target_column == protected_column) throw SchemaError("target and protected column coincide");
  if (feature_columns.empty()) throw SchemaError("schema needs at least one feature column");
  std::set<std::string> names;
  for (const auto& f : feature_columns) {
    if (f.name == target_column) throw SchemaError("target column '" + f.name + "' listed as a feature");
    if (f.name == protected_column) throw SchemaError("protected column '" + f.name + "' listed as a feature");
    if (!names.insert(f.name).second) throw SchemaError("duplicate feature column '" + f.name + "'");
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  out.labels.reserve(indices.size());
  out.protected_attr.reserve(indices.size());
  out.row_ids.reserve(indices.size());
  out.feature_names = feature_names;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= size()) throw DomainError("subset index out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(src));
    out.labels.push_back(labels[src]);
    out.protected_attr.push_back(protected_attr[src]);
    out.row_ids.push_back(row_ids[src]);
  }
  return out;
}

void LabeledDataset::validate() const {
  const std::size_t n = labels.size();
  if (n == 0) throw DomainError("dataset is empty");
  if (protected_attr.size() != n || row_ids.size() != n || static_cast<std::size_t>(features.rows()) != n) {
    throw ShapeError("dataset arrays have mismatched lengths");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 1 || protected_attr[i] > 1) throw ValueError("labels and protected attribute must be 0/1");
  }
  if (!features.allFinite()) throw ValueError("non-finite encoded feature");
}

std::size_t EncodedColumn::width() const {
  if (kind == FeatureKind::Numeric) return 1;
  return levels.size() == 2 ? 1 : levels.size();
}

std::size_t FeatureEncoder::width() const {
  std::size_t w = 0;
  for (const auto& c : columns) w += c.width();
  return w + (schema.protected_as_input ? 1 : 0);
}

std::vector<std::string> FeatureEncoder::feature_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns) {
    if (c.kind == FeatureKind::Numeric) {
      names.push_back(c.name);
    } else if (c.levels.size() == 2) {
      names.push_back(c.name + "=" + c.levels[1]);
    } else {
      for (const auto& l : c.levels) names.push_back(c.name + "=" + l);
    }
  }
  if (schema.protected_as_input) names.push_back(schema.protected_column);
  return names;
}

std::string LoadReport::summary() const {
  std::ostringstream os;
  os << "rows_read=" << rows_read << '\n'
     << "rows_dropped=" << rows_dropped << '\n'
     << "rows_kept=" << (rows_read - rows_dropped) << '\n'
     << "encoding_width=" << encoding_width << '\n';
  if (unseen_levels) os << "unseen_levels=" << unseen_levels << '\n';
  for (const auto& r : dropped_reasons) os << "dropped: " << r << '\n';
  return os.str();
}

LoadedData load_table(const csv::Table& table, const DataSchema& schema) {
  return build(table, schema, nullptr);
}

LoadedData load_csv(const std::string& path, const DataSchema& schema) {
  return build(csv::read_file(path), schema, nullptr);
}

LoadedData load_csv_with_encoder(const std::string& path, const FeatureEncoder& encoder) {
  return build(csv::read_file(path), encoder.schema, &encoder);
}

void write_dataset_csv(const std::string& path, const LoadedData& source, const LabeledDataset& ds) {
  std::unordered_map<RowId, std::size_t> raw_index;
  for (std::size_t i = 0; i < source.dataset.row_ids.size(); ++i) raw_index.emplace(source.dataset.row_ids[i], i);

  std::vector<std::size_t> keep_cols;
  std::vector<std::string> header;
  for (std::size_t c = 0; c < source.raw.header.size(); ++c) {
    const auto& h = source.raw.header[c];
    if (h == kYColumn || h == kSColumn || h == kRowIdColumn) continue;
    keep_cols.push_back(c);
    header.push_back(h);
  }
  header.insert(header.end(), {kYColumn, kSColumn, kRowIdColumn});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  csv::write_row(out, header);
  std::vector<std::string> fields;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto it = raw_index.find(ds.row_ids[i]);
    if (it == raw_index.end()) throw DomainError("row id " + std::to_string(ds.row_ids[i]) + " not in source");
    const auto& raw = source.raw.rows[it->second];
    fields.clear();
    for (std::size_t c : keep_cols) fields.push_back(raw[c]);
    fields.push_back(std::to_string(ds.labels[i]));
    fields.push_back(std::to_string(ds.protected_attr[i]));
    fields.push_back(std::to_string(ds.row_ids[i]));
    csv::write_row(out, fields);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw SpecError("split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw SpecError("split ratios must sum to 1");
}

Splits split(const LabeledDataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = ds.size();
  if (n < 3) throw DomainError("split needs at least 3 rows");
  auto part = [n](double ratio) { return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_val = part(spec.ratios[1]);
  const std::size_t n_test = part(spec.ratios[2]);
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(order);

  auto take = [&](std::size_t begin, std::size_t count) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(begin + count));
    std::sort(idx.begin(), idx.end());
    return ds.subset(idx);
  };
  Splits out;
  out.train = take(0, n_train);
  out.validation = take(n_train, n_val);
  out.test = take(n_train + n_val, n_test);
  return out;
}

GroupLabelTable group_label_table(const LabeledDataset& ds) {
  if (ds.size() == 0) throw DomainError("group_label_table on empty dataset");
  std::array<std::array<std::size_t, 2>, 2> counts{};
  for (std::size_t i = 0; i < ds.size(); ++i) ++counts[ds.protected_attr[i]][ds.labels[i]];
  GroupLabelTable t{};
  const double n = static_cast<double>(ds.size());
  for (int s = 0; s < 2; ++s)
    for (int y = 0; y < 2; ++y) t[s][y] = static_cast<double>(counts[s][y]) / n;
  return t;
}

}  // namespace dcfair::data
