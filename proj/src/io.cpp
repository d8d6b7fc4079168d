#include "mtad/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>

namespace mtad {

namespace {

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvFile f;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (f.header.empty()) {
      f.header = split_csv_line(line);
      continue;
    }
    f.rows.push_back(split_csv_line(line));
    f.line_numbers.push_back(line_no);
  }
  if (f.header.empty()) throw DataError(path.string() + ": missing header row");
  return f;
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  double v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw DataError(path.string() + ":" + std::to_string(line) + ": \"" + text + "\" is not a number");
  return v;
}

Index parse_index(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  Index v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw DataError(path.string() + ":" + std::to_string(line) + ": \"" + text + "\" is not an integer");
  return v;
}

bool parse_flag(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  if (text == "0") return false;
  if (text == "1") return true;
  throw DataError(path.string() + ":" + std::to_string(line) + ": flag must be 0 or 1, got \"" + text + "\"");
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void expect_width(const CsvFile& f, std::size_t i, std::size_t width, const std::filesystem::path& path) {
  if (f.rows[i].size() != width)
    throw DataError(path.string() + ":" + std::to_string(f.line_numbers[i]) + ": expected " + std::to_string(width) +
                    " fields, found " + std::to_string(f.rows[i].size()));
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Table read_values_csv(const std::filesystem::path& path) {
  const CsvFile f = read_csv(path);
  Table t;
  t.names = f.header;
  const std::size_t k = t.names.size();
  t.values.resize(static_cast<Index>(f.rows.size()), static_cast<Index>(k));
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    expect_width(f, r, k, path);
    for (std::size_t c = 0; c < k; ++c)
      t.values(static_cast<Index>(r), static_cast<Index>(c)) = parse_double(f.rows[r][c], path, f.line_numbers[r]);
  }
  if (t.values.rows() == 0) throw DataError(path.string() + ": no data rows");
  return t;
}

void write_values_csv(const std::filesystem::path& path, const Table& table) {
  if (static_cast<Index>(table.names.size()) != table.values.cols())
    throw DimensionError("write_values_csv: " + std::to_string(table.names.size()) + " names for " +
                         std::to_string(table.values.cols()) + " columns");
  write_matrix_csv(path, table.values, table.names);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out = open_out(path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

Flags read_labels_csv(const std::filesystem::path& path) {
  const CsvFile f = read_csv(path);
  Flags labels;
  labels.reserve(f.rows.size());
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    expect_width(f, r, 1, path);
    labels.push_back(parse_flag(f.rows[r][0], path, f.line_numbers[r]));
  }
  return labels;
}

void write_labels_csv(const std::filesystem::path& path, const Flags& labels, const std::string& header) {
  std::ofstream out = open_out(path);
  out << header << '\n';
  for (bool b : labels) out << (b ? '1' : '0') << '\n';
}

std::vector<RootCause> read_root_causes_csv(const std::filesystem::path& path, const std::vector<std::string>& names) {
  std::map<std::string, Index> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = static_cast<Index>(i);
  const CsvFile f = read_csv(path);
  std::vector<RootCause> out;
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    expect_width(f, r, 3, path);
    RootCause c;
    c.begin = parse_index(f.rows[r][0], path, f.line_numbers[r]);
    c.end = parse_index(f.rows[r][1], path, f.line_numbers[r]);
    if (c.end < c.begin)
      throw DataError(path.string() + ":" + std::to_string(f.line_numbers[r]) + ": event ends before it starts");
    for (const std::string& name : split_csv_line(f.rows[r][2])) {
      auto it = index.find(name);
      if (it == index.end())
        throw DataError(path.string() + ":" + std::to_string(f.line_numbers[r]) + ": unknown feature \"" + name +
                        "\"");
      c.features.push_back(it->second);
    }
    out.push_back(std::move(c));
  }
  return out;
}

void write_root_causes_csv(const std::filesystem::path& path, const std::vector<RootCause>& causes,
                           const std::vector<std::string>& names) {
  std::ofstream out = open_out(path);
  out << "event_start,event_end,features\n";
  for (const RootCause& c : causes) {
    std::string joined;
    for (std::size_t i = 0; i < c.features.size(); ++i)
      joined += (i ? "," : "") + names.at(static_cast<std::size_t>(c.features[i]));
    out << c.begin << ',' << c.end << ',' << quote(joined) << '\n';
  }
}

void write_scores_csv(const std::filesystem::path& path, const ScoreSeries& scores,
                      const std::vector<std::string>& names) {
  if (static_cast<Index>(names.size()) != scores.k())
    throw DimensionError("write_scores_csv: " + std::to_string(names.size()) + " names for " +
                         std::to_string(scores.k()) + " features");
  std::ofstream out = open_out(path);
  out << "timestamp,total";
  for (const std::string& n : names) out << ",s_" << n;
  out << '\n';
  for (Index r = 0; r < scores.size(); ++r) {
    out << scores.offset + r << ',' << format_double(scores.total(r));
    for (Index c = 0; c < scores.k(); ++c) out << ',' << format_double(scores.feature_scores(r, c));
    out << '\n';
  }
}

ScoreSeries read_scores_csv(const std::filesystem::path& path) {
  const CsvFile f = read_csv(path);
  if (f.header.size() < 3 || f.header[0] != "timestamp" || f.header[1] != "total")
    throw DataError(path.string() + ": expected a timestamp,total,s_... header");
  if (f.rows.empty()) throw DataError(path.string() + ": no score rows");
  const std::size_t k = f.header.size() - 2;
  ScoreSeries s;
  s.total.resize(static_cast<Index>(f.rows.size()));
  s.feature_scores.resize(static_cast<Index>(f.rows.size()), static_cast<Index>(k));
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    expect_width(f, r, k + 2, path);
    const Index t = parse_index(f.rows[r][0], path, f.line_numbers[r]);
    if (r == 0) s.offset = t;
    if (t != s.offset + static_cast<Index>(r))
      throw DataError(path.string() + ":" + std::to_string(f.line_numbers[r]) + ": timestamps must be consecutive");
    s.total(static_cast<Index>(r)) = parse_double(f.rows[r][1], path, f.line_numbers[r]);
    for (std::size_t c = 0; c < k; ++c)
      s.feature_scores(static_cast<Index>(r), static_cast<Index>(c)) =
          parse_double(f.rows[r][c + 2], path, f.line_numbers[r]);
  }
  return s;
}

void write_alarms_csv(const std::filesystem::path& path, const Flags& alarms) {
  std::ofstream out = open_out(path);
  out << "timestamp,flag\n";
  for (std::size_t i = 0; i < alarms.size(); ++i) out << i << ',' << (alarms[i] ? '1' : '0') << '\n';
}

Flags read_alarms_csv(const std::filesystem::path& path) {
  const CsvFile f = read_csv(path);
  Flags out;
  out.reserve(f.rows.size());
  for (std::size_t r = 0; r < f.rows.size(); ++r) {
    expect_width(f, r, 2, path);
    if (parse_index(f.rows[r][0], path, f.line_numbers[r]) != static_cast<Index>(r))
      throw DataError(path.string() + ":" + std::to_string(f.line_numbers[r]) + ": timestamps must count from 0");
    out.push_back(parse_flag(f.rows[r][1], path, f.line_numbers[r]));
  }
  return out;
}

}  // namespace mtad
