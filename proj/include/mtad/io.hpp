#pragma once

// CSV files exchanged between the commands. Floats are written with 17
// significant digits so every double survives a write/read cycle exactly.

#include <filesystem>
#include <string>
#include <vector>

#include "mtad/evaluation.hpp"
#include "mtad/scoring.hpp"

namespace mtad {

struct Table {
  std::vector<std::string> names;
  Matrix values;  // rows x names.size()
};

std::string format_double(double v);

Table read_values_csv(const std::filesystem::path& path);
void write_values_csv(const std::filesystem::path& path, const Table& table);

// Single 0/1 column with a header row.
Flags read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const Flags& labels, const std::string& header = "label");

// event_start,event_end,features where features is a comma-joined, quoted list of names.
std::vector<RootCause> read_root_causes_csv(const std::filesystem::path& path, const std::vector<std::string>& names);
void write_root_causes_csv(const std::filesystem::path& path, const std::vector<RootCause>& causes,
                           const std::vector<std::string>& names);

// timestamp,total,s_<name>...; the offset is the first timestamp.
void write_scores_csv(const std::filesystem::path& path, const ScoreSeries& scores,
                      const std::vector<std::string>& names);
ScoreSeries read_scores_csv(const std::filesystem::path& path);

// timestamp,flag for every stream row.
void write_alarms_csv(const std::filesystem::path& path, const Flags& alarms);
Flags read_alarms_csv(const std::filesystem::path& path);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header);

// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace mtad
