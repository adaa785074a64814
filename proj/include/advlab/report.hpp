#pragma once

#include <string>
#include <vector>

#include "advlab/common.hpp"

namespace advlab {

// Tabular artifact with string cells. Numeric cells are formatted with
// fmt_double by the producer, so identical runs serialize to identical
// bytes; there are no timestamps anywhere in the output.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// First line carries the config hash as a comment, then the header, then the
// rows. Cells containing commas, quotes or newlines are quoted.
std::string to_csv_string(const CsvTable& t, uint64_t config_hash);
void write_csv(const std::string& path, const CsvTable& t, uint64_t config_hash);

// Parses a file written by write_csv and refuses a hash mismatch, so stale
// artifacts cannot be mixed into a different experiment.
CsvTable read_csv(const std::string& path, uint64_t expect_hash);

// Extracts just the stamped hash.
uint64_t csv_config_hash(const std::string& path);

std::string csv_escape(const std::string& cell);

// Median by sorting a copy; even counts average the two middle values.
double median(std::vector<double> v);

}  // namespace advlab
