// Two-pass CSV ingestion helpers: dtype inference, then typed row streaming.
#pragma once

#include <filesystem>
#include <functional>

#include "tracebench/value.hpp"

namespace tracebench {

struct CsvSchema {
  std::vector<ColumnMeta> columns;
  std::int64_t data_rows = 0;
  std::uint64_t bytes = 0;
};

// A column is int64 if every non-empty cell is an integer, else float64 if
// every non-empty cell is a decimal, else text. Quoted cells count as text.
// Headerless files get columns V1..Vn.
CsvSchema infer_csv_schema(const std::filesystem::path& path, bool has_header);

void for_each_csv_row(const std::filesystem::path& path, bool has_header, const std::vector<ColumnMeta>& columns,
                      const std::function<void(Row&&)>& sink);

}  // namespace tracebench
