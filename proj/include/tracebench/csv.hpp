// Streaming CSV reader/writer. Dialect: comma delimiter, double-quote quoting
// with doubled-quote escapes, LF or CRLF line endings.
#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tracebench/value.hpp"

namespace tracebench {

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CsvField {
  std::string_view text;
  bool quoted = false;
};

// Reads records from a file through a growable block buffer. Field views stay
// valid until the next call to next().
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path, std::size_t block_size = 1 << 20);
  ~CsvReader();
  CsvReader(const CsvReader&) = delete;
  CsvReader& operator=(const CsvReader&) = delete;

  // Returns false at end of input. A blank line yields one empty unquoted field.
  bool next(std::vector<CsvField>& fields);
  // 1-based line number of the record most recently returned.
  std::size_t line() const { return record_line_; }
  std::uint64_t bytes_consumed() const { return consumed_; }

 private:
  bool fill();
  std::optional<std::size_t> find_record_end(std::size_t& newlines);

  std::FILE* file_ = nullptr;
  std::vector<char> buf_;
  std::size_t begin_ = 0;
  std::size_t end_ = 0;
  std::size_t scan_from_ = 0;
  bool scan_in_quotes_ = false;
  std::size_t scan_newlines_ = 0;
  bool eof_ = false;
  std::size_t next_line_ = 1;
  std::size_t record_line_ = 0;
  std::uint64_t consumed_ = 0;
};

// Splits one in-memory line (no trailing newline) into fields; used for small
// inputs and tests.
std::vector<std::string> split_csv_line(std::string_view line);

// Converts a field to a typed cell. Unquoted empty fields are null; quoted
// empty fields are empty text (null for numeric columns).
Value parse_cell(const CsvField& field, DType dtype, std::size_t line);

enum class CellClass : std::uint8_t { empty, integer, decimal, text };
CellClass classify_cell(const CsvField& field);

// Buffered writer producing the dialect above. Text is always quoted so that
// re-import infers text again; numbers and nulls are written bare.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void write_header(const std::vector<ColumnMeta>& columns);
  void write_row(const Row& row);
  void write_fields(const std::vector<std::string>& fields);
  void close();

 private:
  void put_quoted(std::string_view s);
  void flush_if_needed();

  std::FILE* file_ = nullptr;
  std::string buf_;
  std::filesystem::path path_;
};

std::string quote_csv(std::string_view s);

// Parses a whole file into a table of inferred dtypes (small files: tests,
// trace tables, series).
Table read_csv_table(const std::filesystem::path& path, const std::string& table_name, bool has_header);
void write_csv_table(const std::filesystem::path& path, const Table& table, bool header = true);

}  // namespace tracebench
