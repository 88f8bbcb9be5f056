#include "tracebench/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>

#include "tracebench/csv_schema.hpp"

namespace tracebench {

CsvReader::CsvReader(const std::filesystem::path& path, std::size_t block_size) : buf_(block_size) {
  file_ = std::fopen(path.c_str(), "rb");
  if (!file_) throw CsvError("cannot open '" + path.string() + "': " + std::strerror(errno), 0);
}

CsvReader::~CsvReader() {
  if (file_) std::fclose(file_);
}

bool CsvReader::fill() {
  if (eof_) return false;
  if (begin_ > 0) {
    std::memmove(buf_.data(), buf_.data() + begin_, end_ - begin_);
    scan_from_ -= begin_;
    end_ -= begin_;
    begin_ = 0;
  }
  if (end_ == buf_.size()) buf_.resize(buf_.size() * 2);
  const std::size_t n = std::fread(buf_.data() + end_, 1, buf_.size() - end_, file_);
  if (n == 0) {
    if (std::ferror(file_)) throw CsvError("read error", next_line_);
    eof_ = true;
    return false;
  }
  end_ += n;
  return true;
}

std::optional<std::size_t> CsvReader::find_record_end(std::size_t& newlines) {
  const char* data = buf_.data();
  std::size_t i = scan_from_;
  bool in_quotes = scan_in_quotes_;
  std::size_t nl = scan_newlines_;
  if (!in_quotes) {
    // Most records hold no quotes: find the newline and check the span.
    const void* hit = std::memchr(data + i, '\n', end_ - i);
    const std::size_t stop = hit ? static_cast<std::size_t>(static_cast<const char*>(hit) - data) : end_;
    if (!std::memchr(data + i, '"', stop - i)) {
      if (hit) {
        newlines = nl;
        return stop;
      }
      scan_from_ = end_;
      scan_newlines_ = nl;
      return std::nullopt;
    }
  }
  for (; i < end_; ++i) {
    const char c = data[i];
    if (c == '"') {
      in_quotes = !in_quotes;
    } else if (c == '\n') {
      if (!in_quotes) {
        newlines = nl;
        return i;
      }
      ++nl;
    }
  }
  scan_from_ = i;
  scan_in_quotes_ = in_quotes;
  scan_newlines_ = nl;
  return std::nullopt;
}

bool CsvReader::next(std::vector<CsvField>& fields) {
  std::size_t rec_end = 0;
  std::size_t inner_newlines = 0;
  bool has_newline = true;
  for (;;) {
    if (auto pos = find_record_end(inner_newlines)) {
      rec_end = *pos;
      break;
    }
    if (!fill()) {
      if (begin_ == end_) return false;
      if (scan_in_quotes_) throw CsvError("unterminated quoted field", next_line_);
      rec_end = end_;
      inner_newlines = scan_newlines_;
      has_newline = false;
      break;
    }
  }

  char* p = buf_.data() + begin_;
  char* e = buf_.data() + rec_end;
  if (e > p && e[-1] == '\r') --e;
  record_line_ = next_line_;
  next_line_ += 1 + inner_newlines;
  consumed_ += (rec_end - begin_) + (has_newline ? 1 : 0);
  begin_ = has_newline ? rec_end + 1 : rec_end;
  scan_from_ = begin_;
  scan_in_quotes_ = false;
  scan_newlines_ = 0;

  fields.clear();
  for (;;) {
    if (p < e && *p == '"') {
      char* out = p;
      char* r = p + 1;
      char* start = out;
      for (;;) {
        if (r >= e) throw CsvError("unterminated quoted field", record_line_);
        if (*r == '"') {
          if (r + 1 < e && r[1] == '"') {
            *out++ = '"';
            r += 2;
          } else {
            ++r;
            break;
          }
        } else {
          *out++ = *r++;
        }
      }
      fields.push_back({std::string_view(start, static_cast<std::size_t>(out - start)), true});
      p = r;
      if (p == e) break;
      if (*p != ',') throw CsvError("unexpected character after closing quote", record_line_);
    } else {
      char* start = p;
      const void* comma = std::memchr(p, ',', static_cast<std::size_t>(e - p));
      p = comma ? static_cast<char*>(const_cast<void*>(comma)) : e;
      fields.push_back({std::string_view(start, static_cast<std::size_t>(p - start)), false});
      if (p == e) break;
    }
    ++p;  // skip ','
    if (p == e) {
      fields.push_back({std::string_view(), false});
      break;
    }
  }
  return true;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      in_quotes = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else if (c != '\r' || i + 1 != line.size()) {
      cur += c;
    }
  }
  if (in_quotes) throw CsvError("unterminated quoted field", 1);
  out.push_back(std::move(cur));
  return out;
}

namespace {

bool parse_int(std::string_view s, std::int64_t& out) {
  if (!s.empty() && s[0] == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  // Up to 18 digits cannot overflow; longer input goes through from_chars.
  const bool neg = s[0] == '-';
  const std::string_view digits = neg ? s.substr(1) : s;
  if (!digits.empty() && digits.size() <= 18) {
    std::int64_t v = 0;
    for (char c : digits) {
      if (c < '0' || c > '9') return false;
      v = v * 10 + (c - '0');
    }
    out = neg ? -v : v;
    return true;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Plain decimal syntax: [sign] digits [. digits] [e [sign] digits]; no inf/nan/hex.
bool looks_decimal(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i, ++digits;
  }
  if (digits == 0) return false;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    std::size_t exp_digits = 0;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i, ++exp_digits;
    if (exp_digits == 0) return false;
  }
  return i == s.size();
}

bool parse_decimal(std::string_view s, double& out) {
  if (!looks_decimal(s)) return false;
  if (s[0] == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

CellClass classify_cell(const CsvField& field) {
  if (field.quoted) return CellClass::text;
  if (field.text.empty()) return CellClass::empty;
  std::int64_t i = 0;
  if (parse_int(field.text, i)) return CellClass::integer;
  // Without an exponent a short decimal is always finite, so the value
  // itself is not needed here.
  const auto& t = field.text;
  if (t.size() < 300 && t.find_first_of("eE") == std::string_view::npos) {
    return looks_decimal(t) ? CellClass::decimal : CellClass::text;
  }
  double d = 0;
  if (parse_decimal(t, d)) return CellClass::decimal;
  return CellClass::text;
}

Value parse_cell(const CsvField& field, DType dtype, std::size_t line) {
  if (field.text.empty() && (!field.quoted || dtype != DType::text)) return Value::null();
  switch (dtype) {
    case DType::int64: {
      std::int64_t v = 0;
      if (!parse_int(field.text, v)) throw CsvError("'" + std::string(field.text) + "' is not an int64", line);
      return Value(v);
    }
    case DType::float64: {
      double v = 0;
      if (!parse_decimal(field.text, v)) throw CsvError("'" + std::string(field.text) + "' is not a float64", line);
      return Value(v);
    }
    case DType::text:
      return Value(std::string(field.text));
  }
  return Value::null();
}

std::string quote_csv(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path) {
  file_ = std::fopen(path.c_str(), "wb");
  if (!file_) throw DataError("cannot create '" + path.string() + "': " + std::strerror(errno));
  buf_.reserve(1 << 20);
}

CsvWriter::~CsvWriter() {
  if (file_) {
    std::fwrite(buf_.data(), 1, buf_.size(), file_);
    std::fclose(file_);
  }
}

void CsvWriter::put_quoted(std::string_view s) {
  buf_ += '"';
  for (char c : s) {
    if (c == '"') buf_ += '"';
    buf_ += c;
  }
  buf_ += '"';
}

void CsvWriter::flush_if_needed() {
  if (buf_.size() >= (1u << 20)) {
    if (std::fwrite(buf_.data(), 1, buf_.size(), file_) != buf_.size()) {
      throw DataError("write to '" + path_.string() + "' failed");
    }
    buf_.clear();
  }
}

void CsvWriter::write_header(const std::vector<ColumnMeta>& columns) {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  write_fields(names);
}

void CsvWriter::write_fields(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) buf_ += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\r\n") != std::string::npos) {
      put_quoted(f);
    } else {
      buf_ += f;
    }
  }
  buf_ += '\n';
  flush_if_needed();
}

void CsvWriter::write_row(const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) buf_ += ',';
    const Value& v = row[i];
    if (v.is_text()) {
      put_quoted(v.as_text());
    } else if (v.is_int()) {
      char tmp[24];
      buf_.append(tmp, std::to_chars(tmp, tmp + sizeof tmp, v.as_int()).ptr);
    } else if (v.is_float()) {
      // Same text as format_double, without the temporary string.
      char tmp[40];
      const double d = v.as_float();
      char* end = std::to_chars(tmp, tmp + sizeof tmp, d).ptr;
      buf_.append(tmp, end);
      if (std::isfinite(d) && std::find_if(tmp, end, [](char c) { return c == '.' || c == 'e'; }) == end) buf_ += ".0";
    }
  }
  buf_ += '\n';
  flush_if_needed();
}

void CsvWriter::close() {
  if (!file_) return;
  const bool ok = std::fwrite(buf_.data(), 1, buf_.size(), file_) == buf_.size();
  buf_.clear();
  const bool closed = std::fclose(file_) == 0;
  file_ = nullptr;
  if (!ok || !closed) throw DataError("write to '" + path_.string() + "' failed");
}

CsvSchema infer_csv_schema(const std::filesystem::path& path, bool has_header) {
  CsvReader reader(path);
  std::vector<CsvField> fields;
  CsvSchema schema;
  std::vector<CellClass> classes;  // widest class seen per column
  bool have_arity = false;

  while (reader.next(fields)) {
    const bool blank = fields.size() == 1 && !fields[0].quoted && fields[0].text.empty();
    if (!have_arity) {
      if (blank) continue;
      have_arity = true;
      classes.assign(fields.size(), CellClass::empty);
      if (has_header) {
        for (const auto& f : fields) schema.columns.push_back({std::string(f.text), DType::text});
        continue;
      }
      for (std::size_t i = 0; i < fields.size(); ++i) schema.columns.push_back({default_column_name(i), DType::text});
    }
    if (blank && classes.size() > 1) continue;
    if (fields.size() != classes.size()) {
      throw CsvError("ragged row: expected " + std::to_string(classes.size()) + " fields, got " +
                         std::to_string(fields.size()),
                     reader.line());
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (classes[i] == CellClass::text) continue;
      const CellClass c = classify_cell(fields[i]);
      if (static_cast<int>(c) > static_cast<int>(classes[i])) classes[i] = c;
    }
    ++schema.data_rows;
  }
  if (!have_arity) throw CsvError("file is empty", 1);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    switch (classes[i]) {
      case CellClass::empty:
      case CellClass::integer:
        schema.columns[i].dtype = DType::int64;
        break;
      case CellClass::decimal:
        schema.columns[i].dtype = DType::float64;
        break;
      case CellClass::text:
        schema.columns[i].dtype = DType::text;
        break;
    }
  }
  schema.bytes = reader.bytes_consumed();
  return schema;
}

void for_each_csv_row(const std::filesystem::path& path, bool has_header, const std::vector<ColumnMeta>& columns,
                      const std::function<void(Row&&)>& sink) {
  CsvReader reader(path);
  std::vector<CsvField> fields;
  bool header_pending = has_header;
  bool started = false;
  while (reader.next(fields)) {
    const bool blank = fields.size() == 1 && !fields[0].quoted && fields[0].text.empty();
    if (!started && blank) continue;
    started = true;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    if (blank && columns.size() > 1) continue;
    if (fields.size() != columns.size()) {
      throw CsvError("ragged row: expected " + std::to_string(columns.size()) + " fields, got " +
                         std::to_string(fields.size()),
                     reader.line());
    }
    Row row;
    row.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row.push_back(parse_cell(fields[i], columns[i].dtype, reader.line()));
    sink(std::move(row));
  }
}

Table read_csv_table(const std::filesystem::path& path, const std::string& table_name, bool has_header) {
  Table t;
  CsvSchema schema = infer_csv_schema(path, has_header);
  t.meta.name = table_name;
  t.meta.columns = std::move(schema.columns);
  t.rows.reserve(static_cast<std::size_t>(schema.data_rows));
  for_each_csv_row(path, has_header, t.meta.columns, [&](Row&& r) { t.rows.push_back(std::move(r)); });
  t.meta.row_count = static_cast<std::int64_t>(t.rows.size());
  return t;
}

void write_csv_table(const std::filesystem::path& path, const Table& table, bool header) {
  CsvWriter w(path);
  if (header) w.write_header(table.meta.columns);
  for (const auto& r : table.rows) w.write_row(r);
  w.close();
}

}  // namespace tracebench
