#include "tracebench/mapreduce.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "tracebench/command_format.hpp"

namespace tracebench {

namespace {

class StoragePartitions final : public PartitionSource {
 public:
  StoragePartitions(const Storage& s, std::string table) : s_(s), table_(std::move(table)) {
    columns_ = s_.table(table_).columns;
    parts_ = s_.partitions(table_);
  }
  const std::vector<ColumnMeta>& columns() const override { return columns_; }
  std::size_t partition_count() const override { return parts_.size(); }
  std::int64_t partition_start(std::size_t i) const override { return parts_.at(i).start; }
  std::vector<Row> read(std::size_t i) const override { return s_.read_partition(table_, i); }

 private:
  const Storage& s_;
  std::string table_;
  std::vector<ColumnMeta> columns_;
  std::vector<PartitionInfo> parts_;
};

class MemoryPartitions final : public PartitionSource {
 public:
  MemoryPartitions(std::vector<ColumnMeta> columns, std::vector<Row> rows, std::size_t chunk)
      : columns_(std::move(columns)), rows_(std::move(rows)), chunk_(std::max<std::size_t>(chunk, 1)) {}
  const std::vector<ColumnMeta>& columns() const override { return columns_; }
  std::size_t partition_count() const override { return (rows_.size() + chunk_ - 1) / chunk_; }
  std::int64_t partition_start(std::size_t i) const override { return static_cast<std::int64_t>(i * chunk_); }
  std::vector<Row> read(std::size_t i) const override {
    const std::size_t b = i * chunk_, e = std::min(rows_.size(), b + chunk_);
    return {rows_.begin() + static_cast<std::ptrdiff_t>(b), rows_.begin() + static_cast<std::ptrdiff_t>(e)};
  }

 private:
  std::vector<ColumnMeta> columns_;
  std::vector<Row> rows_;
  std::size_t chunk_;
};

std::string describe_key(const Row& key) {
  std::string out = "(";
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) out += ", ";
    out += key[i].is_null() ? "null" : key[i].is_text() ? "'" + key[i].as_text() + "'" : format_value(key[i]);
  }
  return out + ")";
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
// stops further scheduling and is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn fn) {
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(workers, 1u), n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next++;
        if (i >= n || failed) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct Pair {
  Row key;
  Row value;
};

std::vector<ColumnMeta> infer_columns(const std::vector<Row>& rows) {
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.size());
  std::vector<ColumnMeta> cols(width);
  for (std::size_t c = 0; c < width; ++c) {
    cols[c].name = default_column_name(c);
    std::optional<DType> t;
    for (const auto& r : rows) {
      if (c >= r.size() || r[c].is_null()) continue;
      const DType d = r[c].dtype();
      if (!t) {
        t = d;
      } else if (*t != d) {
        if (*t != DType::text && d != DType::text) {
          t = DType::float64;
        } else {
          throw MapReduceError("output column " + std::to_string(c + 1) + " mixes text and numbers");
        }
      }
    }
    cols[c].dtype = t.value_or(DType::int64);
  }
  return cols;
}

}  // namespace

bool KeyLess::operator()(const Row& a, const Row& b) const {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Value& x = a[i];
    const Value& y = b[i];
    if (x.is_null() || y.is_null()) {
      if (x.is_null() != y.is_null()) return x.is_null();
      continue;
    }
    if (x.dtype() != y.dtype()) {
      throw MapReduceError("shuffle key component " + std::to_string(i + 1) + " mixes " +
                           std::string(to_string(x.dtype())) + " and " + std::string(to_string(y.dtype())));
    }
    const auto ord = total_order(x, y);
    if (ord != 0) return ord < 0;
  }
  return a.size() < b.size();
}

std::unique_ptr<PartitionSource> table_source(const Storage& storage, const std::string& table, std::size_t chunk_rows) {
  if (!storage.partitions(table).empty() || storage.kind() == BackendKind::partitioned) {
    return std::make_unique<StoragePartitions>(storage, table);
  }
  Table t = storage.read_table(table);
  return std::make_unique<MemoryPartitions>(std::move(t.meta.columns), std::move(t.rows), chunk_rows);
}

std::unique_ptr<PartitionSource> memory_source(std::vector<ColumnMeta> columns, std::vector<Row> rows,
                                               std::size_t chunk_rows) {
  return std::make_unique<MemoryPartitions>(std::move(columns), std::move(rows), chunk_rows);
}

MapReduceResult run_mapreduce(const MapReduceJob& job, const PartitionSource& input, unsigned workers) {
  if (!job.map || !job.reduce) throw MapReduceError("job '" + job.description + "' lacks a map or reduce function");
  MapReduceResult result;
  const std::size_t n = input.partition_count();
  result.stats.partitions = n;

  // Map: each partition's output is kept separately and merged in partition
  // order, which makes the value order within a key deterministic.
  std::vector<std::vector<Pair>> mapped(n);
  parallel_for(n, workers, [&](std::size_t p) {
    const std::vector<Row> rows = input.read(p);
    const std::int64_t base = input.partition_start(p);
    auto& out = mapped[p];
    std::size_t r = 0;
    const Emit emit = [&](Row key, Row value) { out.push_back({std::move(key), std::move(value)}); };
    try {
      for (; r < rows.size(); ++r) job.map(rows[r], base + static_cast<std::int64_t>(r), emit);
    } catch (const std::exception& e) {
      throw MapReduceError("map failed in partition " + std::to_string(p) + " at row " +
                           std::to_string(base + static_cast<std::int64_t>(r)) + ": " + e.what());
    }
  });

  // Shuffle.
  std::map<Row, std::vector<Row>, KeyLess> groups;
  for (auto& part : mapped) {
    result.stats.emitted += part.size();
    for (auto& kv : part) {
      try {
        groups[std::move(kv.key)].push_back(std::move(kv.value));
      } catch (const MapReduceError& e) {
        throw MapReduceError(std::string("shuffle failed: ") + e.what());
      }
    }
    part = {};
  }
  result.stats.keys = groups.size();

  // Reduce: keys are split into contiguous ranges so concatenating the range
  // outputs preserves key order.
  std::vector<std::map<Row, std::vector<Row>, KeyLess>::const_iterator> keys;
  keys.reserve(groups.size());
  for (auto it = groups.cbegin(); it != groups.cend(); ++it) {
    keys.push_back(it);
    result.stats.delivered += it->second.size();
  }
  const std::size_t chunks = std::min<std::size_t>(keys.size(), std::max(workers, 1u) * 4);
  std::vector<std::vector<Row>> reduced(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t b = keys.size() * c / chunks, e = keys.size() * (c + 1) / chunks;
    auto& out = reduced[c];
    const EmitRow emit = [&](Row row) { out.push_back(std::move(row)); };
    for (std::size_t k = b; k < e; ++k) {
      try {
        job.reduce(keys[k]->first, keys[k]->second, emit);
      } catch (const std::exception& ex) {
        throw MapReduceError("reduce failed for key " + describe_key(keys[k]->first) + ": " + ex.what());
      }
    }
  });
  for (auto& r : reduced) {
    std::move(r.begin(), r.end(), std::back_inserter(result.rows));
  }

  result.columns = job.output_columns.empty() ? infer_columns(result.rows) : job.output_columns;
  for (auto& row : result.rows) {
    if (row.size() != result.columns.size()) {
      throw MapReduceError("reduce emitted a row with " + std::to_string(row.size()) + " values, expected " +
                           std::to_string(result.columns.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      // Widen ints in float columns; anything else must already match.
      if (row[c].is_int() && result.columns[c].dtype == DType::float64) row[c] = Value(static_cast<double>(row[c].as_int()));
    }
    check_row(result.columns, row);
  }
  return result;
}

TableMeta run_mapreduce(const MapReduceJob& job, Storage& storage, const std::string& input, const std::string& output,
                        unsigned workers) {
  if (storage.has_table(output)) throw NameCollisionError("table '" + output + "' already exists");
  MapReduceResult r;
  {
    auto src = table_source(storage, input);
    r = run_mapreduce(job, *src, workers);
  }
  if (r.columns.empty()) r.columns = {{default_column_name(0), DType::int64}};
  return write_table(storage, output, r.columns, r.rows, TableOrigin::query_result);
}

// ---------------------------------------------------------------------------

std::string_view to_string(UdfStage s) { return s == UdfStage::map ? "map" : "reduce"; }

UdfStage udf_stage_from_string(std::string_view s) {
  if (s == "map") return UdfStage::map;
  if (s == "reduce") return UdfStage::reduce;
  throw std::invalid_argument("unknown UDF stage '" + std::string(s) + "' (expected map or reduce)");
}

std::vector<UdfSpec> parse_udf_file(std::string_view text, const std::string& origin) {
  std::vector<UdfSpec> out;
  for (auto& b : parse_command_blocks(text, origin, true)) {
    UdfSpec spec;
    spec.name = b.name;
    try {
      spec.stage = udf_stage_from_string(*b.stage);
    } catch (const std::invalid_argument& e) {
      throw CommandFormatError(origin, b.line + 1, e.what());
    }
    spec.param_descriptions = std::move(b.param_descriptions);
    spec.source = std::move(b.code);
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<UdfSpec> load_udf_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read UDF file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_udf_file(ss.str(), path.string());
}

std::string serialize_udfs(const std::vector<UdfSpec>& specs) {
  std::vector<CommandBlock> blocks;
  for (const auto& s : specs) {
    if (s.builtin) continue;
    blocks.push_back({s.name, std::string(to_string(s.stage)), s.param_descriptions, s.source, 0});
  }
  return serialize_command_blocks(blocks);
}

namespace {

std::shared_ptr<const expr::Program> compile_source(const UdfSpec& spec, const std::vector<std::string>& args) {
  if (args.size() != spec.param_descriptions.size()) {
    throw std::invalid_argument(std::string(to_string(spec.stage)) + " function '" + spec.name + "' takes " +
                                std::to_string(spec.param_descriptions.size()) + " arguments, got " +
                                std::to_string(args.size()));
  }
  const std::string text = substitute_params(spec.source, args);
  try {
    return std::make_shared<const expr::Program>(expr::Program::parse(text));
  } catch (const expr::ExprError& e) {
    throw expr::ExprError("in " + std::string(to_string(spec.stage)) + " function '" + spec.name + "': " + e.message(),
                          e.line(), e.column());
  }
}

}  // namespace

MapFn compile_map(const UdfSpec& spec, const std::vector<std::string>& args, std::vector<ColumnMeta> input_columns) {
  auto program = compile_source(spec, args);
  auto columns = std::make_shared<const std::vector<ColumnMeta>>(std::move(input_columns));
  const bool emits = program->uses_emit();
  return [program, columns, emits](const Row& record, std::int64_t ordinal, const Emit& emit) {
    expr::Context ctx;
    ctx.record = &record;
    ctx.columns = columns.get();
    ctx.set("row", Value(ordinal));
    if (emits) {
      ctx.emit = [&](std::span<const Value> key) { emit(Row(key.begin(), key.end()), record); };
      program->run(ctx);
    } else {
      emit(Row{program->run(ctx)}, record);
    }
  };
}

ReduceFn compile_reduce(const UdfSpec& spec, const std::vector<std::string>& args,
                        std::vector<ColumnMeta> input_columns) {
  auto program = compile_source(spec, args);
  auto columns = std::make_shared<const std::vector<ColumnMeta>>(std::move(input_columns));
  const bool emits = program->uses_emit();
  return [program, columns, emits](const Row& key, std::span<const Row> values, const EmitRow& emit) {
    expr::Context ctx;
    ctx.columns = columns.get();
    ctx.group = values;
    ctx.in_group = true;
    if (!values.empty()) ctx.record = &values.front();
    ctx.set("key", key.empty() ? Value::null() : key.front());
    for (std::size_t i = 0; i < key.size(); ++i) ctx.set("key." + std::to_string(i + 1), key[i]);
    if (emits) {
      ctx.emit = [&](std::span<const Value> out) { emit(Row(out.begin(), out.end())); };
      program->run(ctx);
    } else {
      Row out = key;
      out.push_back(program->run(ctx));
      emit(std::move(out));
    }
  };
}

MapFn builtin_group_by_column(std::size_t one_based_column) {
  if (one_based_column == 0) throw std::invalid_argument("column numbers start at 1");
  const std::size_t c = one_based_column - 1;
  return [c](const Row& record, std::int64_t, const Emit& emit) {
    if (c >= record.size()) {
      throw std::out_of_range("column " + std::to_string(c + 1) + " out of range 1.." +
                              std::to_string(record.size()));
    }
    emit(Row{record[c]}, record);
  };
}

ReduceFn builtin_count() {
  return [](const Row& key, std::span<const Row> values, const EmitRow& emit) {
    Row out = key;
    out.emplace_back(static_cast<std::int64_t>(values.size()));
    emit(std::move(out));
  };
}

UdfRegistry::UdfRegistry() {
  register_udf({"group_by_column", UdfStage::map, {"column number"}, "emit(t[[$PAR1$]])", true});
  register_udf({"count", UdfStage::reduce, {}, "count()", true});
}

void UdfRegistry::register_udf(UdfSpec spec) {
  if (!is_command_name(spec.name)) throw std::invalid_argument("invalid function name '" + spec.name + "'");
  auto key = std::make_pair(spec.stage, spec.name);
  if (specs_.contains(key)) {
    throw std::invalid_argument(std::string(to_string(spec.stage)) + " function '" + spec.name + "' is already registered");
  }
  for (std::size_t k : placeholder_indices(spec.source)) {
    if (k < 1 || k > spec.param_descriptions.size()) {
      throw std::invalid_argument("placeholder $PAR" + std::to_string(k) + "$ in '" + spec.name + "' is out of range");
    }
  }
  // Parse with placeholders bound to a neutral literal to report syntax errors
  // at registration time.
  compile_source(spec, std::vector<std::string>(spec.param_descriptions.size(), "1"));
  specs_.emplace(std::move(key), std::move(spec));
}

const UdfSpec* UdfRegistry::find(UdfStage stage, std::string_view name) const {
  auto it = specs_.find(std::make_pair(stage, std::string(name)));
  return it == specs_.end() ? nullptr : &it->second;
}

std::vector<UdfSpec> UdfRegistry::list() const {
  std::vector<UdfSpec> out;
  for (const auto& [k, v] : specs_) out.push_back(v);
  return out;
}

void UdfRegistry::load_file(const fs::path& path) {
  for (auto& spec : load_udf_file(path)) register_udf(std::move(spec));
}

namespace {

std::size_t parse_column_arg(const std::string& text) {
  std::size_t k = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
  if (ec != std::errc() || p != text.data() + text.size() || k == 0) {
    throw std::invalid_argument("expected a column number, got '" + text + "'");
  }
  return k;
}

}  // namespace

MapFn UdfRegistry::make_map(std::string_view name, const std::vector<std::string>& args,
                            const std::vector<ColumnMeta>& input_columns) const {
  const UdfSpec* spec = find(UdfStage::map, name);
  if (!spec) throw std::invalid_argument("unknown map function '" + std::string(name) + "'");
  if (spec->builtin && spec->name == "group_by_column" && args.size() == 1) {
    const std::size_t k = parse_column_arg(args[0]);
    if (k > input_columns.size()) {
      throw std::out_of_range("column " + args[0] + " out of range 1.." + std::to_string(input_columns.size()));
    }
    return builtin_group_by_column(k);
  }
  return compile_map(*spec, args, input_columns);
}

ReduceFn UdfRegistry::make_reduce(std::string_view name, const std::vector<std::string>& args,
                                  const std::vector<ColumnMeta>& input_columns) const {
  const UdfSpec* spec = find(UdfStage::reduce, name);
  if (!spec) throw std::invalid_argument("unknown reduce function '" + std::string(name) + "'");
  if (spec->builtin && spec->name == "count" && args.empty()) return builtin_count();
  return compile_reduce(*spec, args, input_columns);
}

}  // namespace tracebench
