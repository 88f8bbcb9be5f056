// Local map-reduce runtime over table partitions.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracebench/expr.hpp"
#include "tracebench/storage.hpp"

namespace tracebench {

class MapReduceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Emit = std::function<void(Row key, Row value)>;
using EmitRow = std::function<void(Row out)>;

// ordinal is the record's 0-based position in the input table.
using MapFn = std::function<void(const Row& record, std::int64_t ordinal, const Emit& emit)>;
using ReduceFn = std::function<void(const Row& key, std::span<const Row> values, const EmitRow& emit)>;

struct MapReduceJob {
  std::string description;
  MapFn map;
  ReduceFn reduce;
  // Output schema. Empty means inferred from the emitted rows (V1..Vn).
  std::vector<ColumnMeta> output_columns;
};

// Read access to the input of a job, one partition at a time.
class PartitionSource {
 public:
  virtual ~PartitionSource() = default;
  virtual const std::vector<ColumnMeta>& columns() const = 0;
  virtual std::size_t partition_count() const = 0;
  // First row ordinal of partition i.
  virtual std::int64_t partition_start(std::size_t i) const = 0;
  virtual std::vector<Row> read(std::size_t i) const = 0;
};

// Physical partitions if the backend has them, otherwise chunks of a scan.
std::unique_ptr<PartitionSource> table_source(const Storage& storage, const std::string& table,
                                              std::size_t chunk_rows = 65536);
std::unique_ptr<PartitionSource> memory_source(std::vector<ColumnMeta> columns, std::vector<Row> rows,
                                               std::size_t chunk_rows = 65536);

struct MapReduceStats {
  std::size_t partitions = 0;
  std::size_t emitted = 0;     // pairs produced by map
  std::size_t delivered = 0;   // values handed to reduce
  std::size_t keys = 0;
};

struct MapReduceResult {
  std::vector<ColumnMeta> columns;
  std::vector<Row> rows;
  MapReduceStats stats;
};

// Runs map over every partition (in parallel when workers > 1), shuffles by
// key and reduces keys in ascending key order. The result does not depend on
// the worker count or on partition boundaries.
MapReduceResult run_mapreduce(const MapReduceJob& job, const PartitionSource& input, unsigned workers);

// Runs a job on a stored table and stores its output as a new table.
TableMeta run_mapreduce(const MapReduceJob& job, Storage& storage, const std::string& input,
                        const std::string& output, unsigned workers);

// Shuffle key order: element-wise by value with null first. Two non-null
// values of different dtypes at the same position are an error.
struct KeyLess {
  bool operator()(const Row& a, const Row& b) const;
};

// ---------------------------------------------------------------------------
// User-defined functions

enum class UdfStage : std::uint8_t { map, reduce };

std::string_view to_string(UdfStage s);
UdfStage udf_stage_from_string(std::string_view s);

struct UdfSpec {
  std::string name;
  UdfStage stage = UdfStage::map;
  std::vector<std::string> param_descriptions;
  std::string source;  // may contain $PAR<k>$ placeholders
  bool builtin = false;

  friend bool operator==(const UdfSpec&, const UdfSpec&) = default;
};

// UDF files use the command file layout with the stage (map or reduce) on
// the line after the name.
std::vector<UdfSpec> parse_udf_file(std::string_view text, const std::string& origin = "<input>");
std::vector<UdfSpec> load_udf_file(const fs::path& path);
std::string serialize_udfs(const std::vector<UdfSpec>& specs);

// Compiles a UDF with its parameters bound. Map programs see the record as t
// and its ordinal as row; emit(k1, ...) emits a key with the record as value,
// and without emit the value of the last expression is the key. Reduce
// programs see the key as key (first component) and key.1, key.2, ...; the
// group's records are available to count()/sum(e)/mean(e)/min(e)/max(e);
// emit(v1, ...) emits an output row, and without emit the output is the key
// followed by the value of the last expression.
MapFn compile_map(const UdfSpec& spec, const std::vector<std::string>& args, std::vector<ColumnMeta> input_columns);
ReduceFn compile_reduce(const UdfSpec& spec, const std::vector<std::string>& args,
                        std::vector<ColumnMeta> input_columns);

// Built-ins: map group_by_column(k) keys each record by its field k;
// reduce count emits (key..., number of records).
MapFn builtin_group_by_column(std::size_t one_based_column);
ReduceFn builtin_count();

class UdfRegistry {
 public:
  // Starts with the built-ins registered.
  UdfRegistry();

  // Throws if the name is taken for that stage or the source does not parse.
  void register_udf(UdfSpec spec);
  const UdfSpec* find(UdfStage stage, std::string_view name) const;
  std::vector<UdfSpec> list() const;
  void load_file(const fs::path& path);

  MapFn make_map(std::string_view name, const std::vector<std::string>& args,
                 const std::vector<ColumnMeta>& input_columns) const;
  ReduceFn make_reduce(std::string_view name, const std::vector<std::string>& args,
                       const std::vector<ColumnMeta>& input_columns) const;

 private:
  std::map<std::pair<UdfStage, std::string>, UdfSpec, std::less<>> specs_;
};

}  // namespace tracebench
