// Storage abstraction. Concrete backends specialize Storage; callers only see
// this interface plus the free functions for ingestion and transfer.
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "tracebench/value.hpp"

namespace tracebench {

namespace fs = std::filesystem;

enum class BackendKind : std::uint8_t { relational, partitioned };

std::string_view to_string(BackendKind k);
BackendKind backend_from_string(std::string_view s);

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public StorageError {
 public:
  using StorageError::StorageError;
};

class NameCollisionError : public StorageError {
 public:
  using StorageError::StorageError;
};

// Exclusive writer for one new table. Destroying a writer without commit()
// discards everything it wrote.
class TableWriter {
 public:
  virtual ~TableWriter() = default;
  virtual void append(const Row& row) = 0;
  virtual TableMeta commit() = 0;
};

struct PartitionInfo {
  std::size_t index = 0;
  std::int64_t start = 0;  // first row, inclusive
  std::int64_t end = 0;    // one past last row
  fs::path file;
};

class Storage {
 public:
  virtual ~Storage() = default;
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  const std::string& id() const { return id_; }
  BackendKind kind() const { return kind_; }
  const fs::path& root() const { return root_; }

  // Catalog snapshot sorted by table name.
  std::vector<TableMeta> list_tables() const;
  std::optional<TableMeta> find_table(std::string_view name) const;
  TableMeta table(std::string_view name) const;
  bool has_table(std::string_view name) const { return find_table(name).has_value(); }

  // Holds the handle's write lock until the writer is committed or destroyed.
  virtual std::unique_ptr<TableWriter> create_table(const std::string& name, std::vector<ColumnMeta> columns,
                                                    TableOrigin origin) = 0;
  // Streams rows in insertion order, in batches of at most batch_rows.
  virtual void scan(std::string_view name, std::size_t batch_rows,
                    const std::function<void(std::span<const Row>)>& fn) const = 0;
  virtual void drop_table(std::string_view name) = 0;

  // Row-range partitions of a table. Backends without physical partitions
  // report none; callers then chunk a scan instead.
  virtual std::vector<PartitionInfo> partitions(std::string_view name) const { return {}; }
  virtual std::vector<Row> read_partition(std::string_view name, std::size_t index) const;

  Table read_table(std::string_view name) const;
  // Picks "<base>", "<base>_2", ... whichever is free.
  std::string unique_table_name(const std::string& base) const;

 protected:
  Storage(std::string id, BackendKind kind, fs::path root)
      : id_(std::move(id)), kind_(kind), root_(std::move(root)) {}

  TableMeta table_locked(std::string_view name) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, TableMeta, std::less<>> catalog_;

 private:
  std::string id_;
  BackendKind kind_;
  fs::path root_;
};

// Creates an empty storage at root (the directory is created if missing).
std::unique_ptr<Storage> create_storage(BackendKind kind, const fs::path& root);
// Opens the storage previously created at root; the backend kind is detected.
std::unique_ptr<Storage> open_storage(const fs::path& root);
bool storage_exists(const fs::path& root);

// Headerless files get columns V1..Vn; dtypes are inferred per column.
TableMeta import_csv(Storage& storage, const fs::path& file, const std::string& table, bool has_header);

// Copies a table row-for-row into dst under the same name.
TableMeta transfer_table(const Storage& src, const std::string& table, Storage& dst);

void export_csv(const Storage& storage, const std::string& table, const fs::path& file, bool header = true);

// Writes a materialized table as a new table.
TableMeta write_table(Storage& storage, const std::string& name, const std::vector<ColumnMeta>& columns,
                      const std::vector<Row>& rows, TableOrigin origin);

}  // namespace tracebench
