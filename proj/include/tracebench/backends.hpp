// Concrete storage backends.
#pragma once

#include <cstddef>

#include <json.hpp>

#include "tracebench/storage.hpp"

struct sqlite3;

namespace tracebench {

// Embedded single-file relational backend. All tables and the catalog live in
// <root>/storage.sqlite.
class RelationalStorage final : public Storage {
 public:
  static constexpr const char* kFileName = "storage.sqlite";

  static std::unique_ptr<RelationalStorage> create(const fs::path& root);
  static std::unique_ptr<RelationalStorage> open(const fs::path& root);
  ~RelationalStorage() override;

  std::unique_ptr<TableWriter> create_table(const std::string& name, std::vector<ColumnMeta> columns,
                                            TableOrigin origin) override;
  void scan(std::string_view name, std::size_t batch_rows,
            const std::function<void(std::span<const Row>)>& fn) const override;
  void drop_table(std::string_view name) override;

  // Runs `INSERT INTO dest SELECT ...` with the given select statement and
  // registers dest with the given schema, atomically.
  TableMeta insert_select(const std::string& dest, const std::vector<ColumnMeta>& columns,
                          const std::string& select_sql);

 private:
  class Writer;
  RelationalStorage(std::string id, fs::path root, sqlite3* db);
  void load_catalog();
  void exec(const std::string& sql) const;
  void create_physical_table(const std::string& name, const std::vector<ColumnMeta>& columns);
  void put_catalog_entry(const TableMeta& meta);

  sqlite3* db_;
};

// Directory-per-table store of fixed-size row-range partition files plus a
// JSON catalog manifest at <root>/catalog.json.
class PartitionedStorage final : public Storage {
 public:
  static constexpr const char* kCatalogFile = "catalog.json";
  static constexpr std::size_t kDefaultPartitionRows = 65536;

  static std::unique_ptr<PartitionedStorage> create(const fs::path& root,
                                                    std::size_t partition_rows = kDefaultPartitionRows);
  static std::unique_ptr<PartitionedStorage> open(const fs::path& root);

  std::unique_ptr<TableWriter> create_table(const std::string& name, std::vector<ColumnMeta> columns,
                                            TableOrigin origin) override;
  void scan(std::string_view name, std::size_t batch_rows,
            const std::function<void(std::span<const Row>)>& fn) const override;
  void drop_table(std::string_view name) override;
  std::vector<PartitionInfo> partitions(std::string_view name) const override;
  std::vector<Row> read_partition(std::string_view name, std::size_t index) const override;

  std::size_t partition_rows() const { return partition_rows_; }

 private:
  class Writer;
  PartitionedStorage(std::string id, fs::path root, std::size_t partition_rows);
  void save_catalog() const;
  void load_catalog(const nlohmann::json& j);
  std::vector<Row> load_partition_file(const TableMeta& meta, const PartitionInfo& part) const;

  std::size_t partition_rows_;
  std::map<std::string, std::vector<PartitionInfo>, std::less<>> parts_;
};

}  // namespace tracebench
