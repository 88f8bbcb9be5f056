#include "tracebench/storage.hpp"

#include <algorithm>
#include <atomic>

#include "tracebench/backends.hpp"
#include "tracebench/csv.hpp"
#include "tracebench/csv_schema.hpp"

namespace tracebench {

std::string_view to_string(BackendKind k) { return k == BackendKind::relational ? "relational" : "partitioned"; }

BackendKind backend_from_string(std::string_view s) {
  if (s == "relational") return BackendKind::relational;
  if (s == "partitioned") return BackendKind::partitioned;
  throw StorageError("unknown backend kind '" + std::string(s) + "'");
}

std::vector<TableMeta> Storage::list_tables() const {
  std::shared_lock lock(mutex_);
  std::vector<TableMeta> out;
  out.reserve(catalog_.size());
  for (const auto& [name, meta] : catalog_) out.push_back(meta);
  return out;
}

std::optional<TableMeta> Storage::find_table(std::string_view name) const {
  std::shared_lock lock(mutex_);
  auto it = catalog_.find(name);
  if (it == catalog_.end()) return std::nullopt;
  return it->second;
}

TableMeta Storage::table(std::string_view name) const {
  std::shared_lock lock(mutex_);
  return table_locked(name);
}

TableMeta Storage::table_locked(std::string_view name) const {
  auto it = catalog_.find(name);
  if (it == catalog_.end()) throw NotFoundError("no table '" + std::string(name) + "' in storage '" + id_ + "'");
  return it->second;
}

std::vector<Row> Storage::read_partition(std::string_view name, std::size_t index) const {
  throw StorageError("storage '" + id_ + "' has no physical partitions");
}

Table Storage::read_table(std::string_view name) const {
  Table t;
  t.meta = table(name);
  if (t.meta.row_count) t.rows.reserve(static_cast<std::size_t>(*t.meta.row_count));
  scan(name, 8192, [&](std::span<const Row> batch) { t.rows.insert(t.rows.end(), batch.begin(), batch.end()); });
  return t;
}

std::string Storage::unique_table_name(const std::string& base) const {
  std::shared_lock lock(mutex_);
  if (!catalog_.contains(base)) return base;
  for (int i = 2;; ++i) {
    std::string candidate = base + "_" + std::to_string(i);
    if (!catalog_.contains(candidate)) return candidate;
  }
}

bool storage_exists(const fs::path& root) {
  return fs::exists(root / RelationalStorage::kFileName) || fs::exists(root / PartitionedStorage::kCatalogFile);
}

std::unique_ptr<Storage> create_storage(BackendKind kind, const fs::path& root) {
  if (storage_exists(root)) throw StorageError("a storage already exists at '" + root.string() + "'");
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) {
    throw StorageError("cannot create storage directory '" + root.string() + "': " + ec.message());
  }
  if (kind == BackendKind::relational) return RelationalStorage::create(root);
  return PartitionedStorage::create(root);
}

std::unique_ptr<Storage> open_storage(const fs::path& root) {
  if (fs::exists(root / RelationalStorage::kFileName)) return RelationalStorage::open(root);
  if (fs::exists(root / PartitionedStorage::kCatalogFile)) return PartitionedStorage::open(root);
  throw NotFoundError("no storage at '" + root.string() + "'");
}

TableMeta import_csv(Storage& storage, const fs::path& file, const std::string& table, bool has_header) {
  if (!fs::exists(file)) throw NotFoundError("no such file '" + file.string() + "'");
  if (storage.has_table(table)) throw NameCollisionError("table '" + table + "' already exists");
  CsvSchema schema = infer_csv_schema(file, has_header);
  auto writer = storage.create_table(table, schema.columns, TableOrigin::imported);
  for_each_csv_row(file, has_header, schema.columns, [&](Row&& row) { writer->append(row); });
  return writer->commit();
}

TableMeta transfer_table(const Storage& src, const std::string& table, Storage& dst) {
  if (&src == &dst) throw NameCollisionError("cannot transfer '" + table + "' onto its own storage");
  const TableMeta meta = src.table(table);
  if (dst.has_table(table)) throw NameCollisionError("table '" + table + "' already exists in '" + dst.id() + "'");

  // Spool through a file so the source read lock and the destination write
  // lock are never held at the same time.
  static std::atomic<unsigned> counter{0};
  const fs::path spool = dst.root() / (".spool-" + table + "-" + std::to_string(counter++) + ".csv");
  struct Cleanup {
    fs::path p;
    ~Cleanup() {
      std::error_code ec;
      fs::remove(p, ec);
    }
  } cleanup{spool};
  {
    CsvWriter w(spool);
    src.scan(table, 8192, [&](std::span<const Row> batch) {
      for (const auto& r : batch) w.write_row(r);
    });
    w.close();
  }
  auto writer = dst.create_table(table, meta.columns, TableOrigin::transferred);
  for_each_csv_row(spool, false, meta.columns, [&](Row&& row) { writer->append(row); });
  return writer->commit();
}

void export_csv(const Storage& storage, const std::string& table, const fs::path& file, bool header) {
  const TableMeta meta = storage.table(table);
  CsvWriter w(file);
  if (header) w.write_header(meta.columns);
  storage.scan(table, 8192, [&](std::span<const Row> batch) {
    for (const auto& r : batch) w.write_row(r);
  });
  w.close();
}

TableMeta write_table(Storage& storage, const std::string& name, const std::vector<ColumnMeta>& columns,
                      const std::vector<Row>& rows, TableOrigin origin) {
  auto writer = storage.create_table(name, columns, origin);
  for (const auto& r : rows) writer->append(r);
  return writer->commit();
}

}  // namespace tracebench
