#include <atomic>
#include <fstream>

#include "tracebench/backends.hpp"
#include "tracebench/csv.hpp"
#include "tracebench/json_io.hpp"

namespace tracebench {

namespace {

constexpr const char* kCatalogSchema = "tracebench.catalog/1";

std::string partition_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "part-%05zu.csv", index);
  return buf;
}

void write_file_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw StorageError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

}  // namespace

class PartitionedStorage::Writer final : public TableWriter {
 public:
  Writer(PartitionedStorage& s, TableMeta meta) : s_(s), lock_(s.mutex_), meta_(std::move(meta)) {
    if (s_.catalog_.contains(meta_.name)) throw NameCollisionError("table '" + meta_.name + "' already exists");
    static std::atomic<unsigned> counter{0};
    staging_ = s_.root() / "tables" / (".tmp-" + meta_.name + "-" + std::to_string(counter++));
    fs::create_directories(staging_);
  }

  ~Writer() override {
    if (!committed_) {
      part_.reset();
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  void append(const Row& row) override {
    check_row(meta_.columns, row);
    if (!part_ || rows_in_part_ == s_.partition_rows_) start_partition();
    part_->write_row(row);
    ++rows_in_part_;
    ++rows_;
  }

  TableMeta commit() override {
    finish_partition();
    const fs::path final_dir = s_.root() / "tables" / meta_.name;
    std::error_code ec;
    fs::remove_all(final_dir, ec);  // leftovers of a crashed writer are not in the catalog
    fs::rename(staging_, final_dir);
    for (auto& p : parts_) p.file = final_dir / p.file.filename();
    meta_.row_count = rows_;
    s_.catalog_[meta_.name] = meta_;
    s_.parts_[meta_.name] = parts_;
    try {
      s_.save_catalog();
    } catch (...) {
      s_.catalog_.erase(meta_.name);
      s_.parts_.erase(meta_.name);
      fs::remove_all(final_dir, ec);
      committed_ = true;
      throw;
    }
    committed_ = true;
    return meta_;
  }

 private:
  void start_partition() {
    finish_partition();
    PartitionInfo p;
    p.index = parts_.size();
    p.start = rows_;
    p.end = rows_;
    p.file = staging_ / partition_file_name(p.index);
    part_ = std::make_unique<CsvWriter>(p.file);
    parts_.push_back(p);
    rows_in_part_ = 0;
  }

  void finish_partition() {
    if (!part_) return;
    part_->close();
    part_.reset();
    parts_.back().end = rows_;
  }

  PartitionedStorage& s_;
  std::unique_lock<std::shared_mutex> lock_;
  TableMeta meta_;
  fs::path staging_;
  std::unique_ptr<CsvWriter> part_;
  std::vector<PartitionInfo> parts_;
  std::size_t rows_in_part_ = 0;
  std::int64_t rows_ = 0;
  bool committed_ = false;
};

PartitionedStorage::PartitionedStorage(std::string id, fs::path root, std::size_t partition_rows)
    : Storage(std::move(id), BackendKind::partitioned, std::move(root)), partition_rows_(partition_rows) {}

std::unique_ptr<PartitionedStorage> PartitionedStorage::create(const fs::path& root, std::size_t partition_rows) {
  if (partition_rows == 0) throw StorageError("partition size must be positive");
  const std::string id = fs::absolute(root).lexically_normal().filename().string();
  std::unique_ptr<PartitionedStorage> s(new PartitionedStorage(id.empty() ? "storage" : id, root, partition_rows));
  fs::create_directories(root / "tables");
  s->save_catalog();
  return s;
}

std::unique_ptr<PartitionedStorage> PartitionedStorage::open(const fs::path& root) {
  const fs::path file = root / kCatalogFile;
  nlohmann::json j;
  std::unique_ptr<PartitionedStorage> s;
  try {
    std::ifstream in(file);
    if (!in) throw StorageError("cannot read");
    j = nlohmann::json::parse(in);
    if (j.at("schema") != kCatalogSchema) throw StorageError("unsupported catalog schema");
    s.reset(new PartitionedStorage(j.at("id").get<std::string>(), root, j.at("partition_rows").get<std::size_t>()));
  } catch (const std::exception& e) {
    throw StorageError("corrupt catalog '" + file.string() + "': " + e.what());
  }
  s->load_catalog(j);
  return s;
}

void PartitionedStorage::save_catalog() const {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& [name, meta] : catalog_) {
    nlohmann::json t = to_json(meta);
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : parts_.at(name)) {
      parts.push_back({{"index", p.index}, {"start", p.start}, {"end", p.end}, {"file", p.file.filename().string()}});
    }
    t["partitions"] = parts;
    tables.push_back(t);
  }
  nlohmann::json j = {{"schema", kCatalogSchema},
                      {"id", id()},
                      {"kind", "partitioned"},
                      {"partition_rows", partition_rows_},
                      {"tables", tables}};
  write_file_atomically(root() / kCatalogFile, j.dump(2) + "\n");
}

void PartitionedStorage::load_catalog(const nlohmann::json& j) {
  const fs::path file = root() / kCatalogFile;
  try {
    for (const auto& t : j.at("tables")) {
      TableMeta meta = table_meta_from_json(t);
      meta.check();
      std::vector<PartitionInfo> parts;
      std::int64_t covered = 0;
      for (const auto& p : t.at("partitions")) {
        PartitionInfo info{p.at("index").get<std::size_t>(), p.at("start").get<std::int64_t>(),
                           p.at("end").get<std::int64_t>(),
                           root() / "tables" / meta.name / p.at("file").get<std::string>()};
        if (info.index != parts.size() || info.start != covered || info.end < info.start) {
          throw StorageError("partitions of '" + meta.name + "' do not tile the table");
        }
        covered = info.end;
        parts.push_back(std::move(info));
      }
      if (covered != meta.row_count.value_or(covered)) {
        throw StorageError("partitions of '" + meta.name + "' do not cover its rows");
      }
      parts_[meta.name] = std::move(parts);
      catalog_[meta.name] = std::move(meta);
    }
  } catch (const std::exception& e) {
    throw StorageError("corrupt catalog '" + file.string() + "': " + e.what());
  }
}

std::unique_ptr<TableWriter> PartitionedStorage::create_table(const std::string& name, std::vector<ColumnMeta> columns,
                                                              TableOrigin origin) {
  TableMeta meta{name, std::move(columns), 0, origin};
  meta.check();
  return std::make_unique<Writer>(*this, std::move(meta));
}

std::vector<PartitionInfo> PartitionedStorage::partitions(std::string_view name) const {
  std::shared_lock lock(mutex_);
  table_locked(name);
  return parts_.find(name)->second;
}

std::vector<Row> PartitionedStorage::load_partition_file(const TableMeta& meta, const PartitionInfo& part) const {
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(part.end - part.start));
  CsvReader reader(part.file);
  std::vector<CsvField> fields;
  while (reader.next(fields)) {
    if (fields.size() != meta.columns.size()) {
      throw StorageError("partition " + part.file.string() + " line " + std::to_string(reader.line()) +
                         " does not match the schema of '" + meta.name + "'");
    }
    Row row;
    row.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row.push_back(parse_cell(fields[i], meta.columns[i].dtype, reader.line()));
    rows.push_back(std::move(row));
  }
  if (static_cast<std::int64_t>(rows.size()) != part.end - part.start) {
    throw StorageError("partition " + part.file.string() + " has " + std::to_string(rows.size()) +
                       " rows, catalog says " + std::to_string(part.end - part.start));
  }
  return rows;
}

std::vector<Row> PartitionedStorage::read_partition(std::string_view name, std::size_t index) const {
  std::shared_lock lock(mutex_);
  const TableMeta meta = table_locked(name);
  const auto& parts = parts_.find(name)->second;
  if (index >= parts.size()) throw NotFoundError("table '" + meta.name + "' has no partition " + std::to_string(index));
  return load_partition_file(meta, parts[index]);
}

void PartitionedStorage::scan(std::string_view name, std::size_t batch_rows,
                              const std::function<void(std::span<const Row>)>& fn) const {
  std::shared_lock lock(mutex_);
  const TableMeta meta = table_locked(name);
  for (const auto& part : parts_.find(name)->second) {
    std::vector<Row> rows = load_partition_file(meta, part);
    for (std::size_t i = 0; i < rows.size(); i += batch_rows) {
      fn(std::span<const Row>(rows).subspan(i, std::min(batch_rows, rows.size() - i)));
    }
  }
}

void PartitionedStorage::drop_table(std::string_view name) {
  std::unique_lock lock(mutex_);
  const TableMeta meta = table_locked(name);
  auto parts = parts_[meta.name];
  catalog_.erase(meta.name);
  parts_.erase(meta.name);
  try {
    save_catalog();
  } catch (...) {
    catalog_[meta.name] = meta;
    parts_[meta.name] = parts;
    throw;
  }
  std::error_code ec;
  fs::remove_all(root() / "tables" / meta.name, ec);
}

}  // namespace tracebench
