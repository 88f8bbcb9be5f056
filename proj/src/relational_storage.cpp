#include <sqlite3.h>

#include "tracebench/backends.hpp"
#include "tracebench/json_io.hpp"
#include "tracebench/sql_names.hpp"

namespace tracebench {

namespace {

struct Statement {
  sqlite3_stmt* stmt = nullptr;
  Statement(sqlite3* db, const std::string& sql) {
    if (sqlite3_prepare_v2(db, sql.c_str(), static_cast<int>(sql.size()), &stmt, nullptr) != SQLITE_OK) {
      throw StorageError(std::string("sqlite prepare failed: ") + sqlite3_errmsg(db) + " in: " + sql);
    }
  }
  ~Statement() { sqlite3_finalize(stmt); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;
};

const char* sql_type(DType t) {
  switch (t) {
    case DType::int64:
      return "INTEGER";
    case DType::float64:
      return "REAL";
    case DType::text:
      return "TEXT";
  }
  return "TEXT";
}

void bind_value(sqlite3_stmt* stmt, int index, const Value& v) {
  switch (v.raw().index()) {
    case 0:
      sqlite3_bind_null(stmt, index);
      break;
    case 1:
      sqlite3_bind_int64(stmt, index, v.as_int());
      break;
    case 2:
      sqlite3_bind_double(stmt, index, v.as_float());
      break;
    default:
      sqlite3_bind_text(stmt, index, v.as_text().data(), static_cast<int>(v.as_text().size()), SQLITE_TRANSIENT);
      break;
  }
}

Value read_column(sqlite3_stmt* stmt, int index, DType dtype) {
  if (sqlite3_column_type(stmt, index) == SQLITE_NULL) return Value::null();
  switch (dtype) {
    case DType::int64:
      return Value(static_cast<std::int64_t>(sqlite3_column_int64(stmt, index)));
    case DType::float64:
      return Value(sqlite3_column_double(stmt, index));
    case DType::text: {
      const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt, index));
      const int n = sqlite3_column_bytes(stmt, index);
      return Value(std::string(p, static_cast<std::size_t>(n)));
    }
  }
  return Value::null();
}

sqlite3* open_db(const fs::path& file, int flags) {
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(file.c_str(), &db, flags | SQLITE_OPEN_FULLMUTEX, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw StorageError("cannot open '" + file.string() + "': " + msg);
  }
  return db;
}

}  // namespace

class RelationalStorage::Writer final : public TableWriter {
 public:
  Writer(RelationalStorage& s, TableMeta meta) : s_(s), lock_(s.mutex_), meta_(std::move(meta)) {
    if (s_.catalog_.contains(meta_.name)) throw NameCollisionError("table '" + meta_.name + "' already exists");
    s_.exec("BEGIN IMMEDIATE");
    try {
      s_.create_physical_table(meta_.name, meta_.columns);
      std::string sql = "INSERT INTO " + quote_identifier(meta_.name) + " VALUES (";
      for (std::size_t i = 0; i < meta_.columns.size(); ++i) sql += i ? ",?" : "?";
      sql += ")";
      if (sqlite3_prepare_v2(s_.db_, sql.c_str(), -1, &insert_, nullptr) != SQLITE_OK) {
        throw StorageError(std::string("sqlite prepare failed: ") + sqlite3_errmsg(s_.db_));
      }
    } catch (...) {
      s_.exec("ROLLBACK");
      throw;
    }
  }

  ~Writer() override {
    sqlite3_finalize(insert_);
    if (!committed_) sqlite3_exec(s_.db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }

  void append(const Row& row) override {
    check_row(meta_.columns, row);
    for (std::size_t i = 0; i < row.size(); ++i) bind_value(insert_, static_cast<int>(i + 1), row[i]);
    if (sqlite3_step(insert_) != SQLITE_DONE) {
      throw StorageError(std::string("sqlite insert failed: ") + sqlite3_errmsg(s_.db_));
    }
    sqlite3_reset(insert_);
    ++rows_;
  }

  TableMeta commit() override {
    meta_.row_count = rows_;
    s_.put_catalog_entry(meta_);
    s_.exec("COMMIT");
    committed_ = true;
    s_.catalog_[meta_.name] = meta_;
    return meta_;
  }

 private:
  RelationalStorage& s_;
  std::unique_lock<std::shared_mutex> lock_;
  TableMeta meta_;
  sqlite3_stmt* insert_ = nullptr;
  std::int64_t rows_ = 0;
  bool committed_ = false;
};

RelationalStorage::RelationalStorage(std::string id, fs::path root, sqlite3* db)
    : Storage(std::move(id), BackendKind::relational, std::move(root)), db_(db) {}

RelationalStorage::~RelationalStorage() { sqlite3_close(db_); }

std::unique_ptr<RelationalStorage> RelationalStorage::create(const fs::path& root) {
  sqlite3* db = open_db(root / kFileName, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
  const std::string id = fs::absolute(root).lexically_normal().filename().string();
  std::unique_ptr<RelationalStorage> s(new RelationalStorage(id.empty() ? "storage" : id, root, db));
  s->exec("PRAGMA journal_mode=DELETE");
  s->exec(
      "CREATE TABLE _tb_catalog (name TEXT PRIMARY KEY, meta TEXT NOT NULL);"
      "CREATE TABLE _tb_storage (key TEXT PRIMARY KEY, value TEXT NOT NULL);");
  s->exec("INSERT INTO _tb_storage VALUES ('kind', 'relational'), ('id', " + quote_literal(s->id()) + ")");
  return s;
}

std::unique_ptr<RelationalStorage> RelationalStorage::open(const fs::path& root) {
  sqlite3* db = open_db(root / kFileName, SQLITE_OPEN_READWRITE);
  std::string id;
  {
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db, "SELECT value FROM _tb_storage WHERE key = 'id'", -1, &stmt, nullptr) != SQLITE_OK) {
      std::string msg = sqlite3_errmsg(db);
      sqlite3_close(db);
      throw StorageError("corrupt catalog in '" + root.string() + "': " + msg);
    }
    if (sqlite3_step(stmt) == SQLITE_ROW) id = reinterpret_cast<const char*>(sqlite3_column_text(stmt, 0));
    sqlite3_finalize(stmt);
  }
  std::unique_ptr<RelationalStorage> s(new RelationalStorage(id, root, db));
  s->load_catalog();
  return s;
}

void RelationalStorage::load_catalog() {
  try {
    Statement st(db_, "SELECT meta FROM _tb_catalog ORDER BY name");
    while (sqlite3_step(st.stmt) == SQLITE_ROW) {
      const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(st.stmt, 0));
      TableMeta meta = table_meta_from_json(nlohmann::json::parse(text));
      catalog_[meta.name] = std::move(meta);
    }
  } catch (const std::exception& e) {
    throw StorageError("corrupt catalog in '" + root().string() + "': " + e.what());
  }
}

void RelationalStorage::exec(const std::string& sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StorageError("sqlite: " + msg);
  }
}

void RelationalStorage::create_physical_table(const std::string& name, const std::vector<ColumnMeta>& columns) {
  std::string sql = "CREATE TABLE " + quote_identifier(name) + " (";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) sql += ", ";
    sql += quote_identifier(columns[i].name) + " " + sql_type(columns[i].dtype);
  }
  sql += ")";
  exec(sql);
}

void RelationalStorage::put_catalog_entry(const TableMeta& meta) {
  exec("INSERT INTO _tb_catalog VALUES (" + quote_literal(meta.name) + ", " + quote_literal(to_json(meta).dump()) +
       ")");
}

std::unique_ptr<TableWriter> RelationalStorage::create_table(const std::string& name, std::vector<ColumnMeta> columns,
                                                             TableOrigin origin) {
  TableMeta meta{name, std::move(columns), 0, origin};
  meta.check();
  return std::make_unique<Writer>(*this, std::move(meta));
}

void RelationalStorage::scan(std::string_view name, std::size_t batch_rows,
                             const std::function<void(std::span<const Row>)>& fn) const {
  std::shared_lock lock(mutex_);
  const TableMeta meta = table_locked(name);
  Statement st(db_, "SELECT * FROM " + quote_identifier(meta.name) + " ORDER BY rowid");
  std::vector<Row> batch;
  batch.reserve(batch_rows);
  const int ncol = static_cast<int>(meta.columns.size());
  int rc = 0;
  while ((rc = sqlite3_step(st.stmt)) == SQLITE_ROW) {
    Row row;
    row.reserve(meta.columns.size());
    for (int i = 0; i < ncol; ++i) row.push_back(read_column(st.stmt, i, meta.columns[i].dtype));
    batch.push_back(std::move(row));
    if (batch.size() >= batch_rows) {
      fn(batch);
      batch.clear();
    }
  }
  if (rc != SQLITE_DONE) throw StorageError(std::string("sqlite scan failed: ") + sqlite3_errmsg(db_));
  if (!batch.empty()) fn(batch);
}

void RelationalStorage::drop_table(std::string_view name) {
  std::unique_lock lock(mutex_);
  const TableMeta meta = table_locked(name);
  exec("BEGIN IMMEDIATE");
  try {
    exec("DROP TABLE " + quote_identifier(meta.name));
    exec("DELETE FROM _tb_catalog WHERE name = " + quote_literal(meta.name));
    exec("COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
  catalog_.erase(meta.name);
}

TableMeta RelationalStorage::insert_select(const std::string& dest, const std::vector<ColumnMeta>& columns,
                                           const std::string& select_sql) {
  TableMeta meta{dest, columns, 0, TableOrigin::query_result};
  meta.check();
  std::unique_lock lock(mutex_);
  if (catalog_.contains(dest)) throw NameCollisionError("table '" + dest + "' already exists");
  exec("BEGIN IMMEDIATE");
  try {
    create_physical_table(dest, columns);
    exec("INSERT INTO " + quote_identifier(dest) + " " + select_sql);
    meta.row_count = sqlite3_changes(db_);
    put_catalog_entry(meta);
    exec("COMMIT");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
  catalog_[dest] = meta;
  return meta;
}

}  // namespace tracebench
