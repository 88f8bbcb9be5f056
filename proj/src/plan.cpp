#include "tracebench/plan.hpp"

#include <thread>

#include "tracebench/backends.hpp"
#include "tracebench/sql_names.hpp"

namespace tracebench::query {

std::string_view to_string(StageKind k) {
  switch (k) {
    case StageKind::filter: return "filter";
    case StageKind::group_count: return "group-count";
    case StageKind::project: return "project";
    case StageKind::distinct: return "distinct";
  }
  return "?";
}

void walk(const CheckedQuery& q, PlanVisitor& v) {
  v.source(q);
  if (q.ast.predicate) v.filter(*q.ast.predicate);
  if (q.grouped()) v.group_count(q.ast.group_by, q.ast.projections);
  v.project(q.ast.projections);
  if (q.ast.distinct) v.distinct();
}

namespace {

class RelationalPlanner final : public PlanVisitor {
 public:
  explicit RelationalPlanner(ExecutionPlan& plan) : plan_(plan) {}

  void source(const CheckedQuery& q) override {
    q_ = &q;
    from_ = " FROM " + quote_identifier(q.source.name);
  }

  void filter(const Predicate& p) override {
    where_ = " WHERE " + to_sql(p);
    plan_.stages.push_back({StageKind::filter, to_sql(p)});
  }

  void group_count(const std::vector<ColumnRef>& keys, const std::vector<ProjItem>&) override {
    std::string detail;
    for (std::size_t i = 0; i < keys.size(); ++i) detail += (i ? ", " : "") + quote_identifier(keys[i].name);
    group_ = " GROUP BY " + detail;
    plan_.stages.push_back({StageKind::group_count, detail});
  }

  void project(const std::vector<ProjItem>& items) override {
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& item = items[i];
      if (i) select_ += ", ";
      switch (item.kind) {
        case ProjItem::Kind::count: select_ += "COUNT(" + quote_identifier(item.column.name) + ")"; break;
        case ProjItem::Kind::count_star: select_ += "COUNT(*)"; break;
        default: select_ += quote_identifier(item.column.name); break;
      }
      select_ += " AS " + quote_identifier(q_->output[i].name);
    }
    plan_.stages.push_back({StageKind::project, select_});
  }

  void distinct() override {
    distinct_ = true;
    plan_.stages.push_back({StageKind::distinct, ""});
  }

  void finish() {
    plan_.sql = std::string(distinct_ ? "SELECT DISTINCT " : "SELECT ") + select_ + from_ + where_ + group_;
  }

 private:
  ExecutionPlan& plan_;
  const CheckedQuery* q_ = nullptr;
  std::string select_, from_, where_, group_;
  bool distinct_ = false;
};

// Map emits (group key, record); reduce applies the predicate, projection and
// counts. Ungrouped queries key by row ordinal (plain) or by the projected
// tuple (DISTINCT), so reduce sees one row or one duplicate class at a time.
class MapReducePlanner final : public PlanVisitor {
 public:
  explicit MapReducePlanner(ExecutionPlan& plan) : plan_(plan) {}

  void source(const CheckedQuery& q) override { q_ = &q; }
  void filter(const Predicate& p) override { predicate_ = p; }
  void group_count(const std::vector<ColumnRef>& keys, const std::vector<ProjItem>&) override {
    for (const auto& k : keys) {
      keys_.push_back(k.index);
      plan_.group_key.push_back(k.name);
    }
  }
  void project(const std::vector<ProjItem>& items) override { items_ = items; }
  void distinct() override { distinct_ = true; }

  void finish() {
    const auto pred = predicate_;
    const auto items = items_;
    const auto keys = keys_;
    auto passes = [pred](const Row& r) { return !pred || eval_predicate(*pred, r).value_or(false); };

    MapReduceJob job;
    job.output_columns = q_->output;
    if (!keys.empty()) {
      job.description = "map: key = (" + join(plan_.group_key) + "); reduce: filter, drop empty groups, count";
      job.map = [keys](const Row& r, std::int64_t, const Emit& emit) {
        Row key;
        key.reserve(keys.size());
        for (auto k : keys) key.push_back(r[k]);
        emit(std::move(key), r);
      };
      job.reduce = [passes, items, keys](const Row& key, std::span<const Row> values, const EmitRow& emit) {
        std::vector<const Row*> kept;
        for (const auto& r : values) {
          if (passes(r)) kept.push_back(&r);
        }
        if (kept.empty()) return;
        Row out;
        out.reserve(items.size());
        for (const auto& item : items) {
          if (item.kind == ProjItem::Kind::column) {
            out.push_back((*kept.front())[item.column.index]);
          } else if (item.kind == ProjItem::Kind::count_star) {
            out.emplace_back(static_cast<std::int64_t>(kept.size()));
          } else {
            std::int64_t n = 0;
            for (const Row* r : kept) n += (*r)[item.column.index].is_null() ? 0 : 1;
            out.emplace_back(n);
          }
        }
        emit(std::move(out));
      };
      plan_.jobs.push_back(std::move(job));
      if (distinct_) plan_.jobs.push_back(dedup_job(q_->output));
      return;
    }
    auto project = [items](const Row& r) {
      Row out;
      out.reserve(items.size());
      for (const auto& item : items) out.push_back(r[item.column.index]);
      return out;
    };
    if (distinct_) {
      job.description = "map: filter, key = projected tuple; reduce: one row per key";
      job.map = [passes, project](const Row& r, std::int64_t, const Emit& emit) {
        if (passes(r)) emit(project(r), Row{});
      };
      job.reduce = [](const Row& key, std::span<const Row>, const EmitRow& emit) { emit(key); };
    } else {
      job.description = "map: key = row ordinal; reduce: filter, project";
      job.map = [](const Row& r, std::int64_t ordinal, const Emit& emit) { emit(Row{Value(ordinal)}, r); };
      job.reduce = [passes, project](const Row&, std::span<const Row> values, const EmitRow& emit) {
        for (const auto& r : values) {
          if (passes(r)) emit(project(r));
        }
      };
    }
    plan_.jobs.push_back(std::move(job));
  }

 private:
  static std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
    return out;
  }

  static MapReduceJob dedup_job(const std::vector<ColumnMeta>& columns) {
    MapReduceJob job;
    job.description = "map: key = whole row; reduce: one row per key";
    job.output_columns = columns;
    job.map = [](const Row& r, std::int64_t, const Emit& emit) { emit(r, Row{}); };
    job.reduce = [](const Row& key, std::span<const Row>, const EmitRow& emit) { emit(key); };
    return job;
  }

  ExecutionPlan& plan_;
  const CheckedQuery* q_ = nullptr;
  std::optional<Predicate> predicate_;
  std::vector<std::size_t> keys_;
  std::vector<ProjItem> items_;
  bool distinct_ = false;
};

}  // namespace

std::string ExecutionPlan::describe() const {
  std::string out = std::string(tracebench::to_string(backend)) + " plan\n";
  if (backend == BackendKind::relational) {
    for (const auto& s : stages) {
      out += "  " + std::string(to_string(s.kind));
      if (!s.detail.empty()) out += ": " + s.detail;
      out += '\n';
    }
    out += "  sql: " + sql + '\n';
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) out += "  job " + std::to_string(i + 1) + ": " + jobs[i].description + '\n';
  }
  return out;
}

ExecutionPlan plan_query(const CheckedQuery& q, BackendKind backend) {
  ExecutionPlan plan;
  plan.backend = backend;
  plan.output = q.output;
  if (backend == BackendKind::relational) {
    RelationalPlanner v(plan);
    walk(q, v);
    v.finish();
  } else {
    MapReducePlanner v(plan);
    walk(q, v);
    v.finish();
  }
  return plan;
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::vector<Row> run_jobs(const ExecutionPlan& plan, const PartitionSource& input, unsigned workers) {
  if (plan.backend != BackendKind::partitioned) throw StorageError("not a map-reduce plan");
  std::vector<Row> rows;
  const PartitionSource* src = &input;
  std::unique_ptr<PartitionSource> stage;
  for (const auto& job : plan.jobs) {
    MapReduceResult r = run_mapreduce(job, *src, workers);
    rows = std::move(r.rows);
    if (&job != &plan.jobs.back()) {
      stage = memory_source(r.columns, rows);
      src = stage.get();
    }
  }
  return rows;
}

TableMeta execute_plan(Storage& storage, const CheckedQuery& q, const ExecutionPlan& plan, const std::string& dest,
                       ExecOptions opts) {
  if (!is_valid_table_name(dest)) throw DataError("invalid table name '" + dest + "'");
  if (storage.has_table(dest)) throw NameCollisionError("table '" + dest + "' already exists");
  if (plan.backend == BackendKind::relational) {
    auto* rel = dynamic_cast<RelationalStorage*>(&storage);
    if (!rel) throw StorageError("a relational plan cannot run on " + std::string(tracebench::to_string(storage.kind())) + " storage");
    return rel->insert_select(dest, plan.output, plan.sql);
  }
  const unsigned workers = opts.workers ? opts.workers : default_workers();
  std::vector<Row> rows;
  {
    auto src = table_source(storage, q.source.name);
    rows = run_jobs(plan, *src, workers);
  }
  return write_table(storage, dest, plan.output, rows, TableOrigin::query_result);
}

TableMeta execute_query(Storage& storage, const QueryAst& ast, const std::string& dest, ExecOptions opts) {
  const TableMeta schema = storage.table(ast.source);
  const CheckedQuery q = validate(ast, schema);
  const ExecutionPlan plan = plan_query(q, storage.kind());
  return execute_plan(storage, q, plan, dest, opts);
}

}  // namespace tracebench::query
