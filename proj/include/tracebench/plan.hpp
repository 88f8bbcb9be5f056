// Backend-specific translation of checked queries.
#pragma once

#include <string>
#include <vector>

#include "tracebench/mapreduce.hpp"
#include "tracebench/query.hpp"
#include "tracebench/storage.hpp"

namespace tracebench::query {

// Walks a checked query stage by stage in the canonical order
// filter -> group-count -> project -> distinct. Stages that do not apply are
// skipped.
class PlanVisitor {
 public:
  virtual ~PlanVisitor() = default;
  virtual void source(const CheckedQuery& q) = 0;
  virtual void filter(const Predicate& p) = 0;
  virtual void group_count(const std::vector<ColumnRef>& keys, const std::vector<ProjItem>& items) = 0;
  virtual void project(const std::vector<ProjItem>& items) = 0;
  virtual void distinct() = 0;
};

void walk(const CheckedQuery& q, PlanVisitor& v);

enum class StageKind : std::uint8_t { filter, group_count, project, distinct };
std::string_view to_string(StageKind k);

struct RelationalStage {
  StageKind kind;
  std::string detail;
};

struct ExecutionPlan {
  BackendKind backend = BackendKind::relational;
  std::vector<ColumnMeta> output;

  // relational
  std::vector<RelationalStage> stages;
  std::string sql;  // the whole plan as one SELECT

  // partitioned: jobs run in order, each consuming the previous output
  std::vector<MapReduceJob> jobs;
  std::vector<std::string> group_key;  // key columns of the first job, if grouped

  std::string describe() const;
};

ExecutionPlan plan_query(const CheckedQuery& q, BackendKind backend);

struct ExecOptions {
  unsigned workers = 0;  // 0 = hardware concurrency
};

// Validates ast against the source table of storage, plans it for the
// storage's backend and stores the result as dest.
TableMeta execute_query(Storage& storage, const QueryAst& ast, const std::string& dest, ExecOptions opts = {});

// Executes an existing plan. A partitioned plan runs on either backend; a
// relational plan requires relational storage.
TableMeta execute_plan(Storage& storage, const CheckedQuery& q, const ExecutionPlan& plan, const std::string& dest,
                       ExecOptions opts = {});

// Runs the plan's map-reduce jobs in memory over an input source.
std::vector<Row> run_jobs(const ExecutionPlan& plan, const PartitionSource& input, unsigned workers);

unsigned default_workers();

}  // namespace tracebench::query
