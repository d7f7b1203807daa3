"""Engine facade: one object owning catalog, planner, executor, collectors,
and the model registry; sessions submit statements through execute().

Statement flow for a SELECT: parse, bind, plan (steered when a STEER model
is routed), execute, hand the report to the data collectors, project. Model
and collector handling arrive as CALL commands, session variables via SET.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .catalog import Catalog
from .collectors import DataCollection
from .config import EngineConfig, parse_bool
from .errors import EngineError, UnsupportedFeatureError
from .executor import ExecutionReport, Executor, output_columns, render_explain
from .parser import parse
from .planner import Planner
from .plannodes import PlanNode, plan_to_wire
from .session import HINT_VARS, MODEL_VARS, SessionState
from .sqlast import ControlCommand, ControlVerb, QueryAst, QueryClass, bind
from .workers import ModelRegistry, WorkerHookProvider


@dataclass
class Result:
    columns: list[str] = field(default_factory=list)
    rows: list[tuple] = field(default_factory=list)
    message: str | None = None


class Engine:
    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.data_dir = Path(self.config.data_dir)
        for sub in ("tables", "datasets", "logs"):
            (self.data_dir / sub).mkdir(parents=True, exist_ok=True)
        self.catalog = Catalog()
        self.catalog.restore_all(self.data_dir)
        self.executor = Executor(self.catalog)
        self.planner = Planner(
            self.catalog,
            self.config.cost_constants(),
            allow_cross_products=self.config.allow_cross_products,
            hint_family=self.config.hint_set_family,
        )
        self.collectors = DataCollection(
            self.catalog, self.data_dir, self.config.collector_buffer_cap
        )
        self.registry = ModelRegistry(
            self.catalog, self.data_dir, self.config.startup_timeout_ms
        )

    def create_session(self) -> SessionState:
        return SessionState(worker_timeout_ms=self.config.worker_timeout_ms)

    def close(self) -> None:
        self.registry.close()

    def analyze_all(self) -> None:
        for name in sorted(self.catalog.tables):
            self.catalog.analyze(
                name, self.config.histogram_buckets, self.config.mcv_limit
            )

    # --- statement dispatch ------------------------------------------------------

    def execute(self, session: SessionState, text: str) -> Result:
        statement = parse(text)
        if isinstance(statement, ControlCommand):
            return self._control(session, statement)
        ast = bind(statement, self.catalog)
        if ast.query_class is QueryClass.INSERT:
            return self._insert(session, ast, text)
        plan = self.plan_query(session, ast)
        if ast.query_class is QueryClass.EXPLAIN:
            report = ExecutionReport(
                query_text=text,
                plan=plan,
                query_class="EXPLAIN",
                tables=tuple(sorted(ast.tables)),
            )
            return self._explain_result(session, report, analyze=False)
        if ast.query_class is QueryClass.EXPLAIN_ANALYZE:
            _, report = self.executor.execute(
                plan, text, "EXPLAIN_ANALYZE", collect=False
            )
            self.collectors.capture(report, ast)
            return self._explain_result(session, report, analyze=True)
        rows, report = self.executor.execute(
            plan, text, "SELECT", collect=not ast.count_star
        )
        self.collectors.capture(report, ast)
        return self._project(ast, plan, rows, report)

    def plan_query(self, session: SessionState, ast: QueryAst) -> PlanNode:
        """Plan a bound SELECT; steering applies when a STEER model routes."""
        hooks = WorkerHookProvider(self.registry, session, ast.tables)
        if self.registry.route(session, "STEER", ast.tables) is not None:
            return self.planner.steer(ast, session, hooks)
        return self.planner.plan(ast, session, hooks)

    # --- queries -----------------------------------------------------------------

    def _insert(self, session: SessionState, ast: QueryAst, text: str) -> Result:
        table = ast.tables[0]
        count = self.catalog.insert_rows(table, ast.insert_values)
        report = ExecutionReport(
            query_text=text,
            plan=None,
            result_row_count=count,
            query_class="INSERT",
            tables=(table,),
        )
        self.collectors.capture(report, ast)
        return Result(message=f"INSERT {count}")

    def _project(
        self,
        ast: QueryAst,
        plan: PlanNode,
        rows: list[tuple],
        report: ExecutionReport,
    ) -> Result:
        if ast.count_star:
            return Result(columns=["count"], rows=[(report.result_row_count,)])
        layout = {name: i for i, name in enumerate(output_columns(plan, self.catalog))}
        if ast.select is None:
            names = [
                f"{t}.{col.name}"
                for t in ast.tables
                for col in self.catalog.get_table(t).columns
            ]
        else:
            names = [f"{ref.qualifier}.{ref.name}" for ref in ast.select]
        indices = [layout[name] for name in names]
        projected = [tuple(row[i] for i in indices) for row in rows]
        return Result(columns=names, rows=projected)

    def _explain_result(
        self, session: SessionState, report: ExecutionReport, analyze: bool
    ) -> Result:
        text = render_explain(report, analyze=analyze)
        lines = text.split("\n")
        latency = self._predicted_latency(session, report)
        if latency is not None:
            lines.append(f"Predicted latency: {latency:.3f} ms")
        return Result(columns=["query plan"], rows=[(line,) for line in lines])

    def _predicted_latency(self, session: SessionState, report: ExecutionReport):
        if report.plan is None:
            return None
        hooks = WorkerHookProvider(self.registry, session, report.plan.leaf_tables())
        return hooks.predict_latency(
            plan_to_wire(report.plan, with_estimates=True, with_node_ids=True)
        )

    # --- control commands -----------------------------------------------------------

    def _control(self, session: SessionState, command: ControlCommand) -> Result:
        verb = command.verb
        args = command.args
        if verb is ControlVerb.DEFINE_DATA_COLLECTOR:
            name, tables, classes = args
            definition = self.collectors.define_collector(
                str(name), _require_set(tables, "table filter"), _require_set(classes, "class filter")
            )
            return Result(message=f"collector {definition.name} defined")
        if verb is ControlVerb.START_DATA_COLLECTOR:
            name, dataset_id, target_table = (str(a) for a in args)
            version = self.collectors.start_collector(name, dataset_id, target_table)
            return Result(message=f"collector {name} running, dataset {dataset_id} v{version}")
        if verb is ControlVerb.STOP_DATA_COLLECTOR:
            count = self.collectors.stop_collector(str(args[0]))
            return Result(message=f"dataset flushed, {count} records")
        if verb is ControlVerb.REGISTER_MODEL:
            name, task, scope, stats_table, model_dir = args
            entry = self.registry.register_model(
                str(name),
                str(task),
                _require_set(scope, "table scope"),
                str(stats_table),
                str(model_dir),
            )
            return Result(message=f"model {entry.name} registered for {entry.task}")
        if verb is ControlVerb.START_MODEL:
            handle = self.registry.start_model(str(args[0]))
            return Result(message=f"model {args[0]} running (pid {handle.pid})")
        if verb is ControlVerb.RESET_MODEL:
            self.registry.reset_model(str(args[0]))
            return Result(message=f"model {args[0]} stopped")
        if verb is ControlVerb.SET:
            return self._set_variable(session, *args)
        if verb is ControlVerb.SHOW:
            return self._show(session, str(args[0]))
        raise UnsupportedFeatureError(f"verb {verb} not handled")

    def _set_variable(self, session: SessionState, name: str, value) -> Result:
        name = str(name).lower()
        if name in MODEL_VARS:
            if value is None or (isinstance(value, str) and value.lower() in ("", "none")):
                session.model_vars[name] = None
            else:
                session.model_vars[name] = str(value)
        elif name == "baihe_worker_timeout_ms":
            try:
                timeout = int(value)
            except (TypeError, ValueError):
                raise EngineError(f"{name} expects an integer") from None
            if timeout <= 0:
                raise EngineError(f"{name} must be positive")
            session.worker_timeout_ms = timeout
        elif name in HINT_VARS:
            try:
                flag = parse_bool(value)
                session.hint_set = session.hint_set.with_flag(name, flag)
            except ValueError as exc:
                raise EngineError(str(exc)) from None
        else:
            raise UnsupportedFeatureError(f"unknown session variable {name!r}")
        return Result(message=f"SET {name}")

    def _show(self, session: SessionState, name: str) -> Result:
        name = name.lower()
        if name == "tables":
            rows = [
                (t.name, t.row_count, len(t.columns))
                for t in sorted(self.catalog.tables.values(), key=lambda t: t.name)
            ]
            return Result(columns=["table", "rows", "columns"], rows=rows)
        if name == "models":
            rows = [
                (
                    e.name,
                    e.task,
                    e.state,
                    ",".join(sorted(e.table_scope)),
                    e.request_count,
                    e.fallback_count,
                )
                for e in sorted(self.registry.entries.values(), key=lambda e: e.name)
            ]
            return Result(
                columns=["model", "task", "state", "scope", "requests", "fallbacks"],
                rows=rows,
            )
        if name == "collectors":
            rows = [
                (s.definition.name, s.status, s.dataset_id or None, s.version or None)
                for s in sorted(
                    self.collectors.collectors.values(),
                    key=lambda s: s.definition.name,
                )
            ]
            return Result(
                columns=["collector", "status", "dataset", "version"], rows=rows
            )
        if name == "fallbacks":
            rows = [(task, count) for task, count in sorted(session.fallbacks.items())]
            rows.append(("total", session.fallback_total))
            return Result(columns=["task", "fallbacks"], rows=rows)
        value = session.variable(name)
        if value is None and name not in MODEL_VARS:
            raise UnsupportedFeatureError(f"unknown variable {name!r}")
        return Result(columns=[name], rows=[(value,)])


def _require_set(value, what: str) -> frozenset:
    if not isinstance(value, frozenset):
        raise EngineError(f"{what} must be a {{...}} set")
    return value
