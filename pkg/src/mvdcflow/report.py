"""Report documents and their table, CSV and JSON renderings.

A :class:`ReportDocument` holds string metadata plus named tables of raw
values. Renderers only format; the stored numbers are never rounded, and the
CSV and JSON forms parse back to an identical document.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .ac_solver import AcSolution
from .contingency import StudyReport
from .dc_solvers import NetworkSolution
from .netmodel import Network, serialize_network

__all__ = [
    "Table",
    "ReportDocument",
    "options_hash",
    "dc_report",
    "ac_report",
    "study_report",
    "render_table",
    "render_csv",
    "render_json",
    "parse_csv",
    "parse_json",
    "render",
    "BUSES_PER_BLOCK",
]

BUSES_PER_BLOCK = 7
Value = int | float | str | None


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...]

    def column(self, name: str) -> list[Value]:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict[str, Value]]:
        return [dict(zip(self.columns, r)) for r in self.rows]


@dataclass(frozen=True)
class ReportDocument:
    """Metadata plus the voltage, current, case and summary tables.

    Any of the tables may be absent depending on the study.
    """

    metadata: tuple[tuple[str, str], ...]
    tables: tuple[Table, ...]

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def has(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)

    @property
    def meta(self) -> dict[str, str]:
        return dict(self.metadata)


def options_hash(net: Network, options: Mapping[str, Any]) -> str:
    """Short digest of the network content and run options."""
    payload = json.dumps({"network": serialize_network(net), "options": dict(options)}, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _meta(net: Network, options: Mapping[str, Any], extra: Iterable[tuple[str, Any]]) -> tuple[tuple[str, str], ...]:
    base = [
        ("network", net.name),
        ("scenario", net.scenario.name),
        ("load_scale", repr(net.scenario.load_scale)),
        ("options_hash", options_hash(net, options)),
    ]
    base += [(f"option.{k}", str(v)) for k, v in sorted(options.items())]
    base += [(k, v if isinstance(v, str) else repr(v)) for k, v in extra]
    return tuple(base)


def _branch_rows(net: Network, currents: Mapping[int, float]) -> list[tuple[Value, ...]]:
    rows = []
    for br in sorted(net.branches, key=lambda b: b.id):
        i = currents[br.id]
        rows.append((br.id, br.from_bus, br.to_bus, br.conductor, float(i), float(abs(i) / net.conductor(br).ampacity * 100.0)))
    return rows


def dc_report(sol: NetworkSolution, options: Mapping[str, Any]) -> ReportDocument:
    """Bus voltage and branch current report for one DC solution."""
    net = sol.network
    cert = sol.dc.certificate
    extra: list[tuple[str, Any]] = [
        ("solver", sol.dc.method),
        ("converged", str(sol.converged).lower()),
        ("iterations", sol.dc.iterations),
        ("final_step_v", sol.dc.final_step),
        ("per_pole_loss_w", sol.per_pole_loss),
        ("total_loss_w", sol.loss),
    ]
    if cert is not None:
        extra += [
            ("certificate_holds", str(cert.holds).lower()),
            ("certificate_interpretation", cert.interpretation),
            ("certificate_r_min", cert.r_min),
            ("certificate_alpha", cert.alpha),
            ("radius_lower", cert.radius_interval[0]),
            ("radius_upper", cert.radius_interval[1]),
        ]
    volts = Table("voltages", ("bus", "name", "voltage_v"), tuple((b, net.bus(b).name, v) for b, v in sol.voltages.items()))
    amps = Table(
        "currents",
        ("branch", "from", "to", "conductor", "current_a", "mlp_pct"),
        tuple(_branch_rows(net, sol.currents)),
    )
    return ReportDocument(_meta(net, options, extra), (volts, amps))


def ac_report(net: Network, sol: AcSolution, options: Mapping[str, Any]) -> ReportDocument:
    """Voltage magnitude/angle and branch current report for one AC solution."""
    extra = [
        ("solver", "newton_raphson"),
        ("converged", "true"),
        ("iterations", sol.iterations),
        ("max_mismatch_w", sol.max_mismatch),
        ("total_loss_w", sol.loss),
    ]
    mags, angs = sol.magnitude, sol.angle
    volts = Table(
        "voltages",
        ("bus", "name", "voltage_v", "angle_rad"),
        tuple((b, net.bus(b).name, mags[b], angs[b]) for b in sol.bus_ids),
    )
    rows = []
    for br in sorted(net.branches, key=lambda b: b.id):
        i = sol.current_magnitude(br.id)
        rows.append(
            (br.id, br.from_bus, br.to_bus, br.conductor, i, sol.current_angle(br.id), i / net.conductor(br).ampacity * 100.0)
        )
    amps = Table("currents", ("branch", "from", "to", "conductor", "current_a", "angle_rad", "mlp_pct"), tuple(rows))
    return ReportDocument(_meta(net, options, extra), (volts, amps))


CASE_COLUMNS = (
    "case",
    "kind",
    "element",
    "label",
    "status",
    "converged",
    "max_current_a",
    "max_current_branch",
    "max_mlp_pct",
    "max_mlp_branches",
    "min_voltage_v",
    "min_voltage_bus",
    "per_pole_loss_w",
    "total_loss_w",
    "shed_load_w",
    "shed_buses",
)

SUMMARY_COLUMNS = (
    "conductor",
    "loss_w",
    "normal_mlp_pct",
    "normal_location",
    "worst_mlp_pct",
    "worst_location",
    "worst_cause",
)


def study_report(net: Network, study: StudyReport, options: Mapping[str, Any]) -> ReportDocument:
    """Per-case table plus the per-conductor worst-case summary."""
    labels = study.branch_labels
    rows = []
    for r in (study.normal, *study.cases):
        rows.append(
            (
                r.case.key,
                r.case.kind.value,
                r.case.element,
                r.label,
                r.status,
                str(r.converged).lower(),
                r.max_current,
                labels.get(r.max_current_branch) if r.max_current_branch is not None else None,
                r.max_mlp,
                " & ".join(labels[b] for b in r.max_mlp_branches()) or None,
                _finite(r.min_voltage),
                r.min_voltage_bus,
                r.per_pole_loss,
                r.total_loss,
                r.shed_load,
                " ".join(str(b) for b in r.shed_buses) or None,
            )
        )
    summary = tuple(
        (
            s.conductor,
            s.loss,
            s.normal_mlp,
            " & ".join(s.normal_locations) or None,
            s.worst_mlp,
            " / ".join(s.worst_locations) or None,
            " / ".join(s.worst_causes) or None,
        )
        for s in study.summary
    )
    extra = [
        ("solver", study.solver),
        ("case_count", len(study.cases)),
        ("normal_status", study.normal.status),
        ("worst_mlp_pct", max((study.cases[loc.case_index].max_mlp for loc in study.worst_mlp), default=0.0)),
        ("worst_mlp_location", " / ".join(dict.fromkeys(loc.label for loc in study.worst_mlp))),
        ("worst_mlp_cause", " / ".join(dict.fromkeys(loc.cause for loc in study.worst_mlp))),
    ]
    return ReportDocument(
        _meta(net, options, extra),
        (Table("cases", CASE_COLUMNS, tuple(rows)), Table("summary", SUMMARY_COLUMNS, summary)),
    )


# -- text rendering -----------------------------------------------------------


def _fmt(v: Value, digits: int = 1) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}f}" if v == 0 or abs(v) >= 1 else f"{v:.4g}"
    return str(v)


def _grid(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    out = [line, "-" * len(line)]
    out += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(out)


def _voltage_blocks(t: Table) -> str:
    """Voltages in kV, seven buses per block as in the published tables."""
    recs = t.records()
    blocks = []
    for start in range(0, len(recs), BUSES_PER_BLOCK):
        chunk = recs[start : start + BUSES_PER_BLOCK]
        lines = ["bus no.     " + "".join(f"{r['bus']:>10}" for r in chunk)]
        lines.append("V (kV)      " + "".join(f"{r['voltage_v'] / 1000.0:>10.4f}" for r in chunk))
        if "angle_rad" in t.columns:
            lines.append("Angle (rad) " + "".join(f"{r['angle_rad']:>10.5f}" for r in chunk))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def render_table(doc: ReportDocument) -> str:
    parts = ["\n".join(f"{k}: {v}" for k, v in doc.metadata)]
    for t in doc.tables:
        if t.name == "voltages":
            parts.append("Bus voltages\n" + _voltage_blocks(t))
            continue
        digits = {"angle_rad": 2, "mlp_pct": 2, "max_mlp_pct": 2, "normal_mlp_pct": 2, "worst_mlp_pct": 2}
        rows = [[_fmt(v, digits.get(c, 1)) for c, v in zip(t.columns, r)] for r in t.rows]
        title = {"currents": "Branch currents", "cases": "Contingency cases", "summary": "Worst-case summary"}.get(t.name, t.name)
        parts.append(title + "\n" + _grid(list(t.columns), rows))
    return "\n\n".join(parts) + "\n"


# -- CSV ----------------------------------------------------------------------


def _cell(v: Value) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _column_type(t: Table, i: int) -> str:
    kinds = {type(r[i]) for r in t.rows if r[i] is not None}
    if not kinds or kinds == {int}:
        return "int"
    if kinds == {float}:
        return "float"
    if kinds == {str}:
        return "str"
    raise TypeError(f"table {t.name!r} column {t.columns[i]!r} mixes types {sorted(k.__name__ for k in kinds)}")


def render_csv(doc: ReportDocument) -> str:
    """Sectioned CSV: ``#meta`` rows, then one block per table.

    Each block is a ``#table,<name>`` row, a ``#types`` row (int, float or
    str per column), the header row and the data rows. Floats are written
    with ``repr`` and empty cells mean "no value", so the text parses back
    to an identical document.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for k, v in doc.metadata:
        w.writerow(["#meta", k, v])
    for t in doc.tables:
        w.writerow(["#table", t.name])
        w.writerow(["#types", *(_column_type(t, i) for i in range(len(t.columns)))])
        w.writerow(t.columns)
        for r in t.rows:
            w.writerow([_cell(v) for v in r])
    return buf.getvalue()


_CASTS = {"int": int, "float": float, "str": str}


def parse_csv(text: str) -> ReportDocument:
    meta: list[tuple[str, str]] = []
    tables: list[Table] = []
    name: str | None = None
    types: list[str] = []
    header: tuple[str, ...] | None = None
    rows: list[tuple[Value, ...]] = []

    def flush() -> None:
        if name is not None and header is not None:
            tables.append(Table(name, header, tuple(rows)))

    for rec in csv.reader(io.StringIO(text)):
        if not rec:
            continue
        if rec[0] == "#meta":
            meta.append((rec[1], rec[2]))
        elif rec[0] == "#table":
            flush()
            name, types, header, rows = rec[1], [], None, []
        elif rec[0] == "#types":
            types = rec[1:]
        elif header is None:
            header = tuple(rec)
        else:
            rows.append(tuple(None if c == "" else _CASTS[k](c) for k, c in zip(types, rec)))
    flush()
    return ReportDocument(tuple(meta), tuple(tables))


# -- JSON ---------------------------------------------------------------------


def render_json(doc: ReportDocument) -> str:
    payload = {
        "metadata": dict(doc.metadata),
        "tables": {t.name: {"columns": list(t.columns), "rows": [list(r) for r in t.rows]} for t in doc.tables},
    }
    return json.dumps(payload, indent=2) + "\n"


def parse_json(text: str) -> ReportDocument:
    payload = json.loads(text)
    tables = tuple(
        Table(name, tuple(body["columns"]), tuple(tuple(r) for r in body["rows"])) for name, body in payload["tables"].items()
    )
    return ReportDocument(tuple(payload["metadata"].items()), tables)


RENDERERS = {"table": render_table, "csv": render_csv, "json": render_json}


def render(doc: ReportDocument, fmt: str) -> str:
    try:
        return RENDERERS[fmt](doc)
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None
