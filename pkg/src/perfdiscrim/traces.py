"""Execution-trace data model and CSV trace files.

A trace file is a CSV whose header declares each column's role with a prefix::

    in:size,aux:parse,aux:render,out:time
    120,3,0,0.51

``in:`` columns are program inputs, ``aux:`` columns are per-function call
counts, ``out:`` is the measured running time.  An optional ``truth:`` column
carries generator ground-truth labels and is ignored unless requested.  A JSON
sidecar (``{"inputs": [...], "aux": [...], "output": "..."}``) may override the
prefixes; it is picked up automatically from ``<file>.schema.json``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

ROLE_PREFIXES = {"in": "input", "aux": "aux", "out": "output", "truth": "truth"}


class TraceFormatError(ValueError):
    """A trace file or trace record violates the format or schema."""


@dataclass(frozen=True)
class VariableSchema:
    input_names: tuple[str, ...]
    aux_names: tuple[str, ...]
    output_name: str

    def __post_init__(self):
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "aux_names", tuple(self.aux_names))
        if not self.input_names:
            raise TraceFormatError("schema needs at least one input variable")
        if not self.output_name:
            raise TraceFormatError("schema needs an output variable")
        names = [*self.input_names, *self.aux_names, self.output_name]
        seen = set()
        for name in names:
            if name in seen:
                raise TraceFormatError(f"duplicate variable name {name!r}")
            seen.add(name)

    @property
    def n_inputs(self) -> int:
        return len(self.input_names)

    @property
    def n_aux(self) -> int:
        return len(self.aux_names)

    @classmethod
    def from_json(cls, obj: dict) -> "VariableSchema":
        try:
            return cls(obj["inputs"], obj.get("aux", []), obj["output"])
        except KeyError as exc:
            raise TraceFormatError(f"schema sidecar missing key {exc.args[0]!r}") from None

    def to_json(self) -> dict:
        return {
            "inputs": list(self.input_names),
            "aux": list(self.aux_names),
            "output": self.output_name,
        }


@dataclass(frozen=True, eq=False)
class ExecutionTrace:
    """One program run: input valuation, call counts and running time."""

    inputs: np.ndarray
    aux: np.ndarray
    output: float


@dataclass(frozen=True, eq=False)
class TraceSet:
    """A validated, immutable set of traces stored column-wise.

    ``inputs`` is N x n, ``aux`` is N x m and ``outputs`` has length N.
    ``truth`` holds optional ground-truth class labels (benchmarks only).
    """

    schema: VariableSchema
    inputs: np.ndarray
    aux: np.ndarray
    outputs: np.ndarray
    truth: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        aux = np.asarray(self.aux, dtype=float)
        outputs = np.asarray(self.outputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if aux.ndim == 1:
            aux = aux.reshape(len(outputs), -1)
        n_traces = len(outputs)
        if n_traces == 0:
            raise TraceFormatError("trace set is empty")
        if inputs.shape != (n_traces, self.schema.n_inputs):
            raise TraceFormatError(
                f"inputs shape {inputs.shape} does not match "
                f"{n_traces} traces x {self.schema.n_inputs} inputs"
            )
        if aux.shape != (n_traces, self.schema.n_aux):
            raise TraceFormatError(
                f"aux shape {aux.shape} does not match "
                f"{n_traces} traces x {self.schema.n_aux} aux variables"
            )
        if not np.all(np.isfinite(inputs)):
            raise TraceFormatError("non-finite input value")
        if not np.all(np.isfinite(outputs)):
            raise TraceFormatError("non-finite output value")
        if aux.size:
            if not np.all(np.isfinite(aux)):
                raise TraceFormatError("non-finite auxiliary count")
            if aux.min() < 0:
                raise TraceFormatError("negative auxiliary count")
        truth = self.truth
        if truth is not None:
            truth = np.asarray(truth, dtype=np.intp)
            if truth.shape != (n_traces,):
                raise TraceFormatError("truth labels do not match trace count")
            truth.setflags(write=False)
        for arr in (inputs, aux, outputs):
            arr.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "aux", aux)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "truth", truth)

    def __len__(self) -> int:
        return len(self.outputs)

    def __getitem__(self, i: int) -> ExecutionTrace:
        return ExecutionTrace(self.inputs[i], self.aux[i], float(self.outputs[i]))

    def __iter__(self) -> Iterator[ExecutionTrace]:
        for i in range(len(self)):
            yield self[i]

    @property
    def traces(self) -> list[ExecutionTrace]:
        return list(self)

    @classmethod
    def from_traces(
        cls, schema: VariableSchema, traces: Sequence[ExecutionTrace]
    ) -> "TraceSet":
        if not traces:
            raise TraceFormatError("trace set is empty")
        for k, t in enumerate(traces):
            if len(t.inputs) != schema.n_inputs or len(t.aux) != schema.n_aux:
                raise TraceFormatError(f"trace {k}: vector lengths do not match schema")
        return cls(
            schema,
            np.array([t.inputs for t in traces], dtype=float).reshape(len(traces), -1),
            np.array([t.aux for t in traces], dtype=float).reshape(len(traces), -1),
            np.array([t.output for t in traces], dtype=float),
        )


@dataclass(frozen=True, eq=False)
class PointSet:
    """Input/output pairs fed to clustering; ``labels`` optional."""

    X: np.ndarray
    y: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y lengths differ")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.intp)
            if labels.shape != y.shape:
                raise ValueError("labels must match the number of points")
            if labels.size and labels.min() < 0:
                raise ValueError("labels must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def points(self) -> list[tuple[np.ndarray, float]]:
        return [(self.X[i], float(self.y[i])) for i in range(len(self))]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def with_labels(self, labels) -> "PointSet":
        return PointSet(self.X, self.y, labels)


def project_points(ts: TraceSet) -> PointSet:
    """Drop auxiliary counts, keeping (inputs, output) in trace order."""
    return PointSet(ts.inputs, ts.outputs)


def _split_header(header: list[str]) -> list[tuple[str | None, str]]:
    cols = []
    for raw in header:
        name = raw.strip()
        prefix, sep, rest = name.partition(":")
        if sep and prefix in ROLE_PREFIXES:
            if not rest:
                raise TraceFormatError(f"malformed header: empty name in column {name!r}")
            cols.append((ROLE_PREFIXES[prefix], rest))
        else:
            cols.append((None, name))
    return cols


def _parse_real(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise TraceFormatError(f"row {row}, column {col!r}: non-numeric value {cell!r}") from None
    if not math.isfinite(value):
        raise TraceFormatError(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return value


def load_traces(
    path: str | Path,
    schema_hint: VariableSchema | None = None,
    with_truth: bool = False,
) -> TraceSet:
    """Read and validate a CSV trace file.

    Raises ``TraceFormatError`` naming the offending row (1-based, header
    excluded) and column; ``OSError`` propagates for unreadable files.
    """
    path = Path(path)
    if schema_hint is None:
        sidecar = path.with_name(path.name + ".schema.json")
        if sidecar.exists():
            schema_hint = VariableSchema.from_json(json.loads(sidecar.read_text("utf-8")))

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError("malformed header: file is empty") from None
        cols = _split_header(header)
        names = [name for _, name in cols]
        if len(set(names)) != len(names):
            raise TraceFormatError("malformed header: duplicate column names")

        if schema_hint is not None:
            by_name = {name: k for k, name in enumerate(names)}
            truth_cols = [k for k, (role, _) in enumerate(cols) if role == "truth"]
            try:
                in_idx = [by_name[n] for n in schema_hint.input_names]
                aux_idx = [by_name[n] for n in schema_hint.aux_names]
                out_idx = by_name[schema_hint.output_name]
            except KeyError as exc:
                raise TraceFormatError(f"malformed header: missing column {exc.args[0]!r}") from None
            schema = schema_hint
        else:
            in_idx = [k for k, (role, _) in enumerate(cols) if role == "input"]
            aux_idx = [k for k, (role, _) in enumerate(cols) if role == "aux"]
            outs = [k for k, (role, _) in enumerate(cols) if role == "output"]
            truth_cols = [k for k, (role, _) in enumerate(cols) if role == "truth"]
            unknown = [name for role, name in cols if role is None]
            if unknown:
                raise TraceFormatError(
                    f"malformed header: column {unknown[0]!r} has no role prefix (in:/aux:/out:)"
                )
            if len(outs) != 1:
                raise TraceFormatError("malformed header: expected exactly one out: column")
            out_idx = outs[0]
            schema = VariableSchema(
                [names[k] for k in in_idx], [names[k] for k in aux_idx], names[out_idx]
            )
        if len(truth_cols) > 1:
            raise TraceFormatError("malformed header: more than one truth: column")

        width = len(header)
        inputs, aux, outputs, truth = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != width:
                raise TraceFormatError(f"row {row_no}: expected {width} fields, got {len(row)}")
            inputs.append([_parse_real(row[k], row_no, names[k]) for k in in_idx])
            counts = [_parse_real(row[k], row_no, names[k]) for k in aux_idx]
            for k, v in zip(aux_idx, counts):
                if v < 0:
                    raise TraceFormatError(
                        f"row {row_no}, column {names[k]!r}: negative auxiliary count"
                    )
            aux.append(counts)
            outputs.append(_parse_real(row[out_idx], row_no, names[out_idx]))
            if with_truth and truth_cols:
                truth.append(int(_parse_real(row[truth_cols[0]], row_no, names[truth_cols[0]])))

    if not outputs:
        raise TraceFormatError("trace file has no data rows")
    if with_truth and not truth_cols:
        raise TraceFormatError("no truth: column in trace file")
    n = len(outputs)
    return TraceSet(
        schema,
        np.array(inputs, dtype=float).reshape(n, schema.n_inputs),
        np.array(aux, dtype=float).reshape(n, schema.n_aux),
        np.array(outputs, dtype=float),
        truth=np.array(truth, dtype=np.intp) if with_truth else None,
    )


def _fmt(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def save_traces(ts: TraceSet, path: str | Path, with_truth: bool = True) -> None:
    """Write ``ts`` in the prefixed CSV format (``truth:label`` when present)."""
    schema = ts.schema
    header = [f"in:{n}" for n in schema.input_names]
    header += [f"aux:{n}" for n in schema.aux_names]
    header.append(f"out:{schema.output_name}")
    write_truth = with_truth and ts.truth is not None
    if write_truth:
        header.append("truth:label")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(len(ts)):
            row = [_fmt(v) for v in ts.inputs[i]]
            row += [_fmt(v) for v in ts.aux[i]]
            row.append(repr(float(ts.outputs[i])))
            if write_truth:
                row.append(str(int(ts.truth[i])))
            writer.writerow(row)
