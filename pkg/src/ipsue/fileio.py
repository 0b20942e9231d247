"""File formats: Matrix Market matrices, system manifests, CSV tables, saved states.

A system manifest is a YAML (or JSON) document::

    schema: ipsue-system/1
    name: thermal
    parameters:
      - {name: h1, range: [1, 10000]}
    freq_range_hz: [0.01, 100]
    terms:
      - {coef: s, matrix: E.mtx}
      - {coef: -1, matrix: A0.mtx}
      - {coef: [param, h1], matrix: A1.mtx}
    inputs:
      - {coef: 1, matrix: B.mtx}
    outputs:
      - {coef: 1, matrix: C.mtx}

Matrix paths are relative to the manifest. Coefficients use the JSON forms
of :mod:`ipsue.coefficients`.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import yaml

from .coefficients import parse_coefficient
from .estimator import ReductionState
from .greedy import TRACE_COLUMNS
from .rbf import RbfSurrogate
from .system import AffineParametricSystem, ParameterPoint

__all__ = [
    "ParseError",
    "MatrixMarketError",
    "read_mtx",
    "write_mtx",
    "load_system",
    "save_system",
    "write_csv",
    "read_csv",
    "write_trace",
    "write_validation",
    "read_points",
    "write_points",
    "save_state",
    "load_state",
    "save_surrogates",
    "load_surrogates",
    "format_number",
    "SYSTEM_SCHEMA",
]

SYSTEM_SCHEMA = "ipsue-system/1"


class ParseError(ValueError):
    """Malformed input file; ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None, column: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        self.column = column
        where = self.path or "<input>"
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}")


class MatrixMarketError(ParseError):
    pass


# Matrix Market ---------------------------------------------------------------


def _tokens(line: str):
    """Whitespace-separated tokens with their 1-based start columns."""
    out, col = [], 0
    for tok in line.split():
        col = line.index(tok, col)
        out.append((tok, col + 1))
        col += len(tok)
    return out


def read_mtx(path) -> sp.csc_matrix:
    """Read a coordinate Matrix Market file (real, integer or complex field;
    general, symmetric or skew-symmetric storage). Repeated entries are summed.

    Raises
    ------
    MatrixMarketError
        With the line and column of the offending token.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MatrixMarketError(f"cannot read file: {exc.strerror}", path) from exc
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", path, 1, 1)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("expected '%%MatrixMarket matrix coordinate <field> <symmetry>'", path, 1, 1)
    obj, fmt, field, symmetry = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"only 'matrix coordinate' is supported, got '{obj} {fmt}'", path, 1, 1)
    if field not in ("real", "integer", "complex"):
        col = lines[0].lower().index(field) + 1
        raise MatrixMarketError(f"unsupported field '{field}'", path, 1, col)
    if symmetry not in ("general", "symmetric", "skew-symmetric"):
        col = lines[0].lower().rindex(symmetry) + 1
        raise MatrixMarketError(f"unsupported symmetry '{symmetry}'", path, 1, col)

    k = 1
    while k < len(lines) and (not lines[k].strip() or lines[k].lstrip().startswith("%")):
        k += 1
    if k == len(lines):
        raise MatrixMarketError("missing size line", path, k, 1)
    size = _tokens(lines[k])
    if len(size) != 3:
        raise MatrixMarketError("size line needs 'rows cols nnz'", path, k + 1, 1)
    try:
        n_rows, n_cols, nnz = (int(t) for t, _ in size)
    except ValueError:
        bad = next(c for t, c in size if not t.lstrip("-").isdigit())
        raise MatrixMarketError("size entries must be integers", path, k + 1, bad) from None
    if min(n_rows, n_cols, nnz) < 0:
        raise MatrixMarketError("negative size", path, k + 1, 1)

    width = 4 if field == "complex" else 3
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=complex if field == "complex" else float)
    count = 0
    for ln in range(k + 1, len(lines)):
        line = lines[ln]
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        toks = _tokens(line)
        if count >= nnz:
            raise MatrixMarketError(f"more than {nnz} entries", path, ln + 1, toks[0][1])
        if len(toks) != width:
            col = toks[min(len(toks), width) - 1][1] if toks else 1
            raise MatrixMarketError(f"expected {width} fields, got {len(toks)}", path, ln + 1, col)
        for pos in (0, 1):
            tok, col = toks[pos]
            try:
                idx = int(tok)
            except ValueError:
                raise MatrixMarketError(f"invalid index '{tok}'", path, ln + 1, col) from None
            limit = n_rows if pos == 0 else n_cols
            if not 1 <= idx <= limit:
                raise MatrixMarketError(f"index {idx} outside 1..{limit}", path, ln + 1, col)
            (rows if pos == 0 else cols)[count] = idx - 1
        nums = []
        for tok, col in toks[2:]:
            try:
                v = float(tok)
            except ValueError:
                raise MatrixMarketError(f"invalid number '{tok}'", path, ln + 1, col) from None
            if not np.isfinite(v):
                raise MatrixMarketError(f"non-finite value '{tok}'", path, ln + 1, col)
            nums.append(v)
        vals[count] = complex(nums[0], nums[1]) if field == "complex" else nums[0]
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}", path, len(lines), 1)

    if symmetry != "general":
        off = rows != cols
        sign = -1.0 if symmetry == "skew-symmetric" else 1.0
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, sign * vals[off]]),
        )
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsc()
    M.sum_duplicates()
    return M


def format_number(v) -> str:
    """Shortest decimal that round-trips the float."""
    return repr(float(v))


def write_mtx(path, M, comment: str | None = None) -> None:
    """Write ``M`` in coordinate format with 17 significant digits.

    The field is ``real`` unless an entry has a nonzero imaginary part.
    """
    A = sp.coo_matrix(M)
    A.sum_duplicates()
    is_complex = np.iscomplexobj(A.data) and np.any(A.data.imag != 0)
    field = "complex" if is_complex else "real"
    order = np.lexsort((A.row, A.col))
    lines = [f"%%MatrixMarket matrix coordinate {field} general"]
    if comment:
        lines += [f"% {c}" for c in comment.splitlines()]
    lines.append(f"{A.shape[0]} {A.shape[1]} {A.nnz}")
    for k in order:
        i, j, v = A.row[k] + 1, A.col[k] + 1, A.data[k]
        if is_complex:
            lines.append(f"{i} {j} {v.real:.17g} {v.imag:.17g}")
        else:
            lines.append(f"{i} {j} {np.real(v):.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


# system manifests -----------------------------------------------------------


def _load_structured(path: Path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from exc
    try:
        return yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line, col = (mark.line + 1, mark.column + 1) if mark is not None else (None, None)
        raise ParseError(str(exc.problem or exc), path, line, col) from exc
    except yaml.YAMLError as exc:
        raise ParseError(str(exc), path) from exc


def _require(data: dict, key: str, path, where: str = ""):
    if key not in data:
        raise ParseError(f"missing key '{where}{key}'", path)
    return data[key]


def _term_list(entries, key, base: Path, names, path):
    if not isinstance(entries, list) or not entries:
        raise ParseError(f"'{key}' must be a non-empty list", path)
    out = []
    for k, entry in enumerate(entries):
        where = f"{key}[{k}]."
        if not isinstance(entry, dict):
            raise ParseError(f"'{key}[{k}]' must be a mapping", path)
        unknown = set(entry) - {"coef", "matrix"}
        if unknown:
            raise ParseError(f"unknown keys {sorted(unknown)} in '{key}[{k}]'", path)
        try:
            coef = parse_coefficient(_require(entry, "coef", path, where), names)
        except ValueError as exc:
            raise ParseError(f"'{where}coef': {exc}", path) from exc
        out.append((coef, read_mtx(base / _require(entry, "matrix", path, where))))
    return out


def load_system(path) -> AffineParametricSystem:
    """Read a system manifest and the matrices it lists."""
    path = Path(path)
    data = _load_structured(path)
    if not isinstance(data, dict):
        raise ParseError("manifest must be a mapping", path, 1, 1)
    schema = _require(data, "schema", path)
    if schema != SYSTEM_SCHEMA:
        raise ParseError(f"unsupported schema {schema!r}, expected {SYSTEM_SCHEMA!r}", path)
    allowed = {"schema", "name", "parameters", "freq_range_hz", "terms", "inputs", "outputs"}
    unknown = set(data) - allowed
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}", path)
    params = data.get("parameters") or []
    names = [str(_require(p, "name", path, "parameters.")) for p in params]
    ranges = [tuple(_require(p, "range", path, "parameters.")) for p in params]
    base = path.parent
    terms = _term_list(_require(data, "terms", path), "terms", base, names, path)
    inputs = [(c, M.toarray()) for c, M in _term_list(_require(data, "inputs", path), "inputs", base, names, path)]
    outputs = [(c, M.toarray()) for c, M in _term_list(_require(data, "outputs", path), "outputs", base, names, path)]
    fr = data.get("freq_range_hz")
    try:
        return AffineParametricSystem(
            terms,
            inputs,
            outputs,
            param_names=names,
            param_ranges=ranges,
            freq_range_hz=None if fr is None else tuple(fr),
            name=str(data.get("name", path.stem)),
        )
    except ValueError as exc:
        raise ParseError(str(exc), path) from exc


def save_system(sys: AffineParametricSystem, directory, manifest: str = "system.yaml") -> Path:
    """Write ``sys`` as a manifest plus one Matrix Market file per matrix."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    names = list(sys.param_names)

    def dump(prefix, terms):
        entries = []
        for k, t in enumerate(terms):
            fname = f"{prefix}{k}.mtx"
            write_mtx(out / fname, t.matrix)
            entries.append({"coef": t.coef.to_json(names), "matrix": fname})
        return entries

    doc = {
        "schema": SYSTEM_SCHEMA,
        "name": sys.name,
        "parameters": [{"name": n, "range": list(r)} for n, r in zip(names, sys.param_ranges)],
        "freq_range_hz": None if sys.freq_range_hz is None else list(sys.freq_range_hz),
        "terms": dump("K", sys.terms),
        "inputs": dump("B", sys.inputs),
        "outputs": dump("C", sys.outputs),
    }
    target = out / manifest
    target.write_text(yaml.safe_dump(doc, sort_keys=False))
    return target


# CSV ------------------------------------------------------------------------


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_number(v)
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    """Write dict rows with a fixed column order; floats use shortest round-trip form."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row[c]) for c in columns])


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty CSV file", path, 1, 1)
    return rows[0], rows[1:]


def write_trace(trace, path) -> None:
    write_csv(path, TRACE_COLUMNS, trace.rows())


def write_validation(table, path) -> None:
    write_csv(path, table.columns(), table.rows())


def write_points(points: Sequence[ParameterPoint], path, param_names: Sequence[str] = ()) -> None:
    cols = ["s_imag", *param_names]
    write_csv(path, cols, [dict(zip(cols, p.components())) for p in points])


def read_points(path, sys: AffineParametricSystem) -> list[ParameterPoint]:
    """Points from a CSV whose first column is ``s_imag`` (rad/s) or ``f_hz``,
    followed by one column per system parameter in declaration order."""
    header, rows = read_csv(path)
    first = header[0].strip() if header else ""
    if first not in ("s_imag", "f_hz"):
        raise ParseError("first column must be 's_imag' or 'f_hz'", path, 1, 1)
    if len(header) < 1 + sys.d:
        raise ParseError(f"expected {1 + sys.d} columns, got {len(header)}", path, 1, 1)
    pts = []
    for ln, row in enumerate(rows, start=2):
        vals = []
        for c, tok in enumerate(row[: 1 + sys.d]):
            try:
                vals.append(float(tok))
            except ValueError:
                col = sum(len(t) + 1 for t in row[:c]) + 1
                raise ParseError(f"invalid number '{tok}'", path, ln, col) from None
        if len(vals) != 1 + sys.d:
            raise ParseError(f"expected {1 + sys.d} values", path, ln, 1)
        s = 1j * vals[0] if first == "s_imag" else 2j * np.pi * vals[0]
        pts.append(ParameterPoint(s, vals[1:]))
    return pts


# states and surrogates ------------------------------------------------------


def _points_array(points, d):
    return np.array([[p.s.real, p.s.imag, *p.mu] for p in points], dtype=float).reshape(len(points), 2 + d)


def _array_points(arr):
    return [ParameterPoint(complex(r[0], r[1]), tuple(r[2:])) for r in arr]


def save_state(state: ReductionState, path) -> None:
    """Store the bases, the interpolation points and the reduced operators."""
    d = state.system.d
    np.savez(
        path,
        V=state.V,
        V_du=state.V_du,
        V_e=state.V_e,
        points=_points_array(state.points, d),
        alpha_points=_points_array(state.alpha_points, d),
        reduced_terms=state.Kr,
        reduced_inputs=state.Br,
        reduced_outputs=state.Cr,
    )


def load_state(path, sys: AffineParametricSystem) -> ReductionState:
    """Rebuild a state for ``sys``; the reduced operators are recomputed and
    checked against the stored ones."""
    try:
        data = np.load(path)
    except (OSError, ValueError) as exc:
        raise ParseError(f"cannot read state: {exc}", path) from exc
    with data:
        V = data["V"]
        if V.shape[0] != sys.n:
            raise ParseError(f"state has {V.shape[0]} rows, system order is {sys.n}", path)
        state = ReductionState(sys).set_bases(V, data["V_du"], data["V_e"])
        state.points = _array_points(data["points"])
        state.alpha_points = _array_points(data["alpha_points"])
        stored = data["reduced_terms"]
    if stored.shape != state.Kr.shape or not np.allclose(stored, state.Kr, rtol=1e-12, atol=0):
        raise ParseError("stored reduced operators do not match the system", path)
    return state


def save_surrogates(surrogates: Sequence[RbfSurrogate], path, shape=(1, 1)) -> None:
    doc = {"shape": list(shape), "surrogates": [g.to_dict() for g in surrogates]}
    Path(path).write_text(json.dumps(doc, indent=1))


def load_surrogates(path) -> list[RbfSurrogate]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from exc
    return [RbfSurrogate.from_dict(g) for g in doc["surrogates"]]
