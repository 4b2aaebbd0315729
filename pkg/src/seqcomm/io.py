"""Reading graphs and correlation matrices from disk, and thresholding."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadEntry, IdOutOfRange, NotSquare, NotSymmetric, ParseError, SelfLoop, ValidationError
from .graph import AdjacencyMatrix, _frozen

DIAG_TOL = 1e-8
SYM_TOL = 1e-12
MATRIX_KINDS = ("adjacency", "correlation")


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Symmetric matrix with entries in [-1, 1] and a unit diagonal."""

    values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.values, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise NotSquare(f"correlation matrix must be square, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise BadEntry("correlation matrix has non-finite entries")
        if np.any(np.abs(c) > 1.0):
            raise BadEntry("correlation entries must lie in [-1, 1]")
        asym = float(np.abs(c - c.T).max()) if c.size else 0.0
        if asym > SYM_TOL:
            raise NotSymmetric(asym)
        if np.any(np.abs(np.diag(c) - 1.0) > DIAG_TOL):
            raise BadEntry("correlation matrix must have a unit diagonal")
        # remove rounding-level asymmetry so thresholding is symmetric
        object.__setattr__(self, "values", _frozen(0.5 * (c + c.T)))

    @property
    def n(self) -> int:
        return self.values.shape[0]


def load_edge_list(path) -> AdjacencyMatrix:
    """Read an edge list whose first non-comment line is ``n <count>``.

    Vertex ids are 0-based; repeated edges (in either orientation) collapse to
    one edge.
    """
    n = None
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if n is None:
                if len(tok) != 2 or tok[0] != "n":
                    raise ParseError("expected header 'n <count>'", lineno)
                try:
                    n = int(tok[1])
                except ValueError:
                    raise ParseError(f"bad vertex count {tok[1]!r}", lineno) from None
                if n < 1:
                    raise ParseError("vertex count must be positive", lineno)
                continue
            if len(tok) != 2:
                raise ParseError(f"expected 'u v', got {line!r}", lineno)
            try:
                u, v = int(tok[0]), int(tok[1])
            except ValueError:
                raise ParseError(f"vertex ids must be integers, got {line!r}", lineno) from None
            if not (0 <= u < n and 0 <= v < n):
                raise IdOutOfRange(f"vertex id outside 0..{n - 1}", lineno)
            if u == v:
                raise SelfLoop(f"line {lineno}: self-loop at vertex {u}")
            edges.append((u, v))
    if n is None:
        raise ParseError("missing header 'n <count>'")
    return AdjacencyMatrix.from_edges(n, edges)


def _read_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not x.strip() for x in row):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise BadEntry(f"line {lineno}: non-numeric entry") from None
    if not rows:
        raise NotSquare("matrix file is empty")
    n = len(rows)
    for i, r in enumerate(rows, start=1):
        if len(r) != n:
            raise NotSquare(f"row {i} has {len(r)} entries, expected {n}")
    return np.array(rows, dtype=float)


def load_matrix_csv(path, kind="adjacency"):
    """Load a headerless square CSV as an adjacency or correlation matrix."""
    if kind not in MATRIX_KINDS:
        raise ValidationError(f"kind must be one of {MATRIX_KINDS}, got {kind!r}")
    m = _read_csv(path)
    if kind == "correlation":
        return CorrelationMatrix(m)
    if not np.isin(m, (0.0, 1.0)).all():
        raise BadEntry("adjacency entries must be 0 or 1")
    asym = float(np.abs(m - m.T).max())
    if asym > 0:
        raise NotSymmetric(asym)
    if np.any(np.diag(m)):
        raise SelfLoop(f"self-loop at vertex {int(np.flatnonzero(np.diag(m))[0])}")
    return AdjacencyMatrix(m.astype(np.int8))


def write_matrix_csv(path, M):
    """Write a matrix as headerless CSV; floats use ``repr`` so they round-trip."""
    if isinstance(M, AdjacencyMatrix):
        vals, fmt = M.entries, str
    elif isinstance(M, CorrelationMatrix):
        vals, fmt = M.values, repr
    else:
        vals, fmt = np.asarray(M), repr
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in vals.tolist():
            w.writerow([fmt(x) for x in row])


def threshold_correlation(C: CorrelationMatrix, tau: float, absolute=False) -> AdjacencyMatrix:
    """Edge between ``u != v`` iff ``C[u, v] >= tau``.

    The comparison is on the signed correlation unless ``absolute`` is set.
    """
    if not 0.0 < tau <= 1.0:
        raise ValidationError(f"tau must lie in (0, 1], got {tau}")
    vals = np.abs(C.values) if absolute else C.values
    a = (vals >= tau).astype(np.int8)
    np.fill_diagonal(a, 0)
    return AdjacencyMatrix(a)


def load_graph(path, fmt, tau=None, absolute=False) -> AdjacencyMatrix:
    """Load a graph in one of the CLI formats: ``edge``, ``adj`` or ``corr``
    (the last thresholded at ``tau``)."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    if fmt == "edge":
        return load_edge_list(path)
    if fmt == "adj":
        return load_matrix_csv(path, "adjacency")
    if fmt == "corr":
        if tau is None:
            raise ValidationError("--tau is required for correlation input")
        return threshold_correlation(load_matrix_csv(path, "correlation"), tau, absolute)
    raise ValidationError(f"unknown format {fmt!r}")
