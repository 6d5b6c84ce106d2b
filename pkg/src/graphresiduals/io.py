"""Graph and attribute persistence.

Two interchange formats:

* edge-list text: one "u v" pair per line (optionally "u v w" when the
  graph is weighted), whitespace-separated, 0-based ids, '#' comments.
  The writer emits structured header comments ("# vertices N",
  "# directed true|false") so a round trip preserves the vertex count and
  directedness exactly; the reader falls back to max-id+1 when absent.
* Matrix Market coordinate format (1-based), pattern for 0/1 graphs and
  real for weighted ones, symmetric storage for undirected graphs.

The attribute sidecar is CSV with header "vertex,category,x1..xd".
"""

from __future__ import annotations

import csv

import numpy as np
import scipy.io as spio
import scipy.sparse as sp

from graphresiduals.graph import Graph, GraphError, VertexAttributes


class ParseError(ValueError):
    """Malformed input file; carries the offending line number when known."""


def save_edge_list(g: Graph, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# vertices {g.n}\n")
        fh.write(f"# directed {'true' if g.directed else 'false'}\n")
        if g.weights is None:
            for u, v in g.edges:
                fh.write(f"{u} {v}\n")
        else:
            for (u, v), w in zip(g.edges, g.weights):
                fh.write(f"{u} {v} {w!r}\n")


def load_edge_list(path, n: int | None = None, directed: bool | None = None) -> Graph:
    """Parse an edge-list file; explicit arguments override header comments."""
    header_n = None
    header_directed = None
    edges = []
    weights = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)
            comment = line[1].strip() if len(line) > 1 else ""
            body = line[0].strip()
            tokens = comment.split()
            if len(tokens) == 2 and tokens[0] == "vertices":
                header_n = int(tokens[1])
            elif len(tokens) == 2 and tokens[0] == "directed":
                header_directed = tokens[1] == "true"
            if not body:
                continue
            parts = body.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"{path}:{lineno}: expected 'u v' or 'u v w', got {body!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer vertex id in {body!r}") from None
            edges.append((u, v))
            if len(parts) == 3:
                try:
                    weights.append(float(parts[2]))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric weight in {body!r}") from None
    if weights and len(weights) != len(edges):
        raise ParseError(f"{path}: mixed weighted and unweighted lines")
    if n is None:
        n = header_n
    if n is None:
        n = 1 + max((max(u, v) for u, v in edges), default=-1)
    if directed is None:
        directed = bool(header_directed)
    edge_arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    try:
        return Graph(n, edge_arr, directed=directed, weights=weights or None)
    except GraphError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_matrix_market(g: Graph, path) -> None:
    u, v = g.edges[:, 0], g.edges[:, 1]
    w = g.weights if g.weights is not None else np.ones(len(u))
    if g.directed:
        mat = sp.coo_array((w, (u, v)), shape=(g.n, g.n))
        symmetry = "general"
    else:
        # symmetric MM stores the lower triangle: row >= col
        mat = sp.coo_array((w, (v, u)), shape=(g.n, g.n))
        symmetry = "symmetric"
    field = "pattern" if g.weights is None else "real"
    spio.mmwrite(str(path), mat, field=field, symmetry=symmetry)


def load_matrix_market(path, directed: bool | None = None) -> Graph:
    try:
        mat = spio.mmread(str(path)).tocoo()
    except Exception as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if mat.shape[0] != mat.shape[1]:
        raise ParseError(f"{path}: adjacency matrix must be square, got {mat.shape}")
    with open(path, "r", encoding="ascii") as fh:
        banner = fh.readline().lower()
    if directed is None:
        directed = "symmetric" not in banner
    edges = np.column_stack([mat.row, mat.col]).astype(np.int64)
    weights = None if "pattern" in banner else np.asarray(mat.data, dtype=np.float64)
    return Graph(mat.shape[0], edges, directed=directed, weights=weights)


def save_graph(g: Graph, path, format: str = "edge-list") -> None:
    if format == "edge-list":
        save_edge_list(g, path)
    elif format == "matrix-market":
        save_matrix_market(g, path)
    else:
        raise ValueError(f"unknown graph format {format!r}")


def load_graph(path, format: str = "edge-list", n: int | None = None,
               directed: bool | None = None) -> Graph:
    if format == "edge-list":
        return load_edge_list(path, n=n, directed=directed)
    if format == "matrix-market":
        return load_matrix_market(path, directed=directed)
    raise ValueError(f"unknown graph format {format!r}")


def save_attributes(attrs: VertexAttributes, path) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", "category"] + [f"x{j + 1}" for j in range(attrs.d)])
        for i in range(attrs.n):
            writer.writerow([i, int(attrs.category[i])] + [repr(val) for val in attrs.x[i]])


def load_attributes(path) -> VertexAttributes:
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}:1: empty attribute file") from None
        if header[:2] != ["vertex", "category"]:
            raise ParseError(f"{path}:1: expected header 'vertex,category,x1..xd'")
        d = len(header) - 2
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise ParseError(f"{path}:{lineno}: expected {d + 2} fields, got {len(row)}")
            try:
                rows.append((int(row[0]), int(row[1]), [float(x) for x in row[2:]]))
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
    rows.sort(key=lambda r: r[0])
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ParseError(f"{path}: vertex column must cover 0..n-1 exactly")
    category = np.array([r[1] for r in rows], dtype=np.int64)
    x = np.array([r[2] for r in rows], dtype=np.float64).reshape(len(rows), d)
    return VertexAttributes(x=x, category=category)
