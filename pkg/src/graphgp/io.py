"""File formats: signal CSVs, edge lists, key-value configs and model artifacts.

All numbers are written with 17 significant digits so doubles survive a
write/read round trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FileFormatError, ValidationError
from .gp import CONVENTION, Hyperparameters, TrainingSet
from .graph import Graph
from .kernels import BaselineGraphKernel, InputKernel, PolynomialGraphFilter

FORMAT_VERSION = 1


def fmt(x) -> str:
    return f"{float(x):.17g}"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise FileFormatError(f"cannot write {path}: {exc}") from exc


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FileFormatError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# matrices


def matrix_to_csv(matrix, prefix: str) -> str:
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{prefix}_{j}" for j in range(A.shape[1])])
    for row in A:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_matrix(path, matrix, prefix: str) -> None:
    atomic_write(path, matrix_to_csv(matrix, prefix))


def read_matrix(path, prefix: str | None = None) -> np.ndarray:
    """Read a headed numeric CSV; ``prefix`` checks the header is ``prefix_0, prefix_1, ...``."""
    rows = list(csv.reader(io.StringIO(_read_text(path))))
    rows = [r for r in rows if r]
    if not rows:
        raise FileFormatError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    if prefix is not None and header != [f"{prefix}_{j}" for j in range(len(header))]:
        raise FileFormatError(f"{path}: expected header {prefix}_0..{prefix}_{len(header) - 1}")
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise FileFormatError(f"{path}: non-numeric entry ({exc})") from exc
    if body and any(len(r) != len(header) for r in body):
        raise FileFormatError(f"{path}: ragged rows")
    return data.reshape(len(body), len(header))


def write_signals(path, Y) -> None:
    write_matrix(path, Y, "node")


def read_signals(path) -> np.ndarray:
    return read_matrix(path, "node")


def write_inputs(path, X) -> None:
    write_matrix(path, np.asarray(X, dtype=float).reshape(len(X), -1), "x")


def read_inputs(path) -> np.ndarray:
    return read_matrix(path, "x")


def read_coords(path) -> np.ndarray:
    """One row per node, d columns; an optional non-numeric header line is skipped."""
    rows = [r for r in csv.reader(io.StringIO(_read_text(path))) if r]
    try:
        [float(v) for v in rows[0]]
    except (ValueError, IndexError):
        rows = rows[1:]
    try:
        return np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise FileFormatError(f"{path}: bad coordinate row ({exc})") from exc


# ---------------------------------------------------------------------------
# edge lists


def edge_list_text(graph: Graph) -> str:
    lines = [f"nodes {graph.num_nodes}"]
    lines += [f"{i} {j} {fmt(w)}" for i, j, w in graph.edges()]
    return "\n".join(lines) + "\n"


def write_edge_list(path, graph: Graph) -> None:
    atomic_write(path, edge_list_text(graph))


def parse_edge_list(text: str, source: str = "<edge list>") -> Graph:
    """``nodes M`` on the first non-comment line, then ``u v w`` lines (0-based ids)."""
    M, W = None, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if M is None:
            if len(parts) != 2 or parts[0] != "nodes":
                raise FileFormatError(f"{source}:{lineno}: expected 'nodes M'")
            try:
                M = int(parts[1])
            except ValueError as exc:
                raise FileFormatError(f"{source}:{lineno}: bad node count") from exc
            W = np.zeros((M, M))
            continue
        if len(parts) != 3:
            raise FileFormatError(f"{source}:{lineno}: expected 'u v w'")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise FileFormatError(f"{source}:{lineno}: bad edge {line!r}") from exc
        if not (0 <= u < M and 0 <= v < M) or u == v:
            raise FileFormatError(f"{source}:{lineno}: invalid node ids {u}, {v}")
        W[u, v] = W[v, u] = w
    if M is None:
        raise FileFormatError(f"{source}: missing 'nodes M' line")
    try:
        return Graph(W)
    except ValidationError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc


def read_edge_list(path) -> Graph:
    return parse_edge_list(_read_text(path), str(path))


# ---------------------------------------------------------------------------
# key-value files


def parse_keyvalue(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` (or ``key value``) lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = (s.strip() for s in line.split("=", 1))
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise FileFormatError(f"{source}:{lineno}: expected 'key = value'")
            key, value = parts
        out[key.replace("-", "_")] = value
    return out


def read_keyvalue(path) -> dict:
    return parse_keyvalue(_read_text(path), str(path))


def keyvalue_text(items: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items.items())


# ---------------------------------------------------------------------------
# model artifacts


@dataclass(frozen=True, eq=False)
class ModelArtifact:
    """A fitted model: hyperparameters, the training set it conditions on, and the graph it belongs to."""

    hyperparameters: Hyperparameters
    training: TrainingSet = field(repr=False)
    graph_fingerprint: str
    convention: str = CONVENTION
    version: int = FORMAT_VERSION
    info: dict = field(default_factory=dict)

    def check_graph(self, graph: Graph) -> None:
        if graph.fingerprint() != self.graph_fingerprint:
            raise ValidationError("graph does not match the one the model was fitted on")


def _kernel_to_dict(h: Hyperparameters) -> dict:
    if h.is_polynomial:
        out = {"type": "polynomial", "beta": [float(b) for b in h.output.coefficients]}
    else:
        out = {"type": "baseline", "kind": h.output.kind, "alpha": float(h.output.alpha),
               "p": int(h.output.p)}
    return out


def artifact_to_json(a: ModelArtifact) -> str:
    h = a.hyperparameters
    inp = {"kind": h.input.kind, "lengthscale": float(h.input.lengthscale),
           "variance": float(h.input.variance)}
    if h.input.matrix is not None:
        inp["matrix"] = h.input.matrix.tolist()
    doc = {
        "format_version": a.version,
        "convention": a.convention,
        "graph_fingerprint": a.graph_fingerprint,
        "kernel": _kernel_to_dict(h),
        "input_kernel": inp,
        "noise": float(h.noise),
        "training": {"X": a.training.X.tolist(), "Y": a.training.Y.tolist()},
        "info": a.info,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def artifact_from_json(text: str, source: str = "<model>") -> ModelArtifact:
    try:
        doc = json.loads(text)
        version = int(doc["format_version"])
        if version != FORMAT_VERSION:
            raise FileFormatError(f"{source}: unsupported model format version {version}")
        if doc["convention"] != CONVENTION:
            raise FileFormatError(f"{source}: unsupported vectorization {doc['convention']!r}")
        k = doc["kernel"]
        if k["type"] == "polynomial":
            output = PolynomialGraphFilter(k["beta"])
        else:
            output = BaselineGraphKernel(k["kind"], k["alpha"], k["p"])
        i = doc["input_kernel"]
        matrix = np.array(i["matrix"]) if "matrix" in i else None
        inp = InputKernel(i["kind"], i["lengthscale"], i["variance"], matrix)
        h = Hyperparameters(output, inp, doc["noise"])
        t = doc["training"]
        training = TrainingSet(np.array(t["X"], dtype=float), np.array(t["Y"], dtype=float))
        return ModelArtifact(h, training, doc["graph_fingerprint"], doc["convention"], version,
                             doc.get("info", {}))
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise FileFormatError(f"{source}: malformed model artifact ({exc})") from exc


def save_model(path, artifact: ModelArtifact) -> None:
    atomic_write(path, artifact_to_json(artifact))


def load_model(path) -> ModelArtifact:
    return artifact_from_json(_read_text(path), str(path))
