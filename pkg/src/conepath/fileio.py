"""Plain-text problem files and JSON solution files.

The problem format stores dimensions, the cone list, sparse triplets
for P (upper triangle) and A, and dense q, b.  Floats are written with
repr so that write-then-read reproduces the numeric data bit-exactly.
Solution files are JSON and carry a hash of the canonical problem text
for provenance plus the dimensions for hard validation.
"""

import hashlib
import json

import numpy as np
import scipy.sparse as sp

from .cones import ConeKind, ConeProduct, ConeSpec, order_of_packed
from .errors import ParseError, Unsupported
from .ipm import ConicProblem

_MAGIC = "conepath-problem 1"
_SOL_MAGIC = "conepath-solution 1"

_KIND_ARITY = {
    ConeKind.ZERO: "zero",
    ConeKind.NONNEGATIVE: "nonneg",
    ConeKind.SECOND_ORDER: "soc",
    ConeKind.PSD_TRIANGLE: "psd",
    ConeKind.EXPONENTIAL: "exp",
    ConeKind.POWER: "pow",
}


def _cone_line(spec):
    if spec.kind is ConeKind.POWER:
        return f"cone pow {spec.dim} {float(spec.alpha)!r}"
    return f"cone {_KIND_ARITY[spec.kind]} {spec.dim}"


def _parse_cone(parts, lineno):
    if len(parts) < 3:
        raise ParseError("cone line needs a kind and a dimension", line=lineno)
    kind, dim_s = parts[1], parts[2]
    try:
        dim = int(dim_s)
    except ValueError:
        raise ParseError(f"bad cone dimension {dim_s!r}", line=lineno)
    try:
        if kind == "zero":
            return ConeSpec.zero(dim)
        if kind == "nonneg":
            return ConeSpec.nonnegative(dim)
        if kind == "soc":
            return ConeSpec.second_order(dim)
        if kind == "psd":
            return ConeSpec.psd_triangle(order_of_packed(dim))
        if kind == "exp":
            if dim != 3:
                raise Unsupported("exponential cone blocks have dimension 3")
            return ConeSpec.exponential()
        if kind == "pow":
            if len(parts) < 4:
                raise ParseError("power cone line needs an exponent", line=lineno)
            if dim != 3:
                raise Unsupported("power cone blocks have dimension 3")
            return ConeSpec.power(float(parts[3]))
    except (Unsupported, ValueError) as exc:
        raise ParseError(str(exc), line=lineno)
    raise ParseError(f"unknown cone kind {kind!r}", line=lineno)


def problem_text(problem):
    """Canonical serialization; also the hashing preimage."""
    out = [_MAGIC, f"n {problem.n}", f"m {problem.m}"]
    out.append(f"cones {len(problem.cones.blocks)}")
    out.extend(_cone_line(spec) for spec in problem.cones.blocks)
    upper = sp.triu(problem.P).tocoo()
    out.append(f"P {upper.nnz}")
    out.extend(
        f"{i} {j} {float(v)!r}" for i, j, v in zip(upper.row, upper.col, upper.data)
    )
    acoo = problem.A.tocoo()
    out.append(f"A {acoo.nnz}")
    out.extend(
        f"{i} {j} {float(v)!r}" for i, j, v in zip(acoo.row, acoo.col, acoo.data)
    )
    out.append("q " + " ".join(repr(float(v)) for v in problem.q))
    out.append("b " + " ".join(repr(float(v)) for v in problem.b))
    return "\n".join(out) + "\n"


def problem_hash(problem):
    return hashlib.sha256(problem_text(problem).encode("utf-8")).hexdigest()


def write_problem(problem, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(problem_text(problem))


def _expect(condition, message, lineno):
    if not condition:
        raise ParseError(message, line=lineno)


def read_problem(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        _expect(pos < len(lines), "unexpected end of file", len(lines))
        pos += 1
        return lines[pos - 1].strip(), pos

    header, ln = next_line()
    _expect(header == _MAGIC, f"expected header {_MAGIC!r}", ln)

    def scalar(tag):
        text, ln = next_line()
        parts = text.split()
        _expect(len(parts) == 2 and parts[0] == tag, f"expected '{tag} <int>'", ln)
        try:
            return int(parts[1])
        except ValueError:
            raise ParseError(f"bad integer {parts[1]!r}", line=ln)

    n = scalar("n")
    m = scalar("m")
    ncones = scalar("cones")
    specs = []
    for _ in range(ncones):
        text, ln = next_line()
        parts = text.split()
        _expect(parts and parts[0] == "cone", "expected a cone line", ln)
        specs.append(_parse_cone(parts, ln))

    def triplets(tag, shape, mirror):
        nnz = scalar(tag)
        M = np.zeros(shape)
        for _ in range(nnz):
            text, ln = next_line()
            parts = text.split()
            _expect(len(parts) == 3, f"expected 'i j value' in {tag} block", ln)
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"bad triplet {text!r}", line=ln)
            _expect(0 <= i < shape[0] and 0 <= j < shape[1],
                    f"triplet ({i},{j}) outside {shape}", ln)
            if mirror:
                _expect(i <= j, "P triplets must be upper-triangular", ln)
            M[i, j] = v
            if mirror and i != j:
                M[j, i] = v
        return sp.csc_matrix(M)

    P = triplets("P", (n, n), mirror=True)
    A = triplets("A", (m, n), mirror=False)

    def vector(tag, size):
        text, ln = next_line()
        parts = text.split()
        _expect(parts and parts[0] == tag, f"expected the {tag} vector", ln)
        _expect(len(parts) == size + 1, f"{tag} needs {size} values", ln)
        try:
            return np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise ParseError(f"bad float in {tag}", line=ln)

    q = vector("q", n)
    b = vector("b", m)
    try:
        return ConicProblem(P=P, q=q, A=A, b=b, cones=ConeProduct(tuple(specs)))
    except Unsupported as exc:
        raise ParseError(str(exc))


def write_solution(path, problem, report, objective, warm=None):
    """JSON solution stamped with dimensions and the problem hash.

    Optimal solutions store the tau-scaled point (reusable as the next
    warm start); other statuses store the raw embedding iterate, whose
    (x, z) acts as the infeasibility certificate.
    """
    scaled = report.status.value == "Optimal"
    if scaled:
        x, s, z = report.solution
    else:
        x, s, z = report.x, report.s, report.z
    doc = {
        "format": _SOL_MAGIC,
        "problem_hash": problem_hash(problem),
        "n": problem.n,
        "m": problem.m,
        "status": report.status.value,
        "objective": objective,
        "iterations": report.iterations,
        "scaled": scaled,
        "x": list(map(float, x)),
        "s": list(map(float, s)),
        "z": list(map(float, z)),
    }
    if warm is not None:
        doc["warmstart"] = {
            "per_block": [
                {"lam": blk.lam, "mu0": blk.mu0, "rule": blk.rule}
                for blk in warm.per_block
            ],
            "fallback_blocks": list(warm.fallback_blocks),
        }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_solution(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}")
    if doc.get("format") != _SOL_MAGIC:
        raise ParseError(f"expected format {_SOL_MAGIC!r}")
    for key in ("n", "m", "status", "x", "s", "z"):
        if key not in doc:
            raise ParseError(f"solution file missing {key!r}")
    doc["x"] = np.asarray(doc["x"], dtype=float)
    doc["s"] = np.asarray(doc["s"], dtype=float)
    doc["z"] = np.asarray(doc["z"], dtype=float)
    return doc
