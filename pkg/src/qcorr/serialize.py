"""Canonical JSON for every core type.

Complex numbers are ``[re, im]`` pairs. Generator arrays nest in the order
``k, l, i, j, s, t`` and correlation tensors in ``k, k', l, l', i, j, i', j', s,
t, s', t'``, each leaf being a ``d x d`` matrix (generators) or a scalar pair
(tensors). Output uses compact separators and Python's shortest round-trip float
repr, so serialize -> parse -> serialize is byte-identical.
"""
from __future__ import annotations

import dataclasses
import json
from typing import Any

import numpy as np

from .correlation import ClassicalTable, CorrelationTensor, Realization
from .cpmap import BlockLinearMap
from .errors import DomainError
from .qfamily import POVMFamily, QuantumFamily
from .qspace import AlgebraElement, FiniteQuantumSpace, StateFunctional


class ParseError(DomainError):
    """Input text is not valid JSON or does not match the expected schema.

    ``offset`` is the byte offset of a syntax error; ``path`` names the offending
    field for schema errors.
    """

    def __init__(self, message, offset: int | None = None, path: str | None = None):
        where = []
        if offset is not None:
            where.append(f"byte {offset}")
        if path is not None:
            where.append(f"at {path}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.offset = offset
        self.path = path


# encoding

def encode_complex(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def encode_space(s: FiniteQuantumSpace) -> dict:
    return {"blocks": list(s.blocks)}


def encode_element(x: AlgebraElement) -> dict:
    return {"space": encode_space(x.space), "mats": [encode_complex(m) for m in x.mats]}


def encode_state(w: StateFunctional) -> dict:
    return {"space": encode_space(w.space), "density": [encode_complex(m) for m in w.density.mats]}


def encode_map(m: BlockLinearMap) -> dict:
    images = []
    for k, n in enumerate(m.dom.blocks):
        blocks = [b[m.dom.block_slice(k)].reshape(n, n, *b.shape[1:]) for b in m.block_images()]
        images.append([[[encode_complex(b[i, j]) for b in blocks] for j in range(n)]
                       for i in range(n)])
    return {"dom": encode_space(m.dom), "cod": encode_space(m.cod), "images": images}


def _gens_nested(F: QuantumFamily) -> list:
    out = []
    for k, n in enumerate(F.O.blocks):
        row = []
        for l, m in enumerate(F.P.blocks):
            g = F.gens[F.O.block_slice(k), F.P.block_slice(l)]
            row.append(encode_complex(g.reshape(n, n, m, m, F.d, F.d)))
        out.append(row)
    return out


def encode_family(F: QuantumFamily) -> dict:
    return {"P": encode_space(F.P), "O": encode_space(F.O), "d": F.d, "gens": _gens_nested(F)}


def encode_correlation(T: CorrelationTensor) -> dict:
    O, P = T.O, T.P
    out = []
    for k, n in enumerate(O.blocks):
        r1 = []
        for kp, n2 in enumerate(O.blocks):
            r2 = []
            for l, m in enumerate(P.blocks):
                r3 = []
                for lp, m2 in enumerate(P.blocks):
                    x = T.X[O.block_slice(k), O.block_slice(kp), P.block_slice(l), P.block_slice(lp)]
                    r3.append(encode_complex(x.reshape(n, n, n2, n2, m, m, m2, m2)))
                r2.append(r3)
            r1.append(r2)
        out.append(r1)
    return {"P": encode_space(P), "O": encode_space(O), "X": out}


def encode_realization(R: Realization) -> dict:
    doc = {"phi1": encode_family(R.phi1), "phi2": encode_family(R.phi2)}
    if R.xi is not None:
        doc["xi"] = encode_complex(R.xi)
    else:
        doc["density"] = encode_complex(R.density)
    return doc


def encode_table(t: ClassicalTable) -> dict:
    return {"p": t.p.tolist(), "left_marginal": t.left_marginal.tolist(),
            "right_marginal": t.right_marginal.tolist(), "min_entry": t.min_entry,
            "normalization_defect": t.normalization_defect,
            "signalling_defect": t.signalling_defect}


def plain(obj: Any) -> Any:
    """Reports and numpy scalars to JSON-ready Python values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def to_json(obj) -> dict:
    if isinstance(obj, FiniteQuantumSpace):
        return encode_space(obj)
    if isinstance(obj, AlgebraElement):
        return encode_element(obj)
    if isinstance(obj, StateFunctional):
        return encode_state(obj)
    if isinstance(obj, BlockLinearMap):
        return encode_map(obj)
    if isinstance(obj, QuantumFamily):
        return encode_family(obj)
    if isinstance(obj, CorrelationTensor):
        return encode_correlation(obj)
    if isinstance(obj, Realization):
        return encode_realization(obj)
    if isinstance(obj, ClassicalTable):
        return encode_table(obj)
    return plain(obj)


def dumps(obj) -> str:
    return json.dumps(to_json(obj), separators=(",", ":"), allow_nan=False)


# decoding

def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def _finite_float(text: str) -> float:
    x = float(text)
    if not np.isfinite(x):
        raise ValueError(f"number {text} overflows a 64-bit float")
    return x


def parse_text(text: str | bytes) -> Any:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("input is not UTF-8", offset=exc.start) from exc
    try:
        return json.loads(text, parse_constant=_reject_constant, parse_float=_finite_float)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ParseError(f"invalid JSON: {exc.msg}", offset=offset) from exc
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _field(doc, name: str, path: str):
    if not isinstance(doc, dict):
        raise ParseError("expected an object", path=path)
    if name not in doc:
        raise ParseError(f"missing field '{name}'", path=path)
    return doc[name]


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_shape(obj, shape: tuple, path: str):
    if not shape:
        if not (isinstance(obj, list) and len(obj) == 2 and all(_is_number(v) for v in obj)):
            raise ParseError("expected a complex number [re, im]", path=path)
        return
    if not isinstance(obj, list) or len(obj) != shape[0]:
        got = f"length {len(obj)}" if isinstance(obj, list) else type(obj).__name__
        raise ParseError(f"expected an array of length {shape[0]}, got {got}", path=path)
    for i, item in enumerate(obj):
        _check_shape(item, shape[1:], f"{path}[{i}]")


def decode_complex(obj, shape: tuple, path: str) -> np.ndarray:
    _check_shape(obj, tuple(shape), path)
    pairs = np.asarray(obj, dtype=float).reshape(*shape, 2)
    out = np.empty(shape, dtype=complex)
    # assigning parts keeps signed zeros, which re + 1j*im would not
    out.real = pairs[..., 0]
    out.imag = pairs[..., 1]
    return out


def decode_space(doc, path: str = "$") -> FiniteQuantumSpace:
    blocks = _field(doc, "blocks", path)
    if not isinstance(blocks, list) or not blocks:
        raise ParseError("blocks must be a non-empty array", path=f"{path}.blocks")
    for i, b in enumerate(blocks):
        if not isinstance(b, int) or isinstance(b, bool) or b < 1:
            raise ParseError("block sizes must be positive integers", path=f"{path}.blocks[{i}]")
    return FiniteQuantumSpace(tuple(blocks))


def _decode_int(doc, name: str, path: str) -> int:
    v = _field(doc, name, path)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ParseError(f"{name} must be a positive integer", path=f"{path}.{name}")
    return v


def _decode_mats(obj, space: FiniteQuantumSpace, path: str) -> tuple:
    if not isinstance(obj, list) or len(obj) != space.n_blocks:
        raise ParseError(f"expected {space.n_blocks} blocks", path=path)
    return tuple(decode_complex(m, (n, n), f"{path}[{k}]") for k, (m, n) in enumerate(zip(obj, space.blocks)))


def decode_element(doc, path: str = "$") -> AlgebraElement:
    space = decode_space(_field(doc, "space", path), f"{path}.space")
    return AlgebraElement(space, _decode_mats(_field(doc, "mats", path), space, f"{path}.mats"))


def decode_state(doc, path: str = "$") -> StateFunctional:
    space = decode_space(_field(doc, "space", path), f"{path}.space")
    mats = _decode_mats(_field(doc, "density", path), space, f"{path}.density")
    return StateFunctional(space, AlgebraElement(space, mats))


def decode_map(doc, path: str = "$") -> BlockLinearMap:
    dom = decode_space(_field(doc, "dom", path), f"{path}.dom")
    cod = decode_space(_field(doc, "cod", path), f"{path}.cod")
    images = _field(doc, "images", path)
    p = f"{path}.images"
    if not isinstance(images, list) or len(images) != dom.n_blocks:
        raise ParseError(f"expected images for {dom.n_blocks} blocks", path=p)
    cols = []
    for k, n in enumerate(dom.blocks):
        if not isinstance(images[k], list) or len(images[k]) != n:
            raise ParseError(f"expected {n} rows", path=f"{p}[{k}]")
        for i in range(n):
            row = images[k][i]
            if not isinstance(row, list) or len(row) != n:
                raise ParseError(f"expected {n} entries", path=f"{p}[{k}][{i}]")
            for j in range(n):
                mats = _decode_mats(row[j], cod, f"{p}[{k}][{i}][{j}]")
                cols.append(cod.from_blocks(mats))
    return BlockLinearMap(dom, cod, np.stack(cols, axis=1))


def decode_family(doc, path: str = "$", cls=QuantumFamily) -> QuantumFamily:
    P = decode_space(_field(doc, "P", path), f"{path}.P")
    O = decode_space(_field(doc, "O", path), f"{path}.O")
    d = _decode_int(doc, "d", path)
    nested = _field(doc, "gens", path)
    p = f"{path}.gens"
    if not isinstance(nested, list) or len(nested) != O.n_blocks:
        raise ParseError(f"expected {O.n_blocks} O-blocks", path=p)
    gens = np.zeros((O.algebra_dim, P.algebra_dim, d, d), dtype=complex)
    for k, n in enumerate(O.blocks):
        if not isinstance(nested[k], list) or len(nested[k]) != P.n_blocks:
            raise ParseError(f"expected {P.n_blocks} P-blocks", path=f"{p}[{k}]")
        for l, m in enumerate(P.blocks):
            g = decode_complex(nested[k][l], (n, n, m, m, d, d), f"{p}[{k}][{l}]")
            gens[O.block_slice(k), P.block_slice(l)] = g.reshape(n * n, m * m, d, d)
    return cls(P, O, d, gens)


def decode_correlation(doc, path: str = "$") -> CorrelationTensor:
    P = decode_space(_field(doc, "P", path), f"{path}.P")
    O = decode_space(_field(doc, "O", path), f"{path}.O")
    nested = _field(doc, "X", path)
    p = f"{path}.X"
    X = np.zeros((O.algebra_dim, O.algebra_dim, P.algebra_dim, P.algebra_dim), dtype=complex)

    def need(obj, count, where):
        if not isinstance(obj, list) or len(obj) != count:
            raise ParseError(f"expected an array of length {count}", path=where)

    need(nested, O.n_blocks, p)
    for k, n in enumerate(O.blocks):
        need(nested[k], O.n_blocks, f"{p}[{k}]")
        for kp, n2 in enumerate(O.blocks):
            need(nested[k][kp], P.n_blocks, f"{p}[{k}][{kp}]")
            for l, m in enumerate(P.blocks):
                need(nested[k][kp][l], P.n_blocks, f"{p}[{k}][{kp}][{l}]")
                for lp, m2 in enumerate(P.blocks):
                    x = decode_complex(nested[k][kp][l][lp], (n, n, n2, n2, m, m, m2, m2),
                                       f"{p}[{k}][{kp}][{l}][{lp}]")
                    X[O.block_slice(k), O.block_slice(kp), P.block_slice(l), P.block_slice(lp)] = \
                        x.reshape(n * n, n2 * n2, m * m, m2 * m2)
    return CorrelationTensor(P, O, X)


def decode_realization(doc, path: str = "$", tol: float | None = None) -> Realization:
    phi1 = decode_family(_field(doc, "phi1", path), f"{path}.phi1")
    phi2 = decode_family(_field(doc, "phi2", path), f"{path}.phi2")
    d = phi1.d
    if tol is None:
        tol = doc.get("tol", 1e-9)
        if not _is_number(tol) or tol <= 0:
            raise ParseError("tol must be a positive number", path=f"{path}.tol")
    has_xi, has_rho = "xi" in doc, "density" in doc
    if has_xi == has_rho:
        raise ParseError("give exactly one of 'xi' and 'density'", path=path)
    if has_xi:
        xi = decode_complex(doc["xi"], (d,), f"{path}.xi")
        return Realization(phi1, phi2, xi=xi, tol=tol, strict=False)
    rho = decode_complex(doc["density"], (d, d), f"{path}.density")
    return Realization(phi1, phi2, density=rho, tol=tol, strict=False)


_DECODERS = {
    "space": decode_space,
    "element": decode_element,
    "state": decode_state,
    "map": decode_map,
    "family": decode_family,
    "povm": lambda doc, path="$": decode_family(doc, path, POVMFamily),
    "correlation": decode_correlation,
    "realization": decode_realization,
}


def detect_kind(doc) -> str:
    if not isinstance(doc, dict):
        raise ParseError("expected an object", path="$")
    keys = set(doc)
    for kind, need in (("realization", {"phi1", "phi2"}), ("family", {"gens"}),
                       ("correlation", {"X"}), ("map", {"images"}), ("state", {"density", "space"}),
                       ("element", {"mats"}), ("space", {"blocks"})):
        if need <= keys:
            return kind
    raise ParseError("cannot tell which kind of object this is", path="$")


def from_json(doc, kind: str | None = None):
    kind = kind or detect_kind(doc)
    if kind not in _DECODERS:
        raise DomainError(f"unknown kind {kind!r}")
    return _DECODERS[kind](doc)


def loads(text: str | bytes, kind: str | None = None):
    return from_json(parse_text(text), kind)
