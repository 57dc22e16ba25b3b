"""Command-line front end.

Every command reads JSON inputs, runs one construction or check and writes a
single JSON document. Exit codes: 0 when every check passes, 1 when a
mathematical verdict is negative, 2 for malformed or out-of-domain input, 3 when
two internal computations of the same quantity disagree.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ._linalg import DEFAULT_TOL
from .correlation import (classical_table, correlation_from_realization, correlation_from_trace,
                          is_nonsignalling, is_synchronous)
from .cpmap import is_ucp
from .errors import (DomainError, InternalConsistencyError, PreconditionError, RankError,
                     UnsupportedInputError)
from .qfamily import (POVMFamily, pisier_decompose, random_family, random_povm_family,
                      validate_family, validate_povm)
from .serialize import (ParseError, decode_correlation, decode_family, decode_map,
                        decode_realization, dumps, from_json, parse_text, plain)
from .sync_analysis import analyze_synchronous_realization, gns_realization_from_trace

COMMANDS = ("validate-family", "validate-povm", "build-correlation", "check-correlation",
            "from-trace", "gns-realize", "analyze-sync", "pisier", "random-family",
            "classical-table")

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3
U64 = 2 ** 64


@dataclass
class JobSpec:
    command: str
    inputs: list[str] = field(default_factory=list)
    tol: float | None = None
    seed: int | None = None
    output: str | None = None
    table: bool = False
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        if self.tol is not None and not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if self.seed is not None and not 0 <= self.seed < U64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        need = 0 if self.command == "random-family" else 1
        if len(self.inputs) < need:
            raise DomainError(f"{self.command} needs an input file")


def _read(path: str):
    try:
        data = Path(path).read_bytes() if path != "-" else sys.stdin.buffer.read()
    except OSError as exc:
        raise DomainError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_text(data)


def _blocks(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    text = str(text).strip()
    if text.startswith("["):
        return [int(x) for x in json.loads(text)]
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise DomainError(f"block list must be comma-separated integers, got {text!r}") from exc


def _status(ok: bool) -> tuple[int, str]:
    return (EXIT_PASS, "pass") if ok else (EXIT_FAIL, "fail")


def _label_worst(worst: dict) -> dict:
    out = {}
    for key, val in worst.items():
        if key in ("adjoint",) and val is not None:
            (k, i, j), (l, s, t) = val
            out[key] = {"k": k, "i": i, "j": j, "l": l, "s": s, "t": t}
        elif key == "unitality" and val is not None:
            l, s, t = val
            out[key] = {"l": l, "s": s, "t": t}
        else:
            out[key] = plain(val)
    return out


def _check_correlation(T, tol: float, require_sync: bool) -> tuple[int, dict]:
    ucp = is_ucp(T.as_map(), tol)
    ns = is_nonsignalling(T, tol)
    sync = is_synchronous(T, tol)
    herm = T.hermiticity_residual()
    ok = ucp.ok and ns.ok and herm <= tol and (sync.ok or not require_sync)
    code, status = _status(ok)
    return code, {
        "status": status,
        "completely_positive": ucp.completely_positive,
        "unital": ucp.unital,
        "min_choi_eigenvalue": ucp.min_eigenvalue,
        "unitality_defect": ucp.unitality_defect,
        "hermiticity_residual": herm,
        "nonsignalling": ns.ok,
        "nonsignalling_residual": ns.residual,
        "nonsignalling_left_residual": ns.left_residual,
        "nonsignalling_right_residual": ns.right_residual,
        "synchronous": sync.ok,
        "sync_sum": sync.sync_sum,
        "sync_defect": sync.sync_defect,
        "sync_imaginary_part": sync.imaginary_part,
        "sync_partial_sums": sync.partial_sums,
        "sync_min_diagonal": sync.min_diagonal,
        "entangled_sync_value": plain(sync.entangled_value),
    }


def _execute(job: JobSpec) -> tuple[int, Any]:
    tol = DEFAULT_TOL if job.tol is None else job.tol
    cmd = job.command
    opts = job.options

    if cmd == "random-family":
        for key in ("P", "O", "d"):
            if opts.get(key) is None:
                raise DomainError(f"random-family needs --{key}")
        P, O, d = _blocks(opts["P"]), _blocks(opts["O"]), int(opts["d"])
        make = random_povm_family if opts.get("povm") else random_family
        return EXIT_PASS, make(P, O, d, job.seed)

    doc = _read(job.inputs[0])
    if cmd == "validate-family":
        rep = validate_family(decode_family(doc), tol)
        code, status = _status(rep.ok)
        body = plain(rep)
        body["worst"] = _label_worst(rep.worst)
        return code, {"status": status, **body}
    if cmd == "validate-povm":
        rep = validate_povm(decode_family(doc, cls=POVMFamily), tol)
        code, status = _status(rep.ok)
        body = plain(rep)
        body["worst"] = _label_worst(rep.worst)
        return code, {"status": status, **body}
    if cmd == "build-correlation":
        return EXIT_PASS, correlation_from_realization(decode_realization(doc, tol=tol), tol)
    if cmd == "check-correlation":
        return _check_correlation(decode_correlation(doc), tol, not opts.get("allow_nonsync"))
    if cmd == "from-trace":
        tau = None
        if opts.get("tau"):
            tau = from_json(_read(opts["tau"]), "state")
        return EXIT_PASS, correlation_from_trace(decode_family(doc), tau, tol)
    if cmd == "gns-realize":
        return EXIT_PASS, gns_realization_from_trace(decode_family(doc), tol)
    if cmd == "analyze-sync":
        rep = analyze_synchronous_realization(decode_realization(doc, tol=tol), tol)
        code, status = _status(rep.ok)
        return code, {"status": status, **rep.to_dict()}
    if cmd == "pisier":
        dec = pisier_decompose(decode_map(doc), tol)
        ok = dec.multiplicativity_residual <= tol
        code, status = _status(ok)
        return code, {"status": status, "n": dec.n, "C": {"blocks": list(dec.C.blocks)},
                      "dim_D": dec.dim, "commutant_block_dims": list(dec.block_dims),
                      "dimension_identity": dec.n ** 2 * dec.dim == dec.C.algebra_dim,
                      "gamma_min_singular_value": dec.gamma_singular_min,
                      "multiplicativity_residual": dec.multiplicativity_residual}
    if cmd == "classical-table":
        T = decode_correlation(doc)
        tab = classical_table(T)
        ok = tab.is_valid(tol) and tab.signalling_defect <= tol
        code, _ = _status(ok)
        if opts.get("csv"):
            return code, tab.to_csv()
        return code, {"status": "pass" if ok else "fail", **plain(tab.__dict__)}
    raise DomainError(f"unknown command {cmd!r}")


def run(job: JobSpec) -> tuple[int, Any]:
    """Run one job; returns the exit code and the document to emit."""
    try:
        return _execute(job)
    except ParseError as exc:
        return EXIT_INPUT, {"status": "error", "error": "parse", "message": str(exc),
                            "offset": exc.offset, "path": exc.path}
    except PreconditionError as exc:
        return EXIT_FAIL, {"status": "fail", "error": "precondition", "message": str(exc),
                           "residual": plain(exc.residual), "witness": plain(exc.witness)}
    except RankError as exc:
        return EXIT_FAIL, {"status": "fail", "error": "rank", "message": str(exc),
                           "singular_values": plain(exc.singular_values)}
    except InternalConsistencyError as exc:
        return EXIT_INTERNAL, {"status": "error", "error": "internal", "message": str(exc)}
    except (DomainError, UnsupportedInputError) as exc:
        kind = "unsatisfiable" if type(exc).__name__ == "UnsatisfiableError" else "domain"
        if isinstance(exc, UnsupportedInputError):
            kind = "unsupported"
        return EXIT_INPUT, {"status": "error", "error": kind, "message": str(exc)}


def render(doc: Any, table: bool = False) -> str:
    if isinstance(doc, str):
        return doc
    if not isinstance(doc, dict):
        return dumps(doc) + "\n"
    if table:
        rows = []

        def walk(prefix, val):
            if isinstance(val, dict):
                for k, v in val.items():
                    walk(f"{prefix}.{k}" if prefix else k, v)
            else:
                rows.append((prefix, json.dumps(val) if isinstance(val, (list, type(None))) else str(val)))

        walk("", doc)
        width = max((len(k) for k, _ in rows), default=0)
        return "".join(f"{k.ljust(width)}  {v}\n" for k, v in rows)
    return json.dumps(plain(doc), indent=2, allow_nan=False) + "\n"


def _emit(text: str, output: str | None):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _run_batch(path: str, tol, seed, table: bool) -> int:
    try:
        doc = _read(path)
        items = doc.get("jobs") if isinstance(doc, dict) else doc
        if not isinstance(items, list):
            raise ParseError("batch file must be a list of jobs or {\"jobs\": [...]}", path="$")
        jobs = []
        for n, item in enumerate(items):
            if not isinstance(item, dict) or "command" not in item:
                raise ParseError("each job needs a 'command'", path=f"$.jobs[{n}]")
            jobs.append(JobSpec(command=item["command"], inputs=list(item.get("inputs", [])),
                                tol=item.get("tol", tol), seed=item.get("seed", seed),
                                output=item.get("output"), table=item.get("table", table),
                                options=dict(item.get("options", {}))))
    except DomainError as exc:
        _emit(render({"status": "error", "message": str(exc)}, table), None)
        return EXIT_INPUT
    with ThreadPoolExecutor() as pool:
        results = list(pool.map(run, jobs))
    summary = []
    for job, (code, out) in zip(jobs, results):
        if job.output:
            _emit(render(out, job.table), job.output)
            summary.append({"command": job.command, "exit_code": code, "output": job.output})
        else:
            summary.append({"command": job.command, "exit_code": code,
                            "report": json.loads(dumps(out)) if not isinstance(out, (dict, str)) else out})
    _emit(render({"jobs": summary}, table), None)
    return max((c for c, _ in results), default=EXIT_PASS)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="absolute tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    common.add_argument("--out", default=None, help="write the document here instead of stdout")
    common.add_argument("--table", action="store_true", help="aligned text instead of JSON")

    parser = argparse.ArgumentParser(prog="qcorr", description="Quantum correlations on finite quantum spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("validate-family", "check the homomorphism relations of a family"),
                        ("validate-povm", "check unital complete positivity of a family"),
                        ("build-correlation", "correlation of a realization"),
                        ("check-correlation", "positivity, non-signalling and synchronicity"),
                        ("from-trace", "correlation induced by a trace on M_d"),
                        ("gns-realize", "vectorized realization of the normalized-trace correlation"),
                        ("analyze-sync", "synchronous analysis of a realization"),
                        ("pisier", "relative commutant decomposition of a map from M_n"),
                        ("classical-table", "probability table of a classical correlation")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("input", help="JSON input file, '-' for stdin")
        if name == "from-trace":
            p.add_argument("--tau", default=None, help="JSON state on M_d (default Tr/d)")
        if name == "check-correlation":
            p.add_argument("--allow-nonsync", action="store_true",
                           help="do not fail on non-synchronous correlations")
        if name == "classical-table":
            p.add_argument("--csv", action="store_true", help="emit CSV with header k,k',l,l',p")
    p = sub.add_parser("random-family", parents=[common], help="seeded random family")
    p.add_argument("--P", required=True, help="block sizes of P, e.g. 2,1")
    p.add_argument("--O", required=True, help="block sizes of O")
    p.add_argument("--d", required=True, type=int)
    p.add_argument("--povm", action="store_true", help="compress to a u.c.p. family")
    p = sub.add_parser("batch", parents=[common], help="run a JSON list of jobs")
    p.add_argument("input")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    if args.command == "batch":
        return _run_batch(args.input, args.tol, args.seed, args.table)
    opts = {k: getattr(args, k) for k in ("P", "O", "d", "povm", "tau", "allow_nonsync", "csv")
            if hasattr(args, k)}
    try:
        job = JobSpec(args.command, [args.input] if hasattr(args, "input") else [],
                      args.tol, args.seed, args.out, args.table, opts)
    except DomainError as exc:
        _emit(render({"status": "error", "error": "domain", "message": str(exc)}, args.table), None)
        return EXIT_INPUT
    code, doc = run(job)
    _emit(render(doc, args.table), args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
