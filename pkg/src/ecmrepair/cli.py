"""Command-line front end: ``ecmrepair <command> INPUT [...]``.

Exit codes: 0 success, 1 I/O or parse error, 2 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

from .complex import (
    AmbiguityUnresolvable,
    ComplexError,
    build_p_complex,
    build_q_complex,
    check_well_composed,
    derive_bp,
    validate_bp,
)
from .criticality import detect_critical, found_classes
from .ecm_grid import ECMError, GridFormatError, build_q_grid, dump_grid
from .homology import betti
from .image_io import ImageFormatError, read_image
from .mesh_export import triangulate_boundary, write_obj
from .repair import InconsistentWrite, repair_grid


class InvariantViolation(RuntimeError):
    pass


@dataclass
class PipelineReport:
    input_path: str
    voxels: int
    cells_q: list[int]
    cells_p: list[int]
    critical_count: int
    critical_classes_found: list[int]
    betti_q: list[int]
    betti_p: list[int]
    euler_q: int
    euler_p: int
    e1_violations_q: int
    e2_violations_q: int
    well_composed_p: bool
    bp_element_count: int
    timings_ms: dict[str, float] = field(default_factory=dict)
    violations: list | None = None

    def to_json(self) -> str:
        data = asdict(self)
        if data["violations"] is None:
            del data["violations"]
        return json.dumps(data, indent=2) + "\n"


def _default_threads() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


class _Clock:
    def __init__(self):
        self.times: dict[str, float] = {}
        self._t = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.times[name] = round((now - self._t) * 1000.0, 3)
        self._t = now


def run_pipeline(path: str, fmt: str | None = None, threads: int = 1):
    """Full pipeline on one file.

    Returns ``(report, problems)``; ``problems`` lists invariant failures
    (empty on a clean run).  The report is filled even when problems exist.
    """
    clock = _Clock()
    image = read_image(path, fmt)
    clock.lap("read")
    g_q = build_q_grid(image)
    crit = detect_critical(g_q)
    clock.lap("detect")
    outcome = repair_grid(g_q, crit, threads=threads, with_stars=False)
    clock.lap("repair")
    Q = build_q_complex(g_q)
    P = build_p_complex(g_q, outcome, Q)
    clock.lap("complex")
    wq, wp = check_well_composed(Q), check_well_composed(P)
    clock.lap("well_composed")
    bq, bp_ = betti(Q), betti(P)
    clock.lap("homology")
    problems = []
    unresolved: list = []
    elements = derive_bp(outcome.g_p, P, strict=False, unresolved=unresolved)
    if unresolved:
        a, b = unresolved[0]
        problems.append(
            f"B_P ambiguity: dim-{a[0]} facets {sorted(a[1])} vs {sorted(b[1])} "
            f"({len(unresolved)} colliding signature pairs)"
        )
    check = validate_bp(outcome.g_p, P, elements)
    if not check.ok and not unresolved:
        problems.append(f"B_P validation failed on {len(check.no_fit) + len(check.ambiguous) + len(check.wrong_facets)} cells")
    clock.lap("bp")
    if not wp.is_well_composed:
        problems.append("P is not well-composed")
    if bq != bp_ or Q.euler() != P.euler():
        problems.append("topology changed between Q and P")
    report = PipelineReport(
        input_path=str(path),
        voxels=len(image),
        cells_q=Q.counts(),
        cells_p=P.counts(),
        critical_count=len(crit),
        critical_classes_found=sorted(found_classes(g_q, crit)),
        betti_q=list(bq),
        betti_p=list(bp_),
        euler_q=Q.euler(),
        euler_p=P.euler(),
        e1_violations_q=len(wq.e1_violations),
        e2_violations_q=len(wq.e2_violations),
        well_composed_p=wp.is_well_composed,
        bp_element_count=len(elements),
        timings_ms=clock.times,
    )
    if not wp.is_well_composed:
        report.violations = (
            [{"kind": "E1", "key": list(k), "cofaces": n} for k, n in wp.e1_violations]
            + [{"kind": "E2", "key": list(k)} for k in wp.e2_violations]
        )
    return report, problems


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _grids(args):
    image = read_image(args.input, args.format)
    g_q = build_q_grid(image)
    return image, g_q


def cmd_info(args) -> int:
    image, g_q = _grids(args)
    crit = detect_critical(g_q)
    lines = [
        f"voxels {len(image)}",
        f"bbox {image.bbox}",
        f"grid_origin {g_q.origin}",
        f"grid_extent {g_q.extent}",
        f"cells_q {g_q.counts()}",
        f"critical {len(crit)}",
    ]
    _write(args.out, ("\n".join(lines) + "\n").encode())
    return 0


def cmd_detect(args) -> int:
    _, g_q = _grids(args)
    crit = detect_critical(g_q)
    _write(args.out, "".join(f"{x} {y} {z}\n" for x, y, z in crit).encode())
    return 0


def cmd_repair(args) -> int:
    _, g_q = _grids(args)
    outcome = repair_grid(g_q, threads=args.threads, with_stars=False)
    _write(args.output or args.out, dump_grid(outcome.g_p))
    return 0


def cmd_dump_grid(args) -> int:
    _, g_q = _grids(args)
    grid = g_q if args.which == "q" else repair_grid(g_q, threads=args.threads, with_stars=False).g_p
    _write(args.output or args.out, dump_grid(grid))
    return 0


def cmd_betti(args) -> int:
    _, g_q = _grids(args)
    outcome = repair_grid(g_q, threads=args.threads, with_stars=False)
    Q = build_q_complex(g_q)
    P = build_p_complex(g_q, outcome, Q)
    bq, bp_ = betti(Q), betti(P)
    _write(args.out, f"q {bq[0]} {bq[1]} {bq[2]}\np {bp_[0]} {bp_[1]} {bp_[2]}\n".encode())
    if bq != bp_:
        raise InvariantViolation(f"Betti numbers differ: {bq} vs {bp_}")
    return 0


def cmd_mesh(args) -> int:
    _, g_q = _grids(args)
    Q = build_q_complex(g_q)
    K = Q
    if args.which == "p":
        K = build_p_complex(g_q, repair_grid(g_q, threads=args.threads, with_stars=False), Q)
    _write(args.output or args.out, write_obj(triangulate_boundary(K)))
    return 0


def cmd_verify(args) -> int:
    report, problems = run_pipeline(args.input, args.format, args.threads)
    _write(args.output or args.out, report.to_json().encode())
    if problems:
        raise InvariantViolation("; ".join(problems))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecmrepair", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input")
    common.add_argument("--format", choices=["voxgrid", "coords"], default=None,
                        help="input format (default: by extension, .vox or .csv)")
    common.add_argument("--threads", type=int, default=_default_threads())
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("info", parents=[common]).set_defaults(func=cmd_info)
    sub.add_parser("detect", parents=[common]).set_defaults(func=cmd_detect)
    p = sub.add_parser("repair", parents=[common])
    p.add_argument("output", nargs="?")
    p.set_defaults(func=cmd_repair)
    p = sub.add_parser("verify", parents=[common])
    p.add_argument("output", nargs="?")
    p.set_defaults(func=cmd_verify)
    sub.add_parser("betti", parents=[common]).set_defaults(func=cmd_betti)
    for name, func in (("mesh", cmd_mesh), ("dump-grid", cmd_dump_grid)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("which", choices=["q", "p"])
        p.add_argument("output", nargs="?")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("ecmrepair: --threads must be at least 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (OSError, ImageFormatError, GridFormatError) as exc:
        print(f"ecmrepair: {exc}", file=sys.stderr)
        return 1
    except (InvariantViolation, ECMError, ComplexError, AmbiguityUnresolvable, InconsistentWrite) as exc:
        print(f"ecmrepair: invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
