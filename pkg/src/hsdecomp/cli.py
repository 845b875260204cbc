"""Command-line entry point ``hsdecomp``.

Exit codes: 0 all checks pass, 1 a check failed, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import atomic, czd, fields as fieldgen
from .hajlasz import hajlasz_norm_lp
from .maxfn import (calderon_star, discrete_convolution, grad_maximal_star, grad_plus, grand_maximal, hl_maximal,
                    hl_maximal_q, sobolev_sharp)
from .space import build_space, read_field, save_space, write_field
from .suite import ConfigError, SuiteConfig, emit_plotdata, run_suite
from .whitney import cover_diagnostics, partition_of_unity, whitney_cover

log = logging.getLogger("hsdecomp")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MAXFN_OPS = ("m", "mq", "n", "star", "plus", "grand", "ustar", "conv")


class UsageError(Exception):
    pass


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _load(args):
    space = build_space(args.space)
    return space, read_field(args.field, space.n)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def cmd_run(args) -> int:
    cfg = SuiteConfig.load(args.config) if args.config else SuiteConfig()
    if args.out:
        cfg.out = args.out
    report = run_suite(cfg)
    for line in report.lines():
        print(line)
    if args.out and args.plotdata:
        emit_plotdata(report, Path(args.out) / "plotdata")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_gen_space(args) -> int:
    space = build_space(args.spec)
    save_space(space, args.out)
    print(f"{space.name}: n={space.n} edges={len(space.edges)} -> {args.out}")
    return EXIT_OK


def cmd_gen_field(args) -> int:
    space = build_space(args.space)
    write_field(args.out, fieldgen.make_field(space, args.gen, args.seed))
    return EXIT_OK


def cmd_maxfn(args) -> int:
    space, f = _load(args)
    op = args.op
    if op == "m":
        out = hl_maximal(space, f)
    elif op == "mq":
        if args.q is None:
            raise UsageError("--op mq needs --q")
        out = hl_maximal_q(space, f, args.q)
    elif op == "n":
        out = sobolev_sharp(space, f)
    elif op == "star":
        out = calderon_star(space, f)
    elif op == "grand":
        out = grand_maximal(space, f, args.mode)
    elif op == "plus":
        out = grad_plus(space, f)
    else:
        radii = _floats(args.radii) if args.radii else [space.spacing * s for s in (0.5, 1.0, 2.0)]
        if op == "conv":
            if len(radii) != 1:
                raise UsageError("--op conv takes exactly one radius")
            out = discrete_convolution(space, f, radii[0])[0]
        else:
            out = grad_maximal_star(space, f, radii)
    write_field(args.out, out)
    return EXIT_OK


def cmd_hajlasz(args) -> int:
    space, f = _load(args)
    cert = hajlasz_norm_lp(space, f)
    _write_json(args.out, cert.to_dict())
    print(f"value={cert.value:.12g} dual_bound={cert.dual_bound:.12g} slack={cert.slack:.3g}")
    return EXIT_OK


def cmd_whitney(args) -> int:
    space = build_space(args.space)
    omega = [int(x) for x in _floats(args.omega)]
    cover = whitney_cover(space, omega)
    pu = partition_of_unity(space, cover)
    diag = cover_diagnostics(space, cover)
    _write_json(args.out, {**cover.to_dict(), "c_pu": pu.c_pu, "diagnostics": diag})
    ok = diag["disjoint"] and diag["covers"] and diag["reaches_f"]
    return EXIT_OK if ok else EXIT_FAIL


def cmd_czd(args) -> int:
    space, f = _load(args)
    q = czd.default_q(space) if args.q is None else czd.check_q(space, args.q)
    dec = czd.cz_decompose(space, f, q, args.alpha, args.flavor)
    rep = czd.verify_cz(space, dec)
    _write_json(args.out, {**dec.to_dict(), "report": rep.to_dict()})
    scale = max(1.0, float(np.abs(f).max()))
    ok = rep.support_ok and rep.residual <= 1e-9 * scale
    print(f"K={rep.K} C_g={rep.C_g:.4g} C_b1={rep.C_b1:.4g} C_bq={rep.C_bq:.4g} C_B={rep.C_B:.4g} "
          f"residual={rep.residual:.3g}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_atomic(args) -> int:
    space, f = _load(args)
    q = None if args.q is None else czd.check_q(space, args.q)
    dec = atomic.atomic_decompose(space, f, args.flavor, q)
    checks = atomic.decomposition_report(space, dec)
    _write_json(args.out, {**dec.to_dict(), "checks": checks})
    print(f"atoms={len(dec.atoms)} j=[{dec.j_min},{dec.j_max}] l1_sum={dec.l1_sum:.6g} "
          f"C_lambda={checks['C_lambda']:.4g} failed={len(checks['failed_atoms'])}")
    return EXIT_OK if not checks["failed_atoms"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hsdecomp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run the acceptance matrix")
    s.add_argument("--config", help="JSON config; defaults cover the full fixture matrix")
    s.add_argument("--out", help="directory for rows.csv, summary.json, timings.json")
    s.add_argument("--plotdata", action="store_true", help="also write per-check CSVs of constant vs n")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("gen-space", help="write a space JSON file")
    s.add_argument("--spec", required=True, help='e.g. "path(4,1.0)", "grid(4x4)", "cloud(64,seed=7)"')
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_space)

    s = sub.add_parser("gen-field", help="write a generated field as id,value CSV")
    s.add_argument("--space", required=True)
    s.add_argument("--gen", required=True, help=f"one of {', '.join(fieldgen.GENERATORS)}, optionally with (args)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_field)

    def with_io(s, out_help):
        s.add_argument("--space", required=True, help="space JSON file or descriptor")
        s.add_argument("--field", required=True, help="id,value CSV")
        s.add_argument("--out", required=True, help=out_help)

    s = sub.add_parser("maxfn", help="evaluate one maximal operator")
    s.add_argument("--op", required=True, choices=MAXFN_OPS)
    with_io(s, "id,value CSV")
    s.add_argument("--q", type=float)
    s.add_argument("--mode", choices=("tent", "lp"), help="f⁺ mode (default: lp for n ≤ 128)")
    s.add_argument("--radii", help="comma-separated radii for ustar/conv (default: 1/2,1,2 spacings)")
    s.set_defaults(func=cmd_maxfn)

    s = sub.add_parser("hajlasz", help="Hajłasz norm LP with certificate")
    with_io(s, "certificate JSON")
    s.set_defaults(func=cmd_hajlasz)

    s = sub.add_parser("whitney", help="Whitney cover of a point set")
    s.add_argument("--space", required=True)
    s.add_argument("--omega", required=True, help="comma-separated point ids")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_whitney)

    s = sub.add_parser("czd", help="Calderón–Zygmund decomposition at one height")
    with_io(s, "decomposition JSON")
    s.add_argument("--flavor", required=True, choices=("homog", "tilde", "m11"))
    s.add_argument("--alpha", required=True, type=float)
    s.add_argument("--q", type=float)
    s.set_defaults(func=cmd_czd)

    s = sub.add_parser("atomic", help="atomic decomposition")
    with_io(s, "decomposition JSON")
    s.add_argument("--flavor", required=True, choices=("hs-moment", "hs-size", "hs-nonhomog", "ls"))
    s.add_argument("--q", type=float)
    s.set_defaults(func=cmd_atomic)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"hsdecomp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
