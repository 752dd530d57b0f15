"""Command-line interface: ``fbms SUBCOMMAND [flags]``.

Exit codes: 0 when every requested assertion passes, 2 on an assertion
failure, 1 on an error.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from contextlib import nullcontext

from .config import FORMS, RunConfig, parse_t_grid
from .errors import ConfigError, FBMSError
from .serialize import dumps, to_csv

log = logging.getLogger("fbms")

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--builtin", help="flat_disk, critical_catenoid or flat_annulus")
    src.add_argument("--mesh", help="OFF or OBJ mesh file")
    common.add_argument("--config", help="JSON run configuration; flags override its fields")
    common.add_argument("--format", choices=["off", "obj"])
    common.add_argument("--resolution", type=int)
    common.add_argument("--refine", type=int)
    common.add_argument("--ambient", help="NAME[,key=value...], e.g. unit_ball or space_form,kappa=-1")
    common.add_argument("--form", choices=FORMS)
    common.add_argument("--k", type=int)
    common.add_argument("--tol-zero", type=float, dest="tol_zero")
    common.add_argument("--tol-min", type=float, dest="tol_min")
    common.add_argument("--tol-orth", type=float, dest="tol_orth")
    common.add_argument("--t-grid", dest="t_grid", help="lo,hi,count")
    common.add_argument("--c1", type=float)
    common.add_argument("--c2", type=float)
    common.add_argument("--c", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--max-dofs", type=int, dest="max_dofs")
    common.add_argument("--out", help="write the JSON artifact here")
    common.add_argument("--csv", help="write tabular rows (heat traces) here")
    common.add_argument("--json", action="store_true", default=None, help="print JSON to stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="fbms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    helps = {
        "topo": "topology, upsilon and Riemann-Roch table",
        "validate": "free-boundary minimality residuals",
        "spectrum": "lowest eigenvalues of a second-variation form",
        "index": "index and nullity of a second-variation form",
        "compare": "comparison identity and the reparametrization solve",
        "heat": "heat traces and kernel comparisons",
        "sobolev": "Sobolev and boundary-trace ratio statistics",
        "bounds": "closed-form index and area bounds",
        "report": "full inequality report",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    over = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            over[f.name] = v
    if "t_grid" in over:
        over["t_grid"] = parse_t_grid(over["t_grid"])
    if "mesh" in over:
        over["builtin"] = None
    cfg = dataclasses.replace(cfg, **over)
    return cfg.validate()


def _thread_limit():
    n = os.environ.get("FBMS_THREADS")
    if not n:
        return nullcontext()
    try:
        k = max(1, int(n))
    except ValueError as exc:
        raise ConfigError("FBMS_THREADS must be an integer") from exc
    from threadpoolctl import threadpool_info, threadpool_limits

    # a cap only: raising BLAS above its initial pool size is unsafe in some builds
    current = [p["num_threads"] for p in threadpool_info()]
    return threadpool_limits(limits=min([k] + current))


def _summary(doc: dict) -> str:
    r = doc["result"]
    sc = doc["subcommand"]
    lines = [f"{sc}: {doc['surface_id']}"]
    if sc == "topo":
        t = r["topology"]
        lines.append(f"g={t['g']} m={t['m']} chi={t['chi']} upsilon={r['upsilon']}")
    elif sc == "validate":
        lines.append(f"mean curvature residual {r['mean_curvature_residual']:.3e}, "
                     f"orthogonality residual {r['orthogonality_residual']:.3e}")
    elif sc in ("spectrum", "index") and "forms" in r:
        for name, e in r["forms"].items():
            c = e["classification"]
            lines.append(f"{name}: index {c['index']}, nullity {c['nullity']}")
    elif sc == "heat":
        lines.append(f"beta={r['beta']} ind_E={r['ind_energy']} nul_E={r['nul_energy']} "
                     f"indb={r['indb_pass']} eingb={r['eingb_pass']}")
        kd = r.get("kernel", {})
        if "domination_pass" in kd:
            lines.append(f"kernel domination={kd['domination_pass']} mass bound={kd['mass_pass']}")
    elif sc == "compare":
        for name, c in sorted(r["cases"].items()):
            lines.append(f"{name}: identity residual {c['X_zero']['identity_residual']:.3e}")
    elif sc == "sobolev":
        for name, a in sorted(r["anchors"].items()):
            lines.append(f"{name} at phi=1: {a['value']:.6f} (expected {a['expected']:.6f})")
    elif sc == "bounds":
        m = r["mt2"]
        lines.append(f"index bound {m['bound']:.6g} at t={m['t_star']:.4g}, area {r['area']:.6g}")
    elif sc == "report" and "report" in r:
        from .bounds import _fmt

        for c in r["report"]["checks"]:
            status = ("pass" if c["pass"] else "FAIL") + ("" if c["asserted"] else ", reported only")
            lines.append(f"{c['name']}: {_fmt(c['lhs'])} <= {_fmt(c['rhs'])} [{status}]")
    lines.append("PASS" if doc["pass"] else "FAIL")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .pipeline import SUBCOMMANDS

    try:
        cfg = config_from_args(args)
        with _thread_limit():
            doc = SUBCOMMANDS[args.subcommand](cfg)
    except (FBMSError, OSError, ValueError) as exc:
        print(f"fbms {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = dumps(doc)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    if cfg.csv and args.subcommand == "heat":
        with open(cfg.csv, "w") as fh:
            fh.write(to_csv(doc["result"]["trace"]))
    print(text if cfg.json else _summary(doc), end="" if cfg.json else "\n")
    return EXIT_PASS if doc["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
