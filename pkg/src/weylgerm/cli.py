"""Command-line front end.

Every command reads one YAML document (``--config``) except ``star``,
which takes two symbol strings.  Outputs go to ``--out`` (default: the
current directory).  Exit codes: 0 ok, 2 configuration or parse error,
3 numerical failure or failed check, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_hamiltonian, load_config, quadratic_coefficients
from .dynamics import HamiltonianSpec, StepControl, integrate_flow, oracle_hamiltonian
from .errors import ConfigError, NumericalError, ParseError, WeylGermError
from .germ import (LagrangianCurve, GaussianPacket, canonical_superpose, closed_curve_index,
                   exact_quadratic_propagate, packet_history, packet_to_grid, propagate_packet,
                   reconstruct_wkb, write_packet_csv)
from .moyal import PolySymbol, format_symbol, parse_symbol, star
from .oracle import Grid1D, evolve_schrodinger, l2_error, write_grid_csv
from .qft import diagram_records, tree_series_vs_classical
from .symplectic import branch_track, maslov_index

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INTERNAL = 0, 2, 3, 4


class CheckFailed(NumericalError):
    """A requested tolerance check did not hold."""


def _write_json(path: Path, command: str, cfg: dict, payload: dict) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg,
           "metadata": {"package_version": __version__}}
    doc.update(payload)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, columns, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def _packet(cfg: dict, hbar: float) -> GaussianPacket:
    spec = cfg["packet"]
    zr, zi = spec.get("Z", [0.0, 1.0])
    if zi <= 0:
        raise ConfigError("imaginary part must be positive", "packet/Z")
    return GaussianPacket.normalized(complex(zr, zi), spec["q0"], spec["p0"], hbar)


def _grid(cfg: dict) -> Grid1D:
    return Grid1D.symmetric(cfg["grid"]["half_width"], cfg["grid"]["N"])


def _fit_order(hbars, errs):
    if len(hbars) < 2 or min(errs) <= 0:
        return None
    return float(np.polyfit(np.log(hbars), np.log(errs), 1)[0])


# ---------------------------------------------------------------------
# propagate


def _propagate_one(cfg: dict, idx: int, out: str | None):
    hbar = cfg["hbar"][idx]
    H = build_hamiltonian(cfg["hamiltonian"])
    t0, t1 = cfg["t_span"]
    control = StepControl(tol=cfg["flow_tol"])
    pkt = _packet(cfg, hbar)
    res = propagate_packet(H, pkt, t0, t1, control, germ=cfg["germ"])
    grid = _grid(cfg)
    psi0 = packet_to_grid(pkt, grid)
    exact, oerr = evolve_schrodinger(oracle_hamiltonian(H), psi0, t1 - t0, tol=cfg["oracle_tol"], return_error=True)
    approx = packet_to_grid(res, grid)
    row = {"hbar": float(hbar), "l2_error": l2_error(approx, exact),
           "l2_error_mod_phase": l2_error(approx, exact, True), "oracle_error": float(oerr)}
    hist = packet_history(H, pkt, t0, t1, cfg["n_out"], control)
    if out is not None:
        write_packet_csv(Path(out) / f"packet_h{idx}.csv", hist)
        if cfg["snapshots"]:
            write_grid_csv(Path(out) / f"grid_packet_h{idx}.csv", approx)
            write_grid_csv(Path(out) / f"grid_oracle_h{idx}.csv", exact)
    return row


def cmd_propagate(cfg: dict, out: Path, tol: float | None) -> int:
    H = build_hamiltonian(cfg["hamiltonian"])
    t0, t1 = cfg["t_span"]
    times = list(np.linspace(t0, t1, cfg["n_out"]))
    spec = cfg["packet"]
    traj = integrate_flow(H, [spec["q0"]], [spec["p0"]], t0, t1, StepControl(tol=cfg["flow_tol"]), t_eval=times)
    energy = traj.energy()
    _write_rows(out / "trajectory.csv", ["t", "q", "p", "S", "energy"],
                [{"t": float(t), "q": float(q[0]), "p": float(p[0]), "S": float(s), "energy": float(e)}
                 for t, q, p, s, e in zip(traj.t, traj.q, traj.p, traj.S, energy)])
    idxs = range(len(cfg["hbar"]))
    if cfg["workers"] > 1 and len(cfg["hbar"]) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as ex:
            rows = list(ex.map(_propagate_one, [cfg] * len(idxs), idxs, [str(out)] * len(idxs)))
    else:
        rows = [_propagate_one(cfg, i, str(out)) for i in idxs]
    order = sorted(rows, key=lambda r: -r["hbar"])
    errs = [r["l2_error_mod_phase"] for r in order]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    payload = {"results": rows, "monotone_decreasing": monotone,
               "order_in_hbar": _fit_order([r["hbar"] for r in order], errs)}
    if tol is not None:
        payload["tol"] = tol
        payload["pass"] = all(r["l2_error_mod_phase"] <= tol for r in rows)
    _write_json(out / "summary.json", "propagate", cfg, payload)
    for r in rows:
        print(f"hbar={r['hbar']:g}  L2={r['l2_error']:.3e}  L2(mod phase)={r['l2_error_mod_phase']:.3e}")
    if tol is not None and not payload["pass"]:
        raise CheckFailed(f"L2 error above --tol {tol:g}")
    return EXIT_OK


# ---------------------------------------------------------------------
# compare-oracle


def random_quadratic_cases(seed: int, count: int) -> list:
    """Elliptic quadratic Hamiltonians and packets: ``[(a, b, c, Z, q0, p0)]``."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(count):
        a, c = rng.uniform(0.5, 2.0, size=2)
        b = rng.uniform(-0.4, 0.4) * math.sqrt(a * c)
        Z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 1.6))
        q0, p0 = rng.uniform(-1.0, 1.0, size=2)
        cases.append((float(a), float(b), float(c), Z, float(q0), float(p0)))
    return cases


def _quadratic_symbol(a, b, c):
    f = Fraction
    return PolySymbol(1, {((2, 0), 0): f(a) / 2, ((1, 1), 0): f(b), ((0, 2), 0): f(c) / 2})


def cmd_compare_oracle(cfg: dict, out: Path, tol: float | None, seed: int) -> int:
    grid = _grid(cfg)
    t = cfg["t"]
    rows = []
    if "random_quadratic" in cfg:
        cases = random_quadratic_cases(seed, cfg["random_quadratic"])
    else:
        if "hamiltonian" not in cfg or "packet" not in cfg:
            raise ConfigError("'hamiltonian' and 'packet' are required without 'random_quadratic'", "<root>")
        cases = [None]
    for ci, case in enumerate(cases):
        for hbar in cfg["hbar"]:
            if case is None:
                H = build_hamiltonian(cfg["hamiltonian"])
                pkt = _packet(cfg, hbar)
                quad = quadratic_coefficients(H)
                H_or = oracle_hamiltonian(H)
            else:
                a, b, c, Z, q0, p0 = case
                pkt = GaussianPacket.normalized(Z, q0, p0, hbar)
                quad = (a, b, c)
                H_or = _quadratic_symbol(a, b, c)
                H = HamiltonianSpec.from_symbol(H_or)
            psi0 = packet_to_grid(pkt, grid)
            exact, oerr = evolve_schrodinger(H_or, psi0, t, tol=cfg["oracle_tol"], return_error=True)
            germ = packet_to_grid(propagate_packet(H, pkt, 0.0, t), grid)
            row = {"case": ci, "hbar": float(hbar), "l2_packet": l2_error(germ, exact, True),
                   "l2_exact": float("nan"), "oracle_error": float(oerr)}
            if quad is not None:
                row["l2_exact"] = l2_error(packet_to_grid(exact_quadratic_propagate(*quad, pkt, t), grid), exact, True)
            rows.append(row)
    cols = ["case", "hbar", "l2_packet", "l2_exact", "oracle_error"]
    _write_rows(out / "compare.csv", cols, rows)
    worst = max((r["l2_exact"] if not math.isnan(r["l2_exact"]) else r["l2_packet"]) for r in rows)
    payload = {"results": [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                           for r in rows], "seed": seed, "max_error": worst}
    if tol is not None:
        payload["tol"], payload["pass"] = tol, worst <= tol
    _write_json(out / "compare.json", "compare-oracle", cfg, payload)
    for r in rows:
        print(f"case={r['case']} hbar={r['hbar']:g} packet={r['l2_packet']:.3e} exact={r['l2_exact']:.3e}")
    if tol is not None and worst > tol:
        raise CheckFailed(f"max error {worst:.3e} above --tol {tol:g}")
    return EXIT_OK


# ---------------------------------------------------------------------
# star / maslov


def cmd_star(expr1: str, expr2: str) -> int:
    parsed = []
    for name, text in (("expr1", expr1), ("expr2", expr2)):
        try:
            parsed.append(parse_symbol(text))
        except ParseError as exc:
            raise ParseError(f"{name}: {exc.message}", exc.pos) from None
    f, g = parsed
    n = max(f.n, g.n)
    print(format_symbol(star(f.embed(n), g.embed(n))))
    return EXIT_OK


def cmd_maslov(cfg: dict, out: Path) -> int:
    H = build_hamiltonian(cfg["hamiltonian"])
    t0, t1 = cfg["t_span"]
    times = list(np.linspace(t0, t1, cfg["samples"]))
    traj = integrate_flow(H, [cfg["q0"]], [cfg["p0"]], t0, t1, StepControl(), t_eval=times)
    k, table = maslov_index(traj.path, cfg["Z_real"], cfg["eps"], return_table=True)
    tracked = branch_track(traj.path, cfg["Z_real"] + 1j * cfg["eps"][-1])
    rows = [{"t": float(t), "arg": float(a)} for t, a in zip(tracked.times, tracked.args)]
    _write_rows(out / "maslov.csv", ["t", "arg"], rows)
    payload = {"k": int(k), "phase": [-math.pi * k / 2],
               "table": [{"eps": e, "phase": ph, "k_raw": kr} for e, ph, kr in table]}
    _write_json(out / "maslov.json", "maslov", cfg, payload)
    print(f"k = {k}   exp(-i pi k/2) = {complex(np.exp(-0.5j * math.pi * k)):.6f}")
    print("eps        phase        k_raw")
    for e, ph, kr in table:
        print(f"{e:<10.1e} {ph:+.6f}   {kr:+.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------
# canonical


def _graph_curve(spec: dict, hbar: float) -> LagrangianCurve:
    S = parse_symbol(spec["S"], 1)
    dS = S.diff(0)

    def ev(sym):
        return np.vectorize(lambda x: complex(sym(np.array([x]), np.array([0.0]), 0.0)).real)

    a, b = spec["alpha_range"]
    step = math.sqrt(hbar) / spec["samples_per_sqrt_hbar"]
    alpha = np.arange(a, b + 0.5 * step, step)
    w = spec["amplitude_width"]
    zr, zi = spec["Zf"]
    return LagrangianCurve.graph(ev(S), ev(dS), alpha, lambda x: np.exp(-x ** 2 / (2 * w * w)), complex(zr, zi))


def _circle_curve(spec: dict) -> LagrangianCurve:
    r = spec["radius"]
    al = np.linspace(0.0, 2 * math.pi, spec["samples"], endpoint=False)
    zr, zi = spec["Zf"]
    S = r * r * (al / 2 - np.sin(2 * al) / 4)
    return LagrangianCurve(al, r * np.cos(al), -r * np.sin(al), S, complex(zr, zi), 1.0, closed=True)


def cmd_canonical(cfg: dict, out: Path, tol: float | None) -> int:
    spec = cfg["curve"]
    if spec["kind"] == "circle":
        curve = _circle_curve(spec)
        payload = {"closed_index": closed_curve_index(curve), "loop_action": curve.loop_action(),
                   "enclosed_area": math.pi * spec["radius"] ** 2, "eq_residual": curve.eq41_residual()}
        _write_json(out / "canonical.json", "canonical", cfg, payload)
        print(f"index = {payload['closed_index']}  loop action = {payload['loop_action']:.8f}")
        return EXIT_OK
    grid = _grid(cfg)
    rows = []
    for i, hbar in enumerate(cfg["hbar"]):
        curve = _graph_curve(spec, hbar)
        sup = canonical_superpose(curve, hbar, grid)
        wkb = reconstruct_wkb(curve, hbar, grid)
        err = l2_error(sup, wkb)
        rows.append({"hbar": float(hbar), "l2_error": err, "C": err / math.sqrt(hbar)})
        _write_rows(out / f"canonical_h{i}.csv", ["x", "re_sup", "im_sup", "re_wkb", "im_wkb"],
                    [{"x": float(x), "re_sup": float(s.real), "im_sup": float(s.imag),
                      "re_wkb": float(w.real), "im_wkb": float(w.imag)}
                     for x, s, w in zip(grid.x, sup.values, wkb.values)])
    Cs = [r["C"] for r in rows]
    payload = {"results": rows, "C_max": max(Cs), "C_min": min(Cs)}
    _write_json(out / "canonical.json", "canonical", cfg, payload)
    for r in rows:
        print(f"hbar={r['hbar']:g}  |sup - wkb|={r['l2_error']:.3e}  C={r['C']:.4f}")
    if tol is not None and max(r["l2_error"] for r in rows) > tol:
        raise CheckFailed(f"reconstruction error above --tol {tol:g}")
    return EXIT_OK


# ---------------------------------------------------------------------
# diagrams / tree-check


def cmd_diagrams(cfg: dict, out: Path) -> int:
    recs = diagram_records(cfg["N"], cfg["L"], cfg["mass"], cfg["hbar"], cfg["g"], cfg["t_window"],
                           cfg["kind"], cfg["evaluate"])
    _write_json(out / "diagrams.json", "diagrams", cfg, {"diagrams": recs})
    for r in recs:
        val = "" if r["value_re"] is None else f"  value={complex(r['value_re'], r['value_im']):.6e}"
        print(f"edges={r['edges']} external={r['external']} M={r['M']} hbar^{r['hbar_power']}{val}")
    return EXIT_OK


def cmd_tree_check(cfg: dict, out: Path, tol: float | None) -> int:
    tol = 1e-6 if tol is None else tol
    rows = []
    for t in cfg["t"]:
        for order in cfg["orders"]:
            q, c, d = tree_series_vs_classical(order, cfg["mass"], cfg["g"], cfg["u0"], cfg["v0"], t,
                                               cfg["coupling_sign"])
            rows.append({"t": float(t), "order": order, "quantum_tree": q, "classical": c, "difference": d})
    _write_rows(out / "tree_check.csv", ["t", "order", "quantum_tree", "classical", "difference"], rows)
    ok = all(r["difference"] <= tol for r in rows)
    _write_json(out / "tree_check.json", "tree-check", cfg, {"results": rows, "tol": tol, "pass": ok})
    for r in rows:
        print(f"t={r['t']:g} g^{r['order']}: tree={r['quantum_tree']:+.10e} classical={r['classical']:+.10e}"
              f" diff={r['difference']:.2e}")
    if not ok:
        raise CheckFailed(f"tree sum and classical series differ by more than {tol:g}")
    return EXIT_OK


# ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weylgerm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", default=".", metavar="DIR")
        sp.add_argument("--seed", type=int, default=0, metavar="INT")
        sp.add_argument("--tol", type=float, default=None, metavar="FLOAT")

    common(sub.add_parser("propagate", help="packet propagation vs the grid oracle over an hbar sweep"))
    common(sub.add_parser("compare-oracle", help="error table of packet (and exact quadratic) vs oracle"))
    s = sub.add_parser("star", help="Moyal product of two symbols")
    s.add_argument("expr1")
    s.add_argument("expr2")
    common(s, config=False)
    common(sub.add_parser("maslov", help="Maslov index of a flow acting on a real Lagrangian graph"))
    common(sub.add_parser("canonical", help="packet superposition over a curve vs WKB reconstruction"))
    common(sub.add_parser("diagrams", help="enumerate and evaluate 0+1 dimensional diagrams"))
    common(sub.add_parser("tree-check", help="tree-level diagram sum vs classical perturbation series"))
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "star":
            return cmd_star(args.expr1, args.expr2)
        cfg = load_config(args.config, args.command)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "propagate":
            return cmd_propagate(cfg, out, args.tol)
        if args.command == "compare-oracle":
            return cmd_compare_oracle(cfg, out, args.tol, args.seed)
        if args.command == "maslov":
            return cmd_maslov(cfg, out)
        if args.command == "canonical":
            return cmd_canonical(cfg, out, args.tol)
        if args.command == "diagrams":
            return cmd_diagrams(cfg, out)
        if args.command == "tree-check":
            return cmd_tree_check(cfg, out, args.tol)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, WeylGermError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_INTERNAL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
