"""Command line front end.

Exit status: 0 on success, 1 when an audit fails, 2 on input or parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analysis, circuits, dirac, sim
from . import subspace as ss
from .constitutive import ConstitutiveError, gradient_check
from .graph import GraphError, OpenGraph, interconnect
from .systems import SystemError_, load_system

EXIT_OK, EXIT_AUDIT, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (OSError, json.JSONDecodeError, GraphError, SystemError_, ConstitutiveError, circuits.NetlistError, KeyError)


class AuditFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    systems: list[str] = field(default_factory=list)
    netlist: str | None = None
    T: float | None = None
    dt: float | None = None
    method: str | None = None
    out: str | None = None
    tol: float = 1e-8
    seed: int = 0
    jobs: int = 1
    pairs: list[str] = field(default_factory=list)
    simulate: bool = False
    x0: str | None = None
    input: str | None = None


# -- check -------------------------------------------------------------------------------------


def audit_system(path: str, tol: float, seed: int) -> tuple[list[tuple[str, float, bool]], str]:
    """All structural audits for one system document: ``(name, value, passed)`` rows."""
    doc = load_system(path)
    s = doc.system
    rows = []
    rows.append(("J skew (max |J + J^T|)", float(np.max(np.abs(s.J + s.J.T), initial=0.0)), None))
    Wd = np.block([[s.R, s.P], [s.P.T, s.S]])
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (Wd + Wd.T)), initial=0.0))
    rows.append(("dissipation min eigenvalue", min_eig, min_eig >= -tol))
    d = s.provenance.structure
    iso = d.isotropy_residual()
    rows.append(("Dirac isotropy residual", iso, iso <= tol))
    rows.append(("Dirac dimension", float(d.dim), d.dim == d.n))
    sep, _ = dirac.is_separable(d)
    rows.append(("separable", float(sep), None))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        x = rng.normal(size=s.n_states)
        u = rng.normal(size=s.n_inputs)
        worst = max(worst, s.structure_residual(x, u))
    rows.append(("port membership residual (50 samples)", worst, worst <= tol))
    worst = 0.0
    for _ in range(50):
        x = rng.normal(size=s.n_states)
        u = rng.normal(size=s.n_inputs)
        worst = min(worst, s.dissipated_power(x, u))
    rows.append(("min dissipated power (50 samples)", worst, worst >= -tol))
    gerr = gradient_check(s.hamiltonian, rng, probes=20)
    rows.append(("Hamiltonian gradient check", gerr, gerr <= 1e-5))
    rows[0] = (rows[0][0], rows[0][1], rows[0][1] == 0.0)
    header = f"{path}: template={doc.template} states={s.n_states} inputs={s.n_inputs} ports={d.n} tol={tol:g} seed={seed}"
    return rows, header


def _format_audit(rows, header) -> str:
    lines = [header]
    for name, val, ok in rows:
        tag = "info" if ok is None else ("ok" if ok else "FAIL")
        lines.append(f"  [{tag:>4}] {name}: {val:.3e}")
    return "\n".join(lines)


def cmd_check(cfg: RunConfig) -> int:
    if not cfg.systems:
        raise SystemError_("check needs --system")
    args = [(p, cfg.tol, cfg.seed) for p in cfg.systems]
    if cfg.jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_audit_star, args))
    else:
        results = [_audit_star(a) for a in args]
    status = EXIT_OK
    for rows, header in results:
        print(_format_audit(rows, header))
        failed = [r for r in rows if r[2] is False]
        if failed and status == EXIT_OK:
            name, val, _ = failed[0]
            print(f"audit failed: {name} = {val:.3e}", file=sys.stderr)
            status = EXIT_AUDIT
    return status


def _audit_star(a):
    return audit_system(*a)


# -- simulate ------------------------------------------------------------------------------------


def _run_settings(cfg: RunConfig, doc_T=None, doc_dt=None, doc_method=None):
    T = cfg.T if cfg.T is not None else (doc_T if doc_T is not None else 10.0)
    dt = cfg.dt if cfg.dt is not None else (doc_dt if doc_dt is not None else 1e-2)
    method = cfg.method or doc_method or "rk4"
    if not dt > 0:
        raise SystemError_("--dt must be positive")
    return float(T), float(dt), method


def _simulate_and_write(s, x0, u, cfg: RunConfig, T, dt, method, extra_header):
    traj = sim.integrate(s, x0, u, T, dt, method)
    header = {"method": method, "dt": repr(dt), "T": repr(T), "seed": str(cfg.seed), "tol": repr(cfg.tol)}
    header.update(extra_header)
    text = sim.write_csv(traj, s, header_comment=header)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    led = sim.power_ledger(traj, s)
    res = sim.dirac_residual(traj, s) if s.provenance is not None else 0.0
    print(f"backend={traj.backend} method={method} dt={dt:g} T={T:g} samples={traj.n_samples}")
    print(f"H(0)={led.H[0]:.12g} H(T)={led.H[-1]:.12g}")
    print(f"supplied={led.supplied[-1]:.6e} dissipated={led.dissipated[-1]:.6e} balance residual={led.final_residual:.3e}")
    print(f"Dirac membership residual={res:.3e} (tol {cfg.tol:g})")
    if cfg.out:
        print(f"wrote {cfg.out}")
    return traj, res


def cmd_simulate(cfg: RunConfig) -> int:
    if len(cfg.systems) != 1:
        raise SystemError_("simulate needs exactly one --system")
    doc = load_system(cfg.systems[0])
    T, dt, method = _run_settings(cfg, doc.T, doc.dt, doc.method)
    u = json.loads(cfg.input) if cfg.input else doc.input
    x0 = _parse_vector(cfg.x0, doc.system.n_states) if cfg.x0 else doc.x0
    _, res = _simulate_and_write(doc.system, x0, u, cfg, T, dt, method, {"system": cfg.systems[0]})
    if res > cfg.tol:
        print(f"audit failed: Dirac membership residual {res:.3e}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


def _parse_vector(text: str, n: int) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError as exc:
        raise SystemError_(f"cannot parse vector {text!r}") from exc
    if v.shape != (n,):
        raise SystemError_(f"expected {n} values, got {v.size}")
    return v


# -- analyze -------------------------------------------------------------------------------------


def cmd_analyze(cfg: RunConfig) -> int:
    if len(cfg.systems) != 1:
        raise SystemError_("analyze needs exactly one --system")
    doc = load_system(cfg.systems[0])
    tol = cfg.tol if cfg.tol != RunConfig.tol else analysis.DEFAULT_TOL
    try:
        rep = analysis.report(doc.system, doc.x0, tol)
    except analysis.AnalysisError as exc:
        raise SystemError_(str(exc)) from exc
    lines = [f"system: {cfg.systems[0]} (template {doc.template})", f"tolerance: {tol:g}"]
    lines.append(f"connected: {rep['connected']}")
    if not rep["connected"]:
        lines.append(rep["connectivity_note"])
    else:
        lines.append("Casimirs:")
        for name, row in rep["casimirs"].items():
            lines.append(f"  {name}: {np.array2string(np.array(row), precision=6, suppress_small=True)}")
        lines.append(rep["equilibria"])
        lines.append(f"pervasive damping: {str(rep['pervasive_damping']).lower()}")
        lines.append(f"largest G Ls-invariant subspace in ker Bd^T: dimension {rep['invariant_subspace_dim']}")
        for vec in rep["invariant_subspace_basis"]:
            lines.append("  " + np.array2string(np.array(vec), precision=6, suppress_small=True))
        soc = rep["second_order_consensus"]
        lines.append(f"second-order consensus: {'n/a (spring graph disconnected)' if soc is None else str(soc).lower()}")
        if "limit_point" in rep:
            lp = rep["limit_point"]
            lines.append(f"limit point from x0: q = {np.round(lp['q'], 12).tolist()}, p = {np.round(lp['p'], 12).tolist()}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    return EXIT_OK


# -- compose --------------------------------------------------------------------------------------


def cmd_compose(cfg: RunConfig) -> int:
    if len(cfg.systems) != 2:
        raise SystemError_("compose needs exactly two --system files")
    with open(cfg.systems[0]) as fh:
        da = json.load(fh)
    with open(cfg.systems[1]) as fh:
        db = json.load(fh)
    ga, gb = OpenGraph.from_dict(da["graph"]), OpenGraph.from_dict(db["graph"])
    pairs = []
    for p in cfg.pairs:
        if "=" not in p:
            raise SystemError_(f"--pair expects a=b, got {p!r}")
        a, b = p.split("=", 1)
        pairs.append((a, b))
    g = interconnect(ga, gb, pairs, retain=False)

    # the composed structure, with merged vertices free of storage, against the interconnected graph
    comp = dirac.compose(dirac.flow_continuous(ga), dirac.flow_continuous(gb), dirac.BOUNDARY, pairs=pairs)
    merged = [a for a, _ in pairs]
    ref = dirac.constrain(dirac.flow_continuous(g), dirac.INTERNAL, "flows", labels=merged) if merged else dirac.flow_continuous(g)
    res = dirac.same_subspace(comp, ref)

    ea, eb = da.get("elements", {}), db.get("elements", {})
    rename = {b: a for a, b in pairs}
    verts = dict(ea.get("vertices", {}))
    for vid, spec in eb.get("vertices", {}).items():
        key = rename.get(vid, vid)
        if key in verts and verts[key].get("type") == spec.get("type") == "mass":
            verts[key] = {"type": "mass", "m": float(verts[key]["m"]) + float(spec["m"])}
        else:
            verts[key] = spec
    edges = dict(ea.get("edges", {}))
    edges.update(eb.get("edges", {}))
    out = {
        "template": da.get("template"),
        "graph": g.to_dict(),
        "elements": {"vertices": verts, "edges": edges},
    }
    text = json.dumps(out, indent=2, sort_keys=False) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
        print(f"wrote {cfg.out}")
    else:
        print(text, end="")
    print(f"composition vs interconnection residual: {res:.3e} (tol {cfg.tol:g})", file=sys.stderr)
    if res > cfg.tol:
        print(f"audit failed: composition residual {res:.3e}", file=sys.stderr)
        return EXIT_AUDIT
    return EXIT_OK


# -- circuit ---------------------------------------------------------------------------------------


def cmd_circuit(cfg: RunConfig) -> int:
    if not cfg.netlist:
        raise SystemError_("circuit needs --netlist")
    net = circuits.load_netlist(cfg.netlist)
    g = net.graph
    print(f"netlist {cfg.netlist}: {g.n_vertices} vertices, {g.n_edges} elements, terminals {list(g.boundary_ids)}")
    try:
        model = circuits.reduce_to_ode(circuits.assemble_dae(net))
    except circuits.DegenerateCircuit as exc:
        print(f"reduction failed ({exc.kind}): {exc}", file=sys.stderr)
        for col in exc.basis.T:
            parts = [f"{lab}:{v:+.3g}" for lab, v in zip(exc.labels, col) if abs(v) > 1e-9]
            print("  basis vector: " + " ".join(parts), file=sys.stderr)
        return EXIT_AUDIT
    s = model.system
    print(f"states: {', '.join(s.state_labels) or '(none)'}")
    if not cfg.simulate:
        return EXIT_OK
    T, dt, method = _run_settings(cfg)
    x0 = _parse_vector(cfg.x0, s.n_states) if cfg.x0 else np.ones(s.n_states)
    u = json.loads(cfg.input) if cfg.input else None
    traj, res = _simulate_and_write(s, x0, u, cfg, T, dt, method, {"netlist": cfg.netlist})
    status = EXIT_OK if res <= cfg.tol else EXIT_AUDIT
    if g.boundary_idx:
        audit = circuits.boundary_flow_audit(traj, model)
        print(
            f"terminal-current sums: {audit.n_constraints} component constraint(s), "
            f"max |sum| = {audit.max_abs_sum:.3e} (scale {audit.scale:.3e})"
        )
        if not audit.passed:
            print(f"audit failed: terminal-current sum {audit.max_abs_sum:.3e}", file=sys.stderr)
            status = EXIT_AUDIT
    dae = max(model.dae_residual(x, uu) for x, uu in zip(traj.states, traj.inputs))
    print(f"DAE residual: {dae:.3e}")
    return status


# -- entry point ----------------------------------------------------------------------------------

COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "compose": cmd_compose,
    "circuit": cmd_circuit,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phgraph", description="Port-Hamiltonian systems on graphs")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--system", action="append", default=[], dest="systems", help="system JSON (repeatable)")
    p.add_argument("--netlist", help="circuit netlist")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--method", choices=["rk4", "midpoint"])
    p.add_argument("--out", help="output path (CSV, report or JSON)")
    p.add_argument("--tol", type=float, default=RunConfig.tol, help="audit tolerance (default %(default)g)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized audits")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for multi-system checks")
    p.add_argument("--pair", action="append", default=[], dest="pairs", help="compose: boundary pairing a=b")
    p.add_argument("--simulate", action="store_true", help="circuit: simulate after reduction")
    p.add_argument("--x0", help="initial state, comma or space separated")
    p.add_argument("--input", help="input signal as JSON (number, list or signal object)")
    return p


def run(cfg: RunConfig) -> int:
    try:
        return COMMANDS[cfg.command](cfg)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (sim.SimulationError, AuditFailure, ss.DimensionError) as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(ns))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
