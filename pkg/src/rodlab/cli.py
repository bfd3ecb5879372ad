"""Command-line benchmark driver.

Subcommands::

    rodlab run <scenario> --config cfg.json --out DIR [--formulation F ...]
                         [--elements N ...]
    rodlab sweep condition --config cfg.json --out DIR
    rodlab verify

Exit codes: 0 on full success, 2 when some formulations failed (recorded in
the stats table), 1 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import scenarios as sc

_FORMULATION_ALIASES = {
    "iga": {"scheme": "iga"},
    "iga_outlier": {"scheme": "iga", "outlier_removal": True},
    "iga_c2": {"scheme": "iga", "smoothness": 2},
    "nodal_r3": {"scheme": "nodal_r3"},
    "nodal_spp": {"scheme": "nodal_spp"},
    "nodal_spp_reduced": {"scheme": "nodal_spp_reduced"},
    "nodal_penalty": {"scheme": "nodal_penalty"},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rodlab",
        description="Benchmarks for nodal and isogeometric rod formulations")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark scenario")
    run.add_argument("scenario", choices=[s for s in sc.SCENARIOS
                                          if s != "condition"] + ["rollup_convergence"])
    run.add_argument("--config", default=None, help="JSON config file")
    run.add_argument("--formulation", action="append", default=None,
                     choices=sorted(_FORMULATION_ALIASES),
                     help="restrict to these formulations (repeatable)")
    run.add_argument("--elements", action="append", type=int, default=None,
                     help="mesh sizes to run (repeatable)")
    run.add_argument("--out", required=True, help="output directory")

    sweep = sub.add_parser("sweep", help="parameter sweeps")
    sweep.add_argument("kind", choices=["condition"])
    sweep.add_argument("--config", default=None)
    sweep.add_argument("--out", required=True)

    sub.add_parser("verify", help="run the quick property battery")
    return parser


def _overrides(args) -> dict:
    overrides = {}
    if args.formulation:
        overrides["formulations"] = [dict(_FORMULATION_ALIASES[f])
                                     for f in args.formulation]
    if getattr(args, "elements", None):
        overrides["n_elements"] = list(args.elements)
    return overrides


def _run(args) -> int:
    base = "rollup" if args.scenario == "rollup_convergence" else args.scenario
    try:
        config = sc.load_config(base, args.config, _overrides(args))
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    output = sc.run_scenario(args.scenario, config)
    paths = sc.emit_output(output, args.out)
    for path in paths:
        print(f"wrote {path}")
    statuses = output.manifest.get("statuses", {})
    failed = [k for k, v in statuses.items() if v != "converged"]
    if failed:
        print(f"{len(failed)} formulation run(s) did not converge: "
              + ", ".join(failed))
        return 2
    return 0


def _sweep(args) -> int:
    try:
        config = sc.load_config("condition", args.config, {})
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    output = sc.run_condition_sweep(config)
    for path in sc.emit_output(output, args.out):
        print(f"wrote {path}")
    return 0


def _verify(_args) -> int:
    import rodlab as rl
    from . import assembly as asm
    from . import constraints as con
    from . import diagnostics as diag
    from . import splines

    rng = np.random.default_rng(2024)
    checks: list[tuple[str, bool, str]] = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))

    # partition of unity / derivative sums
    space = splines.make_spline_space(3, 1, 12, 4.0)
    pts = rng.uniform(0.0, 4.0, 200)
    worst0 = worst1 = 0.0
    for s in pts:
        _, ders = splines.eval_spline_basis(space, s, 1)
        worst0 = max(worst0, abs(ders[0].sum() - 1.0))
        worst1 = max(worst1, abs(ders[1].sum()))
    check("spline partition of unity", worst0 < 1e-12, f"max defect {worst0:.1e}")
    check("spline derivative zero-sum", worst1 < 1e-10, f"max defect {worst1:.1e}")

    # nullspace exactness on random states
    q = rng.standard_normal(6 * 50)
    basis = con.constraint_nullspace(q)
    jac = con.constraint_jacobian(q)
    defect = np.max(np.abs((jac @ basis.matrix).toarray()))
    check("constraint nullspace J D = 0", defect < 1e-12, f"max |JD| {defect:.1e}")

    # tangent consistency, one static + one dynamic system
    props = rl.RodProperties(1e3, 1e2, 1.0, 1e-3, 5.0)
    model = rl.build_model(rl.Formulation("nodal_spp"), props, 4,
                           rl.LoadModel(gravity=(0, 0, -1.0)), fix_left="clamped")
    q0 = rl.straight_state(model.disc)
    q = q0 + 0.01 * rng.standard_normal(model.n_dof)
    q[model.fixed_dofs] = q0[model.fixed_dofs]
    lam = 0.1 * rng.standard_normal(model.n_constraints)
    sys0 = rl.assemble_system(model, "static", q, lam)
    h = 1e-6
    cols = []
    for dof in model.free_dofs:
        qp, qm = q.copy(), q.copy()
        qp[dof] += h
        qm[dof] -= h
        rp = rl.assemble_system(model, "static", qp, lam).rhs
        rm = rl.assemble_system(model, "static", qm, lam).rhs
        cols.append(-(rp - rm) / (2 * h))
    fd = np.stack(cols, axis=1)
    exact = sys0.matrix.toarray()[:, :len(model.free_dofs)]
    rel = np.linalg.norm(fd - exact) / np.linalg.norm(exact)
    check("static tangent matches finite differences", rel < 1e-6, f"rel {rel:.1e}")

    # momentum conservation, 20 steps of a spinning free rod
    props = rl.RodProperties(1e4, 10.0, 2.0, 0.0, 5.0)
    model = rl.build_model(rl.Formulation("iga"), props, 6, rl.LoadModel())
    q0 = rl.straight_state(model.disc)
    v0 = sc._rigid_velocity(model, [0.1, 0.0, 0.02], [0.0, 0.2, 0.4])
    lin0, ang0 = diag.momenta(model, q0, v0)
    st, _, _ = rl.dynamic_march(model, 0.01, 20,
                                initial=rl.RodState(q0.copy(), v0))
    lin, ang = diag.momenta(model, st.q, st.v)
    drift = max(np.linalg.norm(lin - lin0) / np.linalg.norm(lin0),
                np.linalg.norm(ang - ang0) / np.linalg.norm(ang0))
    check("momentum conservation (free rod)", drift < 1e-8, f"drift {drift:.1e}")

    # dof accounting
    ok = (asm.dof_count("iga", 40, 3, 1) == 246
          and asm.dof_count("nodal_r3", 40) == 246
          and asm.dof_count("nodal_spp", 40) == 287)
    check("dof accounting", ok)

    return 0 if all(ok for _, ok, _ in checks) else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    if args.command == "sweep":
        return _sweep(args)
    return _verify(args)


if __name__ == "__main__":
    sys.exit(main())
