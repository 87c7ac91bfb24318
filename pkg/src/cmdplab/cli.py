"""Command-line interface: ``cmdplab <verb> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import CmdpInputError, PlannerError

log = logging.getLogger("cmdplab")


def _out_path(args, name):
    return Path(args.out_dir) / name if args.out_dir else Path(name)


def _emit(obj, out=None):
    text = json.dumps(obj, indent=1)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_solve(args):
    from .lp_oracle import slater_constant, solve_cmdp_exact
    from .model_io import load_cmdp

    m = load_cmdp(args.model)
    sol = solve_cmdp_exact(m)
    d = sol.to_dict()
    d["slater_constant"] = slater_constant(m)
    _emit(d, args.out)


def _preset(args, gamma, b):
    from .primal_dual import PdConfig, apply_t_cap, preset_relaxed, preset_strict

    if args.mode == "relaxed":
        cfg = preset_relaxed(args.epsilon, args.delta, gamma, b, args.kappa)
    elif args.mode == "strict":
        if args.zeta is None:
            raise CmdpInputError("--zeta is required in strict mode")
        cfg = preset_strict(args.epsilon, args.delta, gamma, b, args.zeta, args.kappa)
    else:
        missing = [f for f in ("U", "eps_net", "T", "eta") if getattr(args, f, None) is None]
        if missing:
            raise CmdpInputError("manual mode needs " + ", ".join("--" + f.replace("_", "-") for f in missing))
        cfg = PdConfig(U=args.U, eps_net=args.eps_net, T=args.T, eta=args.eta,
                       b_prime=b if args.b_prime is None else args.b_prime,
                       omega=args.omega or 0.0, eps_opt=args.eps_opt, mode="manual")
    return apply_t_cap(cfg, args.t_cap, gamma)


def cmd_sample(args):
    from .model_io import load_cmdp, save_empirical
    from .sampling import GenerativeModel, build_empirical_model

    m = load_cmdp(args.model)
    if args.mode:
        cfg = _preset(args, m.gamma, m.b)
        omega, b_prime = cfg.omega, cfg.b_prime
    else:
        omega = args.omega or 0.0
        b_prime = m.b if args.b_prime is None else args.b_prime
    gm = GenerativeModel(m, args.seed)
    emp = build_empirical_model(gm, args.n, omega, b_prime, perturb_seed=args.seed + 1)
    out = args.out or _out_path(args, "emp.json")
    save_empirical(out, emp)
    print(json.dumps({"out": str(out), "queries": gm.query_count, "omega": omega, "b_prime": b_prime}))


def cmd_run_pd(args):
    from .core_mdp import mixture_values
    from .model_io import load_empirical
    from .primal_dual import run_primal_dual

    emp = load_empirical(args.emp)
    cfg = _preset(args, emp.gamma, emp.b)
    if abs(cfg.omega - emp.omega) > 1e-15 and args.mode != "manual":
        log.warning("empirical model was perturbed with omega=%r but the preset uses %r", emp.omega, cfg.omega)
    res = run_primal_dual(emp, cfg, record_trace=False if args.no_trace else None)
    vals = mixture_values(emp.as_cmdp(), res.mixture)
    out = {
        "config": cfg.to_dict(),
        "backend": res.backend,
        "v_reward_hat": vals.v_reward,
        "v_constraint_hat": vals.v_constraint,
        "dual_saturated": res.dual_saturated,
        "mixture": [{"weight": w, "actions": p.actions().tolist()} for w, p in res.mixture.members],
        "collapsed_policy": res.collapsed.probs.tolist(),
        "trace": res.trace.to_dict(include_iterations=not args.no_trace),
    }
    _emit(out, args.out or _out_path(args, "result.json"))


def cmd_hard_instance(args):
    from .hard_instance import (HardInstanceParams, InstanceVariant, build_hard_instance,
                                closed_form_optima, validate_params)
    from .model_io import save_cmdp

    p = HardInstanceParams(m=args.m, num_actions=args.actions, gamma=args.gamma, b=args.b,
                           zeta=args.zeta, x=args.x, epsilon=args.epsilon)
    rep = validate_params(p)
    if args.report:
        d = rep.to_dict()
        if rep.valid:
            d["v_null"], d["v_alt"] = closed_form_optima(p)
        print(json.dumps(d, indent=1))
    if not rep.valid:
        raise CmdpInputError("invalid hard-instance parameters: " + "; ".join(rep.violations))
    out = args.out or (None if args.report else _out_path(args, "model.json"))
    if out:
        save_cmdp(out, build_hard_instance(p, InstanceVariant.parse(args.variant)))


def cmd_estimate_zeta(args):
    from .model_io import load_cmdp
    from .sampling import GenerativeModel
    from .zeta_estimator import estimate_zeta

    m = load_cmdp(args.model)
    est = estimate_zeta(GenerativeModel(m, args.seed), args.b, args.delta, args.kappa, args.max_rounds)
    print(json.dumps(est.to_dict(), indent=1))
    return 0 if est.halted else 3


def cmd_sweep(args):
    from .harness import ExperimentConfig, run_sweep, summarize

    try:
        raw = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CmdpInputError(f"{args.config}: {exc}") from None
    cfg = ExperimentConfig.from_dict(raw)
    if args.threads:
        cfg.threads = args.threads
    if cfg.out_csv is None:
        cfg.out_csv = str(_out_path(args, "sweep.csv"))
    records = run_sweep(cfg)
    print(json.dumps({"csv": cfg.out_csv, "summary": summarize(records, cfg.delta)}, indent=1))


def cmd_plot(args):
    from .harness import emit_plot

    slope = emit_plot(args.csv, args.out or _out_path(args, "sweep.svg"))
    print(json.dumps({"slope": slope}))


def build_parser():
    ap = argparse.ArgumentParser(prog="cmdplab", description="Sample-based CMDP planning toolkit.")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out-dir", default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="exact LP solution of a CMDP file")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    def preset_flags(p, mode_required):
        p.add_argument("--mode", choices=["relaxed", "strict", "manual"], required=mode_required)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--delta", type=float, default=0.1)
        p.add_argument("--zeta", type=float)
        p.add_argument("--kappa", type=float, default=1.0)
        p.add_argument("--t-cap", type=int)
        p.add_argument("--omega", type=float)
        p.add_argument("--b-prime", type=float)
        p.add_argument("--U", type=float)
        p.add_argument("--eps-net", type=float)
        p.add_argument("--T", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--eps-opt", type=float)

    p = sub.add_parser("sample", help="draw an empirical model from a CMDP file")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    preset_flags(p, False)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("run-pd", help="run the primal-dual planner on an empirical model")
    p.add_argument("--emp", required=True)
    p.add_argument("--out")
    p.add_argument("--no-trace", action="store_true", help="omit per-iteration records")
    preset_flags(p, True)
    p.set_defaults(func=cmd_run_pd)

    p = sub.add_parser("hard-instance", help="build a lower-bound instance")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--actions", type=int, default=2)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--b", type=float, default=0.5)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--x", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--variant", default="null", help="'null' or 'i,a'")
    p.add_argument("--out")
    p.add_argument("--report", action="store_true", help="print derived quantities and optima")
    p.set_defaults(func=cmd_hard_instance)

    p = sub.add_parser("estimate-zeta", help="estimate the Slater constant by sampling")
    p.add_argument("--model", required=True)
    p.add_argument("--b", type=float)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=4.0)
    p.add_argument("--max-rounds", type=int, default=30)
    p.set_defaults(func=cmd_estimate_zeta)

    p = sub.add_parser("sweep", help="run a seeded sample-size sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="log-log plot of a sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.verb in ("run-pd", "sample") and args.mode in ("relaxed", "strict") and args.epsilon is None:
        print(f"cmdplab {args.verb}: --epsilon is required in {args.mode} mode", file=sys.stderr)
        return 2
    try:
        rc = args.func(args)
    except CmdpInputError as exc:
        print(f"cmdplab {args.verb}: {exc}", file=sys.stderr)
        return 2
    except PlannerError as exc:
        print(f"cmdplab {args.verb}: planner failure: {exc}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
