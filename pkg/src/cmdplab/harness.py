"""Random instances, seeded sample-size sweeps and their CSV/plot outputs."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core_mdp import Cmdp, Policy, evaluate_policy, mixture_values, solve_mdp, t1_cmdp
from .errors import CmdpInputError
from .hard_instance import HardInstanceParams, InstanceVariant, build_hard_instance
from .lp_oracle import max_value, slater_constant, solve_cmdp_exact
from .primal_dual import apply_t_cap, epsilon_for_budget, preset_relaxed, preset_strict, run_primal_dual
from .sampling import GenerativeModel, build_empirical_model
from .zeta_estimator import estimate_zeta

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "seed", "N", "epsilon", "queries_used", "v_reward_true", "v_constraint_true", "v_reward_opt",
    "reward_gap", "constraint_violation", "relaxed_ok", "strict_ok", "dual_saturated", "status",
)
# V_c >= b - STRICT_TOL counts as zero violation (absorbs floating-point noise)
STRICT_TOL = 1e-9


def random_cmdp(S, A, gamma, seed, slater_min=0.3, opposed=False) -> Cmdp:
    """Dirichlet(1) transitions, U[0,1] rewards and constraints, Slater constant ``slater_min``.

    With ``opposed`` the constraint signal is ``1 - r``, so reward and
    constraint pull in opposite directions as in T1.
    """
    if S < 1 or A < 1:
        raise CmdpInputError(f"need S, A >= 1, got S={S}, A={A}")
    if slater_min < 0:
        raise CmdpInputError(f"slater_min must be >= 0, got {slater_min!r}")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(S), size=(S, A))
    r = rng.uniform(0, 1, size=(S, A))
    c = rng.uniform(0, 1, size=(S, A))
    if opposed:
        c = 1.0 - r
    rho = rng.dirichlet(np.ones(S))
    base = Cmdp(P, r, c, 0.0, rho, gamma)
    vc_max = max_value(base, c)
    if slater_min > vc_max:
        raise CmdpInputError(f"slater_min={slater_min!r} exceeds max constraint value {vc_max!r}")
    return base.with_threshold(vc_max - slater_min)


def unconstrained_violation(m: Cmdp) -> float:
    """``b - V_c`` of the reward-greedy policy: how far ignoring the constraint lands."""
    actions, _ = solve_mdp(m.transitions, m.rewards, m.gamma)
    return m.b - evaluate_policy(m, Policy.deterministic(actions, m.num_actions)).v_constraint


def binding_seeds(count, S, A, gamma, slater_min, min_lambda=0.5, start=0, max_tries=1000,
                  opposed=False, min_tension=None):
    """First ``count`` seeds whose ``random_cmdp`` has multiplier ``lambda* >= min_lambda``.

    Sweeps that measure the effect of the threshold shift need instances
    where the constraint actually binds. ``min_tension`` additionally asks
    for ``unconstrained_violation >= min_tension``, which keeps the error of
    a loose planner from saturating at small budgets.
    """
    seeds = []
    for seed in range(start, start + max_tries):
        m = random_cmdp(S, A, gamma, seed, slater_min, opposed)
        if min_tension is not None and unconstrained_violation(m) < min_tension:
            continue
        sol = solve_cmdp_exact(m)
        if sol.feasible and sol.lambda_star >= min_lambda:
            seeds.append(seed)
            if len(seeds) == count:
                return seeds
    raise CmdpInputError(f"found only {len(seeds)} binding instances in {max_tries} seeds")


def build_model(spec: dict) -> Cmdp:
    """Instantiate a model source: ``random``, ``t1``, ``hard`` or ``file``."""
    kind = spec.get("kind")
    if kind == "random":
        return random_cmdp(spec["S"], spec["A"], spec["gamma"], spec["seed"], spec.get("slater_min", 0.3),
                           bool(spec.get("opposed", False)))
    if kind == "t1":
        return t1_cmdp(b=spec.get("b", 0.9), gamma=spec.get("gamma", 0.5))
    if kind == "hard":
        keys = ("m", "num_actions", "gamma", "b", "zeta", "x", "c1", "c2", "c3", "epsilon")
        params = HardInstanceParams(**{k: spec[k] for k in keys if k in spec})
        return build_hard_instance(params, InstanceVariant.parse(spec.get("variant", "null")))
    if kind == "file":
        from .model_io import load_cmdp
        return load_cmdp(spec["path"])
    raise CmdpInputError(f"model.kind must be random, t1, hard or file; got {kind!r}")


@dataclass
class ExperimentConfig:
    mode: str
    model: dict
    n_schedule: list
    seeds: list
    delta: float = 0.1
    epsilon: float | None = None  # None: derive from N as the budget-matched accuracy
    kappa: float = 1.0
    t_cap: int | None = None
    estimate_zeta: bool = False
    kappa_zeta: float = 4.0
    threads: int = 1
    out_csv: str | None = None

    def __post_init__(self):
        if self.mode not in ("relaxed", "strict"):
            raise CmdpInputError(f"mode must be relaxed or strict, got {self.mode!r}")
        ns = [int(n) for n in self.n_schedule]
        if any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise CmdpInputError(f"N schedule must be positive and strictly increasing, got {ns}")
        self.n_schedule = ns
        if not self.seeds:
            raise CmdpInputError("seeds must be nonempty")
        self.seeds = [int(s) for s in self.seeds]
        if not (0 < self.delta < 1):
            raise CmdpInputError(f"delta must lie in (0, 1), got {self.delta!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "n_schedule" not in d and "n_geometric" in d:
            g = d.pop("n_geometric")
            d["n_schedule"] = [int(round(g["start"] * g["ratio"] ** k)) for k in range(g["count"])]
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise CmdpInputError(f"unknown experiment config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class RunRecord:
    seed: int
    N: int
    epsilon: float
    queries_used: int
    v_reward_true: float
    v_constraint_true: float
    v_reward_opt: float
    reward_gap: float
    constraint_violation: float
    relaxed_ok: bool
    strict_ok: bool
    dual_saturated: bool = False
    status: str = "ok"
    wall_time: float = field(default=0.0, compare=False)

    def row(self):
        out = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


def _cell_seeds(seed, n):
    ss = np.random.SeedSequence([int(seed), int(n)])
    master, perturb = ss.generate_state(2, dtype=np.uint64)
    return int(master), int(perturb)


@dataclass(frozen=True)
class _Context:
    cfg: ExperimentConfig
    truth: Cmdp
    v_opt: float
    zeta: float | None


def _run_cell(ctx: _Context, seed: int, n: int) -> RunRecord:
    cfg, truth = ctx.cfg, ctx.truth
    t0 = time.perf_counter()
    master, perturb = _cell_seeds(seed, n)
    gm = GenerativeModel(truth, master)
    eps = math.nan
    try:
        zeta = ctx.zeta
        if cfg.mode == "strict" and cfg.estimate_zeta:
            est = estimate_zeta(GenerativeModel(truth, master ^ 0x5A5A5A5A), truth.b, cfg.delta,
                                cfg.kappa_zeta)
            if not est.halted:
                raise RuntimeError("zeta estimate did not halt")
            zeta = est.zeta_hat
            extra_queries = est.total_queries
        else:
            extra_queries = 0
        gamma = truth.gamma
        eps = cfg.epsilon if cfg.epsilon is not None else epsilon_for_budget(
            n, cfg.delta, gamma, cfg.mode, zeta, cfg.kappa)
        if cfg.mode == "relaxed":
            pd_cfg = preset_relaxed(eps, cfg.delta, gamma, truth.b, cfg.kappa)
        else:
            pd_cfg = preset_strict(eps, cfg.delta, gamma, truth.b, zeta, cfg.kappa)
        pd_cfg = apply_t_cap(pd_cfg, cfg.t_cap, gamma, warn=False)
        emp = build_empirical_model(gm, n, pd_cfg.omega, pd_cfg.b_prime, perturb)
        res = run_primal_dual(emp, pd_cfg, record_trace=False)
        vals = mixture_values(truth, res.mixture)
        gap = ctx.v_opt - vals.v_reward
        viol = max(0.0, truth.b - vals.v_constraint)
        rec = RunRecord(
            seed=seed, N=n, epsilon=float(eps), queries_used=gm.query_count + extra_queries,
            v_reward_true=vals.v_reward, v_constraint_true=vals.v_constraint, v_reward_opt=ctx.v_opt,
            reward_gap=gap, constraint_violation=viol,
            relaxed_ok=bool(gap <= eps and vals.v_constraint >= truth.b - eps),
            strict_ok=bool(gap <= eps and vals.v_constraint >= truth.b - STRICT_TOL),
            dual_saturated=res.dual_saturated,
        )
    except Exception as exc:  # recorded per run; the sweep continues
        log.warning("run seed=%s N=%s failed: %s", seed, n, exc)
        rec = RunRecord(seed, n, float(eps), gm.query_count, math.nan, math.nan, ctx.v_opt, math.nan,
                        math.nan, False, False, False, f"error: {type(exc).__name__}: {exc}")
    rec.wall_time = time.perf_counter() - t0
    return rec


def _run_cell_args(args):
    return _run_cell(*args)


def run_sweep(cfg: ExperimentConfig, truth: Cmdp | None = None) -> list[RunRecord]:
    truth = truth if truth is not None else build_model(cfg.model)
    sol = solve_cmdp_exact(truth)
    if not sol.feasible:
        raise CmdpInputError("the true CMDP is infeasible; nothing to sweep")
    zeta = slater_constant(truth) if cfg.mode == "strict" else None
    ctx = _Context(cfg, truth, sol.optimal_value, zeta)
    if cfg.t_cap is not None:
        log.warning("sweep runs are capped at T=%d iterations; the preset accuracy guarantee "
                    "does not apply to capped runs", cfg.t_cap)
    cells = [(ctx, s, n) for s in cfg.seeds for n in cfg.n_schedule]
    if cfg.threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            records = list(pool.map(_run_cell_args, cells, chunksize=max(1, len(cells) // (4 * cfg.threads))))
    else:
        records = [_run_cell(*c) for c in cells]
    if cfg.out_csv:
        write_outputs(records, cfg.out_csv, cfg.delta)
    return records


def summarize(records, delta):
    """Per-N success frequencies and medians."""
    out = []
    for n in sorted({r.N for r in records}):
        rs = [r for r in records if r.N == n]
        gaps = [r.reward_gap for r in rs if r.status == "ok"]
        viols = [r.constraint_violation for r in rs if r.status == "ok"]
        out.append({
            "N": n, "runs": len(rs),
            "relaxed_freq": sum(r.relaxed_ok for r in rs) / len(rs),
            "strict_freq": sum(r.strict_ok for r in rs) / len(rs),
            "median_reward_gap": float(np.median(gaps)) if gaps else math.nan,
            "median_constraint_violation": float(np.median(viols)) if viols else math.nan,
            "target": 1 - 4 * delta,
        })
    return out


def write_csv(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow(r.row())


def write_outputs(records, csv_path, delta):
    """Main CSV, plus ``*.summary.csv`` (per-N aggregates) and ``*.timings.csv``."""
    csv_path = Path(csv_path)
    write_csv(records, csv_path)
    stem = csv_path.with_suffix("")
    summary = summarize(records, delta)
    with open(f"{stem}.summary.csv", "w", newline="") as fh:
        cols = ["N", "runs", "relaxed_freq", "strict_freq", "median_reward_gap",
                "median_constraint_violation", "target"]
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in summary:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    with open(f"{stem}.timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "N", "wall_time"])
        for r in records:
            w.writerow([r.seed, r.N, repr(r.wall_time)])


def read_csv(path):
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CmdpInputError(f"{path}: cannot read: {exc.strerror}") from None
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise CmdpInputError(f"{path}: header does not match the sweep CSV columns")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise CmdpInputError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        try:
            rec = dict(zip(CSV_COLUMNS, row))
            out.append({"N": int(rec["N"]), "reward_gap": float(rec["reward_gap"]),
                        "constraint_violation": float(rec["constraint_violation"]),
                        "status": rec["status"]})
        except ValueError as exc:
            raise CmdpInputError(f"{path}:{lineno}: {exc}") from None
    return out


def fit_loglog_slope(ns, values):
    """Least-squares slope of ``log(values)`` on ``log(ns)``; nonpositive points are dropped."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (v > 0) & np.isfinite(v) & (ns > 0)
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(ns[keep]), np.log(v[keep]), 1)
    return float(slope)


def emit_plot(csv_path, out_svg):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in read_csv(csv_path) if r["status"] == "ok"]
    ns = sorted({r["N"] for r in rows})
    gap = [float(np.median([r["reward_gap"] for r in rows if r["N"] == n])) for n in ns]
    viol = [float(np.median([r["constraint_violation"] for r in rows if r["N"] == n])) for n in ns]
    with matplotlib.rc_context({"svg.hashsalt": "cmdplab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("samples per (s, a)")
        ax.set_ylabel("median over seeds")
        slope = math.nan
        if ns:
            for ys, label in ((gap, "reward gap"), (viol, "constraint violation")):
                xs = [n for n, y in zip(ns, ys) if y > 0]
                if xs:
                    ax.plot(xs, [y for y in ys if y > 0], marker="o", label=label)
            slope = fit_loglog_slope(ns, gap)
            ax.legend(loc="best", fontsize=8)
        else:
            ax.set_xlim(1, 10)
            ax.set_ylim(1e-3, 1)
        ax.set_title(f"fitted reward-gap slope: {slope:.3f}" if math.isfinite(slope) else "no data")
        fig.tight_layout()
        Path(out_svg).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_svg, format="svg", metadata={"Date": None})
        plt.close(fig)
    return slope
