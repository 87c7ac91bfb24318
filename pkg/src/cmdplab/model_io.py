"""JSON reading and writing for CMDPs and empirical models.

A CMDP file looks like::

    {"transitions": [[[...S floats...] x A] x S],
     "rewards": [[...A...] x S], "constraints": [[...A...] x S],
     "b": 0.9, "rho": [...S...], "gamma": 0.5}

Errors name the offending field path and, when it can be found, the line of
its key in the file.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .core_mdp import PROB_TOL, Cmdp
from .errors import CmdpInputError
from .sampling import EmpiricalModel

REQUIRED = ("transitions", "rewards", "constraints", "b", "rho", "gamma")


def _key_line(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _fail(path, field, msg, text):
    line = _key_line(text, field.split("[")[0])
    where = f"{path}:{line}" if line else str(path)
    raise CmdpInputError(f"{where}: {field}: {msg}")


def _array(d, field, ndim, path, text):
    try:
        arr = np.array(d[field], dtype=float)
    except (ValueError, TypeError):
        _fail(path, field, "must be a rectangular array of numbers", text)
    if arr.ndim != ndim:
        _fail(path, field, f"expected {ndim}-d array, got shape {arr.shape}", text)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        idx = "".join(f"[{i}]" for i in bad[0])
        _fail(path, field + idx, "non-finite value", text)
    return arr


def cmdp_from_dict(d, path="<dict>", text=None) -> Cmdp:
    if not isinstance(d, dict):
        raise CmdpInputError(f"{path}: top level must be an object")
    for key in REQUIRED:
        if key not in d:
            _fail(path, key, "missing required field", text)
    P = _array(d, "transitions", 3, path, text)
    S = P.shape[0]
    if P.shape[2] != S:
        _fail(path, "transitions", f"shape {P.shape} is not [S][A][S]", text)
    neg = np.argwhere(P < 0)
    if neg.size:
        s, a, t = neg[0]
        _fail(path, f"transitions[{s}][{a}][{t}]", f"negative probability {P[s, a, t]!r}", text)
    sums = P.sum(axis=2)
    off = np.argwhere(np.abs(sums - 1) > PROB_TOL * S)
    if off.size:
        s, a = off[0]
        _fail(path, f"transitions[{s}][{a}]", f"row sums to {sums[s, a]!r}, expected 1", text)
    A = P.shape[1]
    r = _array(d, "rewards", 2, path, text)
    c = _array(d, "constraints", 2, path, text)
    for name, arr in (("rewards", r), ("constraints", c)):
        if arr.shape != (S, A):
            _fail(path, name, f"shape {arr.shape}, expected ({S}, {A})", text)
    rho = _array(d, "rho", 1, path, text)
    if rho.shape != (S,):
        _fail(path, "rho", f"length {rho.size}, expected {S}", text)
    if np.any(rho < 0) or abs(rho.sum() - 1) > PROB_TOL * S:
        _fail(path, "rho", "must be a probability vector", text)
    for key in ("b", "gamma"):
        if not isinstance(d[key], (int, float)) or isinstance(d[key], bool):
            _fail(path, key, "must be a number", text)
    gamma = float(d["gamma"])
    if not (0 <= gamma < 1):
        _fail(path, "gamma", f"must lie in [0, 1), got {gamma!r}", text)
    extra = {k: float(d[k]) for k in ("r_max", "c_max") if k in d}
    try:
        return Cmdp(P, r, c, float(d["b"]), rho, gamma, **extra)
    except CmdpInputError as exc:
        raise CmdpInputError(f"{path}: {exc}") from None


def cmdp_to_dict(m: Cmdp):
    return {
        "transitions": m.transitions.tolist(),
        "rewards": m.rewards.tolist(),
        "constraints": m.constraints.tolist(),
        "b": m.b,
        "rho": m.rho.tolist(),
        "gamma": m.gamma,
        "r_max": m.r_max,
        "c_max": m.c_max,
    }


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CmdpInputError(f"{path}: cannot read: {exc.strerror}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise CmdpInputError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None


def load_cmdp(path) -> Cmdp:
    d, text = _read_json(path)
    return cmdp_from_dict(d, path, text)


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def save_cmdp(path, m: Cmdp):
    write_json(path, cmdp_to_dict(m))


def load_empirical(path) -> EmpiricalModel:
    d, _ = _read_json(path)
    return EmpiricalModel.from_dict(d)


def save_empirical(path, emp: EmpiricalModel):
    write_json(path, emp.to_dict())
