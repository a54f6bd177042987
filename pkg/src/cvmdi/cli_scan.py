"""Parameter sweeps, contour data, oracle validation and the `cvmdi` CLI.

Design goals: every default equals the reference operating point of the
figure sweeps; identical configuration produces byte-identical data files
(timestamps live only in the side-car manifest); failed grid points become
NaN rows plus a manifest entry instead of aborting the sweep.

Subcommands:
    prob-sweep    detection probability along an axis (default: tau)
    keyrate       key rate vs distance for a list of states
    grid          dense K(d, L) grid plus per-d maximum distance
    max-distance  bisection for the largest L with K >= target
    noise-sweep   key rate vs detector efficiency
    cov-dump      covariance interchange documents
    validate      closed forms vs the truncated-Fock oracle

Exit codes: 0 success, 1 usage error, 2 numerical/physicality error,
3 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fock_oracle
from .errors import (
    ConvergenceError,
    CvmdiError,
    DegenerateStateError,
    InternalConsistencyError,
    NumericalDomainError,
    ParameterError,
    PhysicalityError,
)
from .keyrate import ChannelParams, keyrate
from .serialize import format_float, to_json, write_json
from .state_engine import StateSpec, classify, covariance, covariance_document, probability

TOOL_VERSION = "0.1.0"

MODES = ("prob-vs-tau", "keyrate-vs-distance", "grid-d-L", "keyrate-vs-eta",
         "covariance-dump", "oracle-validate")

STATE_AXES = {"tau", "d", "r", "v_a"}
CHANNEL_AXES = {"L_AC", "L_BC", "eta", "v_el", "eps_A", "eps_B", "beta", "loss_rate"}


# --------------------------------------------------------------------------
# sweep description
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AxisSpec:
    name: str
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def validate(self):
        if self.name not in STATE_AXES | CHANNEL_AXES:
            raise ParameterError(
                f"unrecognized axis variable {self.name!r}; "
                f"known: {sorted(STATE_AXES | CHANNEL_AXES)}")
        if self.count < 2:
            raise ParameterError(f"axis {self.name}: count must be >= 2")
        if not self.start < self.stop:
            raise ParameterError(f"axis {self.name}: start must be < stop")
        if self.spacing not in ("linear", "log"):
            raise ParameterError(f"axis {self.name}: spacing must be linear or log")
        if self.spacing == "log" and self.start <= 0:
            raise ParameterError(f"axis {self.name}: log spacing needs start > 0")

    def values(self):
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepSpec:
    mode: str
    state: dict          # fixed state defaults (v_a or r, d, tau)
    channel: dict        # ChannelParams fields
    state_list: tuple    # entries: (m, n) tuples or the string "tmsv"
    axis1: AxisSpec | None
    axis2: AxisSpec | None
    output: str
    fmt: str = "csv"
    workers: int = 1
    target_keyrate: float = 1e-4
    seedless: bool = False
    oracle: dict = field(default_factory=dict)

    def validate(self):
        if self.mode not in MODES:
            raise ParameterError(f"unknown sweep mode {self.mode!r}")
        if self.fmt not in ("csv", "json"):
            raise ParameterError(f"format must be csv or json, got {self.fmt!r}")
        for axis in (self.axis1, self.axis2):
            if axis is not None:
                axis.validate()
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if not self.state_list:
            raise ParameterError("state list must not be empty")


@dataclass
class RunManifest:
    tool_version: str
    mode: str
    config: dict
    wallclock_s: float
    rows: int
    failures: list
    data_sha256: str
    seedless_verified: bool | None = None

    def as_dict(self):
        return {
            "tool_version": self.tool_version,
            "mode": self.mode,
            "config": self.config,
            "wallclock_s": self.wallclock_s,
            "rows": self.rows,
            "failures": self.failures,
            "data_sha256": self.data_sha256,
            "seedless_verified": self.seedless_verified,
        }


# --------------------------------------------------------------------------
# config plumbing
# --------------------------------------------------------------------------

def default_config(mode):
    """Reference configuration; figure-sweep defaults for every mode."""
    cfg = {
        "mode": mode,
        "state": {"v_a": 50.0, "d": 2.0, "tau": 0.9},
        "channel": {"L_AC": 0.0, "L_BC": 0.0, "loss_rate": 0.2,
                    "eps_A": 0.002, "eps_B": 0.002, "eta": 1.0, "v_el": 0.0,
                    "beta": 0.96, "gain_policy": "paper-optimal", "gain": 0.0},
        "states": [[0, 0]],
        "axis1": None,
        "axis2": None,
        "target_keyrate": 1e-4,
        "workers": 1,
        "format": "csv",
        "out": None,
        "oracle": {"rel_step": 10, "cutoff": None},
    }
    if mode == "prob-vs-tau":
        cfg["axis1"] = {"name": "tau", "start": 0.0, "stop": 0.995,
                        "count": 200, "spacing": "linear"}
        cfg["states"] = [[0, 0], [1, 1], [2, 2]]
    elif mode == "keyrate-vs-distance":
        cfg["axis1"] = {"name": "L_AC", "start": 0.0, "stop": 80.0,
                        "count": 81, "spacing": "linear"}
        cfg["states"] = ["tmsv", [0, 0], [1, 1], [2, 2]]
    elif mode == "grid-d-L":
        cfg["axis1"] = {"name": "d", "start": 0.0, "stop": 6.0,
                        "count": 13, "spacing": "linear"}
        cfg["axis2"] = {"name": "L_AC", "start": 0.0, "stop": 80.0,
                        "count": 17, "spacing": "linear"}
        cfg["states"] = [[0, 0]]
    elif mode == "keyrate-vs-eta":
        cfg["axis1"] = {"name": "eta", "start": 0.98, "stop": 1.0,
                        "count": 21, "spacing": "linear"}
        cfg["channel"]["L_AC"] = 10.0
        cfg["states"] = ["tmsv", [0, 0], [0, 1], [1, 0]]
    elif mode == "covariance-dump":
        cfg["format"] = "json"
    elif mode == "oracle-validate":
        cfg["oracle"].update({
            "r_values": [0.0, 0.2, 0.5],
            "d_values": [0.0, 0.5, 1.0],
            "tau_values": [0.3, 0.7, 0.95],
            "orders": [0, 1, 2],
        })
    return cfg


def _deep_update(base, extra):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _parse_set(expr):
    if "=" not in expr:
        raise ParameterError(f"--set expects key=value, got {expr!r}")
    key, raw = expr.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings stay strings
    return key.strip(), value


def _assign_path(cfg, dotted, value):
    parts = dotted.split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            node[part] = {}
        node = node[part]
    node[parts[-1]] = value


def resolve_config(mode, config_path=None, set_exprs=(), out=None, fmt=None,
                   workers=None, seedless=False):
    cfg = default_config(mode)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            _deep_update(cfg, json.load(fh))
    for expr in set_exprs:
        key, value = _parse_set(expr)
        _assign_path(cfg, key, value)
    if out is not None:
        cfg["out"] = out
    if fmt is not None:
        cfg["format"] = fmt
    if workers is not None:
        cfg["workers"] = workers
    cfg["seedless"] = bool(seedless)
    return cfg


def _axis_from_dict(doc):
    if doc is None:
        return None
    return AxisSpec(name=str(doc["name"]), start=float(doc["start"]),
                    stop=float(doc["stop"]), count=int(doc["count"]),
                    spacing=str(doc.get("spacing", "linear")))


def _states_from_config(entries):
    parsed = []
    for entry in entries:
        if isinstance(entry, str):
            if entry.lower() != "tmsv":
                raise ParameterError(f"unknown state entry {entry!r}")
            parsed.append("tmsv")
        else:
            m, n = entry
            parsed.append((int(m), int(n)))
    return tuple(parsed)


def sweep_from_config(cfg):
    if cfg.get("out") is None:
        raise ParameterError("an output path is required (--out)")
    spec = SweepSpec(
        mode=cfg["mode"],
        state=dict(cfg["state"]),
        channel=dict(cfg["channel"]),
        state_list=_states_from_config(cfg["states"]),
        axis1=_axis_from_dict(cfg.get("axis1")),
        axis2=_axis_from_dict(cfg.get("axis2")),
        output=cfg["out"],
        fmt=cfg["format"],
        workers=int(cfg.get("workers", 1)),
        target_keyrate=float(cfg.get("target_keyrate", 1e-4)),
        seedless=bool(cfg.get("seedless", False)),
        oracle=dict(cfg.get("oracle", {})),
    )
    spec.validate()
    return spec


# --------------------------------------------------------------------------
# point evaluation
# --------------------------------------------------------------------------

def _spec_from_state_dict(state, m, n):
    state = dict(state)
    tau = float(state.get("tau", 0.9))
    d = float(state.get("d", 0.0))
    if "r" in state and state["r"] is not None:
        return StateSpec(r=float(state["r"]), d=d, tau=tau, m=m, n=n)
    return StateSpec.from_variance(float(state.get("v_a", 50.0)), d=d, tau=tau, m=m, n=n)


def _channel_from_dict(channel):
    return ChannelParams(**channel)


def _apply_axis(state, channel, name, value):
    if name in STATE_AXES:
        state = dict(state)
        if name == "v_a":
            state.pop("r", None)
            state["v_a"] = float(value)
        elif name == "r":
            state.pop("v_a", None)
            state["r"] = float(value)
        else:
            state[name] = float(value)
        return state, channel
    if name in CHANNEL_AXES:
        channel = dict(channel)
        channel[name] = float(value)
        return state, channel
    raise ParameterError(f"unrecognized axis variable {name!r}")


def _entry_label(entry):
    if entry == "tmsv":
        return "TMSV", None, None
    m, n = entry
    label = classify(StateSpec(r=0.0, d=0.0, tau=0.5, m=m, n=n))
    return f"({m},{n})-{label}", m, n


def _keyrate_outputs(state_dict, channel_dict, entry):
    if entry == "tmsv":
        spec = _spec_from_state_dict(state_dict, 0, 0)
        breakdown = keyrate(spec, _channel_from_dict(channel_dict), tmsv_baseline=True)
    else:
        m, n = entry
        spec = _spec_from_state_dict(state_dict, m, n)
        breakdown = keyrate(spec, _channel_from_dict(channel_dict))
    return breakdown


# --------------------------------------------------------------------------
# max distance
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxDistanceResult:
    km: float
    capped: bool        # True when K(0) <= target already
    target: float


def max_distance(spec, params, k_target, tmsv_baseline=False, l_max=2000.0):
    """Largest L_AC with K >= k_target, bisected to |dL| <= 0.01 km.

    Returns 0 km with the capped flag when even the zero-distance rate is
    at or below target.  A violated bracket after bisection (the rate is
    expected to fall monotonically with distance) raises
    InternalConsistencyError as a model-violation diagnostic.
    """
    def rate(l_ac):
        return keyrate(spec, replace(params, L_AC=l_ac),
                       tmsv_baseline=tmsv_baseline).K

    if rate(0.0) <= k_target:
        return MaxDistanceResult(km=0.0, capped=True, target=k_target)

    lo, hi = 0.0, 1.0
    while rate(hi) >= k_target:
        lo, hi = hi, hi * 2.0
        if hi > l_max:
            raise InternalConsistencyError(
                f"key rate stayed above {k_target} beyond {l_max} km; "
                "the loss model cannot behave this way")
    while hi - lo > 0.01:
        mid = 0.5 * (lo + hi)
        if rate(mid) >= k_target:
            lo = mid
        else:
            hi = mid
    result = 0.5 * (lo + hi)

    below = max(result - 0.1, 0.0)
    if rate(below) < k_target or rate(result + 0.1) > k_target:
        raise InternalConsistencyError(
            f"non-monotonic key rate detected around L = {result:.2f} km; "
            "max-distance bisection is not meaningful here")
    return MaxDistanceResult(km=result, capped=False, target=k_target)


# --------------------------------------------------------------------------
# oracle validation
# --------------------------------------------------------------------------

def validate_oracle(oracle_cfg, abs_tol=1e-6):
    """Compare closed-form P/mean/covariance against the Fock oracle.

    Returns (rows, all_passed).  Each row reports the point, the largest
    absolute deviation across probability, mean and covariance entries, and
    a pass flag that also requires the oracle's own convergence check.

    Points where the detection is impossible (both sides give P below
    1e-12, e.g. heralding n > m photons out of an unsqueezed vacuum) have
    no post-detection state; only the probabilities are compared there.
    """
    r_values = oracle_cfg.get("r_values", [0.0, 0.2, 0.5])
    d_values = oracle_cfg.get("d_values", [0.0, 0.5, 1.0])
    tau_values = oracle_cfg.get("tau_values", [0.3, 0.7, 0.95])
    orders = oracle_cfg.get("orders", [0, 1, 2])
    rel_step = int(oracle_cfg.get("rel_step", 10))
    forced_cutoff = oracle_cfg.get("cutoff")

    rows = []
    all_passed = True
    for m, n, r, d, tau in itertools.product(orders, orders, r_values,
                                             d_values, tau_values):
        spec = StateSpec(r=float(r), d=float(d), tau=float(tau), m=int(m), n=int(n))
        row = {"r": float(r), "d": float(d), "tau": float(tau),
               "m": int(m), "n": int(n)}
        try:
            if forced_cutoff is None:
                p_oracle, mean_o, cov_o, reports = fock_oracle.oracle_point(
                    r, d, tau, m, n, rel_step=rel_step)
            else:
                cut = int(forced_cutoff)
                state = fock_oracle.build_tmsc(r, d, cut, enforce_heuristic=False)
                projected, p_oracle = fock_oracle.beamsplitter_project(state, tau, m, n)
                mean_o, cov_o = fock_oracle.moments(projected)

                def prob_at(c, _r=r, _d=d, _tau=tau, _m=m, _n=n):
                    st = fock_oracle.build_tmsc(_r, _d, c, enforce_heuristic=False)
                    return fock_oracle.beamsplitter_project(st, _tau, _m, _n)[1]

                reports = [fock_oracle.converge(prob_at, cut, rel_step,
                                                quantity=f"P({m},{n})")]
            p_closed = probability(spec)
            deviation = abs(p_closed - p_oracle)
            if p_closed > 1e-12 or p_oracle > 1e-12:
                cov_closed = covariance(spec)
                deviation = max(deviation,
                                float(np.max(np.abs(cov_closed.mean - mean_o))))
                deviation = max(deviation,
                                float(np.max(np.abs(cov_closed.matrix - cov_o))))
            converged = all(rep.passed for rep in reports)
            passed = bool(deviation <= abs_tol and converged)
            row.update({"max_abs_dev": deviation, "converged": converged,
                        "passed": passed, "error": ""})
        except CvmdiError as exc:
            row.update({"max_abs_dev": float("nan"), "converged": False,
                        "passed": False, "error": str(exc)})
        all_passed = all_passed and row["passed"]
        rows.append(row)
    return rows, all_passed


# --------------------------------------------------------------------------
# sweep execution
# --------------------------------------------------------------------------

_UNITS = {
    "tau": "1", "d": "SNU", "r": "1", "v_a": "SNU",
    "L_AC": "km", "L_BC": "km", "eta": "1", "v_el": "SNU",
    "eps_A": "SNU", "eps_B": "SNU", "beta": "1", "loss_rate": "dB/km",
}


def _axis_header(axis):
    return f"{axis.name} [{_UNITS.get(axis.name, '1')}]"


def _columns_for(spec):
    base = ["state [label]", "m [photons]", "n [photons]"]
    if spec.mode == "prob-vs-tau":
        return base + [_axis_header(spec.axis1), "probability [1]"]
    if spec.mode in ("keyrate-vs-distance", "keyrate-vs-eta"):
        cols = base + [_axis_header(spec.axis1)]
        if spec.axis2 is not None:
            cols.append(_axis_header(spec.axis2))
        return cols + ["probability [1]", "I_AB [bits/pulse]",
                       "chi_BE [bits/pulse]", "K [bits/pulse]"]
    if spec.mode == "grid-d-L":
        return base + [_axis_header(spec.axis1), _axis_header(spec.axis2),
                       "probability [1]", "I_AB [bits/pulse]",
                       "chi_BE [bits/pulse]", "K [bits/pulse]",
                       "max_distance [km]", "I_minus_chi_beta1_L50 [bits/pulse]"]
    raise ParameterError(f"mode {spec.mode!r} does not produce tabular sweeps")


def _evaluate_point(spec, entry, a1_value, a2_value):
    """One grid point -> list of output cell values (floats)."""
    state, channel = dict(spec.state), dict(spec.channel)
    if spec.axis1 is not None and a1_value is not None:
        state, channel = _apply_axis(state, channel, spec.axis1.name, a1_value)
    if spec.axis2 is not None and a2_value is not None:
        state, channel = _apply_axis(state, channel, spec.axis2.name, a2_value)

    if spec.mode == "prob-vs-tau":
        if entry == "tmsv":
            return [1.0]
        m, n = entry
        return [probability(_spec_from_state_dict(state, m, n))]

    breakdown = _keyrate_outputs(state, channel, entry)
    return [breakdown.probability, breakdown.I_AB, breakdown.chi_BE, breakdown.K]


def _grid_extras(spec, entry, a1_value):
    """Per-(state, d) columns of grid mode: max distance and the beta=1 gap."""
    state, channel = dict(spec.state), dict(spec.channel)
    state, channel = _apply_axis(state, channel, spec.axis1.name, a1_value)
    tmsv = entry == "tmsv"
    m, n = (0, 0) if tmsv else entry
    sspec = _spec_from_state_dict(state, m, n)
    params = _channel_from_dict(channel)
    md = max_distance(sspec, params, spec.target_keyrate, tmsv_baseline=tmsv)
    gap_breakdown = keyrate(sspec, replace(params, L_AC=50.0, beta=1.0),
                            tmsv_baseline=tmsv)
    gap = gap_breakdown.I_AB - gap_breakdown.chi_BE
    return md.km, gap


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(float(value))


def _render_csv(columns, rows):
    # csv.writer for RFC-4180 quoting: the state labels contain commas
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    return buf.getvalue()


def _render_json(spec, columns, rows):
    doc = {
        "mode": spec.mode,
        "columns": columns,
        "rows": [[(None if isinstance(v, float) and math.isnan(v) else v)
                  for v in row] for row in rows],
    }
    return to_json(doc) + "\n"


def run_sweep(spec):
    """Execute a sweep; write the data file and its manifest; return manifest.

    Grid completeness: exactly axis1.count * axis2.count * len(state_list)
    data rows, with per-point failures encoded as NaN cells.
    """
    spec.validate()
    started = time.time()
    failures = []

    if spec.mode == "covariance-dump":
        return _run_cov_dump(spec, started)
    if spec.mode == "oracle-validate":
        return _run_validate(spec, started)

    columns = _columns_for(spec)
    a1_values = list(spec.axis1.values()) if spec.axis1 is not None else [None]
    a2_values = list(spec.axis2.values()) if spec.axis2 is not None else [None]
    n_outputs = len(columns) - 3 - (1 if spec.axis1 is not None else 0) \
        - (1 if spec.axis2 is not None else 0)

    grid_extras = {}
    if spec.mode == "grid-d-L":
        n_outputs -= 2  # the two per-d columns are appended separately
        for entry in spec.state_list:
            for i, a1 in enumerate(a1_values):
                try:
                    grid_extras[(entry, i)] = _grid_extras(spec, entry, a1)
                except CvmdiError as exc:
                    grid_extras[(entry, i)] = (float("nan"), float("nan"))
                    failures.append({"point": f"{entry} d={a1}",
                                     "stage": "grid-extras", "error": str(exc)})

    points = [(entry, i, j)
              for entry in spec.state_list
              for i in range(len(a1_values))
              for j in range(len(a2_values))]

    def job(point):
        entry, i, j = point
        try:
            values = _evaluate_point(spec, entry, a1_values[i], a2_values[j])
            return values, None
        except CvmdiError as exc:
            return [float("nan")] * n_outputs, str(exc)

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(job, points))
    else:
        results = [job(p) for p in points]

    rows = []
    for point, (values, error) in zip(points, results):
        entry, i, j = point
        label, m, n = _entry_label(entry)
        row = [label, m, n]
        if spec.axis1 is not None:
            row.append(float(a1_values[i]))
        if spec.axis2 is not None:
            row.append(float(a2_values[j]))
        row.extend(values)
        if spec.mode == "grid-d-L":
            row.extend(grid_extras[(entry, i)])
        rows.append(row)
        if error is not None:
            failures.append({
                "point": {"state": label,
                          "axis1": float(a1_values[i]) if spec.axis1 else None,
                          "axis2": float(a2_values[j]) if spec.axis2 else None},
                "error": error,
            })

    text = _render_csv(columns, rows) if spec.fmt == "csv" \
        else _render_json(spec, columns, rows)
    return _finish_run(spec, started, text, len(rows), failures)


def _run_cov_dump(spec, started):
    docs = []
    failures = []
    for entry in spec.state_list:
        label, m, n = _entry_label(entry)
        try:
            if entry == "tmsv":
                sspec = _spec_from_state_dict(spec.state, 0, 0)
                from .state_engine import tmsc_covariance
                cov = tmsc_covariance(sspec.r, sspec.d)
                doc = {"spec": {**sspec.as_dict(), "family": "TMSV"},
                       "probability": 1.0,
                       "mean": [float(v) for v in cov.mean],
                       "sigma": [[float(v) for v in row] for row in cov.matrix]}
            else:
                sspec = _spec_from_state_dict(spec.state, m, n)
                doc = covariance_document(sspec)
                doc["spec"]["family"] = classify(sspec)
            docs.append(doc)
        except CvmdiError as exc:
            failures.append({"point": label, "error": str(exc)})
            docs.append({"spec": {"label": label}, "error": str(exc)})

    if spec.fmt == "json":
        text = to_json(docs if len(docs) > 1 else docs[0]) + "\n"
    else:
        columns = (["state [label]", "m [photons]", "n [photons]", "probability [1]"]
                   + [f"mean_{i} [SNU]" for i in range(4)]
                   + [f"sigma_{i}{j} [SNU]" for i in range(4) for j in range(4)])
        rows = []
        for entry, doc in zip(spec.state_list, docs):
            label, m, n = _entry_label(entry)
            if "error" in doc:
                rows.append([label, m, n] + [float("nan")] * 21)
                continue
            flat = [x for row in doc["sigma"] for x in row]
            rows.append([label, m, n, doc["probability"]] + doc["mean"] + flat)
        text = _render_csv(columns, rows)
    return _finish_run(spec, started, text, len(docs), failures)


def _run_validate(spec, started):
    rows, all_passed = validate_oracle(spec.oracle, abs_tol=1e-6)
    columns = ["r [1]", "d [SNU]", "tau [1]", "m [photons]", "n [photons]",
               "max_abs_dev [1]", "converged [bool]", "passed [bool]",
               "error [text]"]
    table = [[row["r"], row["d"], row["tau"], row["m"], row["n"],
              row["max_abs_dev"], str(row["converged"]), str(row["passed"]),
              row["error"].replace(",", ";")] for row in rows]
    text = _render_csv(columns, table) if spec.fmt == "csv" else to_json(
        {"mode": spec.mode, "rows": rows, "all_passed": all_passed}) + "\n"
    failures = [
        {"point": {k: row[k] for k in ("r", "d", "tau", "m", "n")},
         "error": row["error"] or f"deviation {row['max_abs_dev']}"}
        for row in rows if not row["passed"]]
    return _finish_run(spec, started, text, len(rows), failures,
                       extra_config={"all_passed": all_passed})


def _finish_run(spec, started, text, n_rows, failures, extra_config=None):
    data = text.encode("utf-8")
    try:
        with open(spec.output, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise ParameterError(f"cannot write output file {spec.output!r}: {exc}")

    config = _spec_config_dict(spec)
    if extra_config:
        config.update(extra_config)
    manifest = RunManifest(
        tool_version=TOOL_VERSION,
        mode=spec.mode,
        config=config,
        wallclock_s=time.time() - started,
        rows=n_rows,
        failures=failures,
        data_sha256=hashlib.sha256(data).hexdigest(),
    )
    write_json(spec.output + ".manifest.json", manifest.as_dict())
    return manifest


def _spec_config_dict(spec):
    return {
        "mode": spec.mode,
        "state": dict(spec.state),
        "channel": dict(spec.channel),
        "states": [list(e) if isinstance(e, tuple) else e for e in spec.state_list],
        "axis1": None if spec.axis1 is None else vars(spec.axis1),
        "axis2": None if spec.axis2 is None else vars(spec.axis2),
        "out": spec.output,
        "format": spec.fmt,
        "workers": spec.workers,
        "target_keyrate": spec.target_keyrate,
        "seedless": spec.seedless,
        "oracle": dict(spec.oracle),
    }


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------

_SUBCOMMAND_MODES = {
    "prob-sweep": "prob-vs-tau",
    "keyrate": "keyrate-vs-distance",
    "grid": "grid-d-L",
    "noise-sweep": "keyrate-vs-eta",
    "cov-dump": "covariance-dump",
    "validate": "oracle-validate",
    "max-distance": None,  # handled separately (no sweep axes)
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParameterError(message)


def _build_parser():
    parser = _Parser(prog="cvmdi",
                     description="CV-MDI-QKD sweeps with photon-varied "
                                 "two-mode squeezed coherent states")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMAND_MODES:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (repeatable)")
        p.add_argument("--out", default=None, help="output data file")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seedless", action="store_true",
                       help="assert the run used no randomness (recompute and compare)")
    return parser


def _run_max_distance(cfg):
    started = time.time()
    results = []
    failures = []
    channel = _channel_from_dict(cfg["channel"])
    for entry in _states_from_config(cfg["states"]):
        label, m, n = _entry_label(entry)
        tmsv = entry == "tmsv"
        sspec = _spec_from_state_dict(cfg["state"], 0 if tmsv else m, 0 if tmsv else n)
        try:
            res = max_distance(sspec, channel, float(cfg["target_keyrate"]),
                               tmsv_baseline=tmsv)
            results.append((label, m, n, sspec.d, res.target, res.km, res.capped))
        except CvmdiError as exc:
            failures.append({"point": label, "error": str(exc)})
            results.append((label, m, n, sspec.d, float(cfg["target_keyrate"]),
                            float("nan"), False))

    columns = ["state [label]", "m [photons]", "n [photons]", "d [SNU]",
               "K_target [bits/pulse]", "max_distance [km]", "capped [bool]"]
    rows = [[label, m, n, d, target, km, str(capped)]
            for (label, m, n, d, target, km, capped) in results]
    if cfg["format"] == "json":
        text = to_json({"columns": columns, "rows": rows}) + "\n"
    else:
        text = _render_csv(columns, rows)

    out = cfg.get("out")
    if out is None:
        sys.stdout.write(text)
        return 0
    data = text.encode("utf-8")
    try:
        with open(out, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise ParameterError(f"cannot write output file {out!r}: {exc}")
    manifest = RunManifest(
        tool_version=TOOL_VERSION,
        mode="max-distance",
        config={"state": dict(cfg["state"]), "channel": dict(cfg["channel"]),
                "states": list(cfg["states"]),
                "target_keyrate": float(cfg["target_keyrate"]), "out": out,
                "format": cfg["format"]},
        wallclock_s=time.time() - started,
        rows=len(rows),
        failures=failures,
        data_sha256=hashlib.sha256(data).hexdigest(),
    )
    write_json(out + ".manifest.json", manifest.as_dict())
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "max-distance":
            cfg = resolve_config("keyrate-vs-distance", args.config, args.set,
                                 args.out, args.format, args.workers, args.seedless)
            return _run_max_distance(cfg)

        mode = _SUBCOMMAND_MODES[args.command]
        cfg = resolve_config(mode, args.config, args.set, args.out,
                             args.format, args.workers, args.seedless)
        spec = sweep_from_config(cfg)
        manifest = run_sweep(spec)

        if spec.seedless:
            # rerun and require byte-identical data: proves no hidden randomness
            second = run_sweep(replace(spec, seedless=False))
            if second.data_sha256 != manifest.data_sha256:
                print("seedless check failed: reruns differ", file=sys.stderr)
                return 3
            second.seedless_verified = True
            write_json(spec.output + ".manifest.json", second.as_dict())

        if args.command == "validate" and not manifest.config.get("all_passed", True):
            failed = len(manifest.failures)
            print(f"validation failed at {failed} point(s); see manifest",
                  file=sys.stderr)
            return 3
        return 0
    except (ParameterError, OSError, json.JSONDecodeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (NumericalDomainError, PhysicalityError, InternalConsistencyError,
            DegenerateStateError, ConvergenceError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
