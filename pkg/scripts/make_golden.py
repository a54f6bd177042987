"""Regenerate the frozen reference data under tests/golden/.

Three kinds of records, clearly labeled in each file:

* method "fock-oracle": brute-force truncated-Fock evaluations (independent
  of every closed form in cvmdi.state_engine) with convergence reports.
* method "analytic": textbook Gaussian expressions evaluated directly.
* method "package-regression": values computed by this package itself and
  frozen to catch unintended drift.  These are NOT independent evidence of
  correctness -- the oracle records are.

Deterministic by construction (no RNG anywhere); reruns must be
byte-identical.  Takes ~10 minutes, dominated by the strong-squeezing
probability point (two-mode cutoff 150 through the beam splitter).

golden_exponent.json is written by derive_coefficients.py, not here.
"""

import math
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from cvmdi.fock_oracle import (beamsplitter_project, boundary_row_mass,
                               build_tmsc, build_tmsc_displaced,
                               golden_record, min_cutoff, moments,
                               oracle_point, symmetric_moment)
from cvmdi.keyrate import ChannelParams, keyrate_at_distance
from cvmdi.serialize import write_json
from cvmdi.state_engine import StateSpec, tmsc_covariance

GOLDEN_DIR = pathlib.Path(__file__).resolve().parent.parent / "tests" / "golden"

# spread over the state classes: catalysis m=n, subtraction m<n, addition
# m>n, with and without displacement, weak through strong squeezing; the
# last entry needs extra cutoff headroom because strong squeezing plus the
# beam splitter pushes amplitude into high ancilla levels
PROBABILITY_POINTS = [
    # (r, d, tau, m, n, explicit-cutoff-or-None)
    (0.8813735870195430, 2.0, 0.9, 0, 1, None),   # sinh r = 1
    (0.3, 1.0, 0.8, 0, 1, None),
    (0.5, 0.5, 0.95, 2, 0, None),
    (0.5, 1.0, 0.7, 1, 1, None),
    (0.2, 0.0, 0.9, 2, 2, None),
    (0.7, 1.5, 0.9, 0, 0, None),
    (0.9, 0.8, 0.5, 1, 2, None),
    (0.4, 1.2, 0.6, 2, 1, None),
    (0.6, 0.3, 0.85, 0, 2, None),
    (1.0, 1.5, 0.9, 0, 1, 100),
    (1.5, 2.0, 0.9, 0, 0, 150),
]

# orders (r1, s1, r2, s2) of raw symmetric moments; total order up to 4
MOMENT_ORDERS = [
    (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0),
    (2, 0, 0, 0), (1, 1, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1),
    (3, 0, 0, 0), (2, 1, 0, 0), (2, 0, 1, 0),
    (4, 0, 0, 0), (2, 0, 2, 0), (2, 2, 0, 0), (1, 1, 1, 1), (3, 0, 1, 0),
]

MOMENT_POINTS = [
    # (r, d, tau, m, n, explicit-cutoff-or-None); the r=1 point needs extra
    # levels before its fourth moments converge past 1e-8 relative
    (0.3, 1.0, 0.8, 0, 1, None),
    (0.5, 1.0, 0.7, 1, 1, None),
    (1.0, 1.5, 0.9, 0, 1, 100),
    (0.4, 1.2, 0.6, 2, 1, None),
]

# paper-scale squeezing (V_A = cosh 2r = 50) is far beyond what the oracle
# can push through the beam-splitter stage, but the two-mode squeezed state
# itself still fits; freezing its moments pins the preparation stage at the
# operating point the key-rate claims use.  The Fock tail decays only like
# tanh(r)^(2n) ~ 0.96^n here, so the displaced-TMSV builder needs ~1300
# levels before the boundary rows stop biasing the covariance.
STAGE_VA = 50.0
STAGE_CUTOFF = 1300

KEYRATE_POINTS = [
    # label, v_a, tau, d, m, n, L_AC km, eta, v_el, tmsv_baseline
    ("tmsv-40km", 50.0, 0.9, 2.0, 0, 0, 40.0, 1.0, 0.0, True),
    ("ctmsc00-d2-40km", 50.0, 0.9, 2.0, 0, 0, 40.0, 1.0, 0.0, False),
    ("ctmsc00-d2-63km", 50.0, 0.9, 2.0, 0, 0, 63.0, 1.0, 0.0, False),
    ("ctmsc11-d2-40km", 50.0, 0.9, 2.0, 1, 1, 40.0, 1.0, 0.0, False),
    ("pstmsc01-d2-40km", 50.0, 0.9, 2.0, 0, 1, 40.0, 1.0, 0.0, False),
    ("patmsc10-d2-40km", 50.0, 0.9, 2.0, 1, 0, 40.0, 1.0, 0.0, False),
    ("ctmsc00-d2-noisy-20km", 50.0, 0.9, 2.0, 0, 0, 20.0, 0.995, 0.0, False),
    ("ctmsc00-d0.5-40km", 50.0, 0.9, 0.5, 0, 0, 40.0, 1.0, 0.0, False),
]


def build_probabilities():
    records = []
    for r, d, tau, m, n, cutoff in PROBABILITY_POINTS:
        t0 = time.time()
        p, mean, cov, reports = oracle_point(r, d, tau, m, n, cutoff=cutoff)
        rec = golden_record({"r": r, "d": d, "tau": tau, "m": m, "n": n},
                            p, mean, cov, reports)
        rec["method"] = "fock-oracle"
        records.append(rec)
        print(f"  P({m},{n}) r={r} d={d} tau={tau}: {p:.6e} "
              f"[{time.time() - t0:.1f}s]")
    return {"description": "Brute-force truncated-Fock detection "
                           "probabilities and post-detection moments.",
            "records": records}


def build_moments():
    records = []
    for r, d, tau, m, n, cutoff in MOMENT_POINTS:
        t0 = time.time()
        state = build_tmsc(r, d, cutoff if cutoff is not None else min_cutoff(r, d))
        projected, p = beamsplitter_project(state, tau, m, n)
        values = {}
        for orders in MOMENT_ORDERS:
            key = ",".join(str(k) for k in orders)
            values[key] = symmetric_moment(projected, orders)
        records.append({
            "method": "fock-oracle",
            "spec": {"r": r, "d": d, "tau": tau, "m": m, "n": n},
            "probability": float(p),
            "moments": values,
        })
        print(f"  moments r={r} d={d} tau={tau} ({m},{n}) "
              f"[{time.time() - t0:.1f}s]")
    return {"description": "Raw Weyl-symmetric moments <x1^a p1^b x2^c "
                           "p2^e> about zero of heralded states "
                           "(brute force).",
            "records": records}


def build_stage():
    r = 0.5 * math.acosh(STAGE_VA)
    d = 2.0
    t0 = time.time()
    state = build_tmsc_displaced(r, d, STAGE_CUTOFF)
    boundary = boundary_row_mass(state)
    mean, cov = moments(state)
    analytic = tmsc_covariance(r, d)
    dev_mean = float(np.max(np.abs(mean - analytic.mean)))
    dev_cov = float(np.max(np.abs(cov - analytic.matrix)))
    print(f"  stage check r={r:.6f}: boundary={boundary:.3e} "
          f"dev_mean={dev_mean:.3e} dev_cov={dev_cov:.3e} "
          f"[{time.time() - t0:.1f}s]")
    return {
        "description": "Two-mode squeezed displaced state at the key-rate "
                       "operating point (V_A = 50), brute force vs analytic "
                       "Gaussian: pins the preparation stage where the "
                       "beam-splitter oracle is out of reach.",
        "method": "fock-oracle",
        "v_a": STAGE_VA,
        "r": r,
        "d": d,
        "cutoff": STAGE_CUTOFF,
        "norm_deficit": float(state.norm_deficit),
        "boundary_row_mass": boundary,
        "mean": [float(v) for v in mean],
        "sigma": [[float(v) for v in row] for row in cov],
        "analytic_mean": [float(v) for v in analytic.mean],
        "analytic_sigma": [[float(v) for v in row] for row in analytic.matrix],
        "max_mean_deviation": dev_mean,
        "max_sigma_deviation": dev_cov,
    }


def build_keyrates():
    records = []
    for label, v_a, tau, d, m, n, l_ac, eta, v_el, baseline in KEYRATE_POINTS:
        spec = StateSpec.from_variance(v_a=v_a, d=d, tau=tau, m=m, n=n)
        params = ChannelParams(L_AC=l_ac, eta=eta, v_el=v_el)
        result = keyrate_at_distance(spec, params, l_ac,
                                     tmsv_baseline=baseline)
        records.append({
            "method": "package-regression",
            "label": label,
            "spec": spec.as_dict(),
            "params": {"L_AC": l_ac, "eta": eta, "v_el": v_el,
                       "tmsv_baseline": baseline},
            **{k: v for k, v in result.as_dict().items()},
        })
        print(f"  {label}: K={result.K:.6e}")
    return {"description": "Frozen key-rate pipeline outputs (regression "
                           "only -- computed by this package, not an "
                           "independent oracle).",
            "records": records}


def main():
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    print("probabilities ...")
    write_json(str(GOLDEN_DIR / "golden_probabilities.json"),
               build_probabilities())
    print("moments ...")
    write_json(str(GOLDEN_DIR / "golden_moments.json"), build_moments())
    print("squeezer stage ...")
    write_json(str(GOLDEN_DIR / "golden_tmsc_stage.json"), build_stage())
    print("keyrates ...")
    write_json(str(GOLDEN_DIR / "golden_keyrate.json"), build_keyrates())
    print("done")


if __name__ == "__main__":
    main()
