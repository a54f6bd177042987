"""Release gate: eight end-to-end checks, one printed verdict line each.

Every test here covers one numbered release criterion and prints
``[criterion N] <label>: PASS`` (or ``FAIL (<failing checks>)``) so a
``pytest -s`` run reads as a checklist.  The criteria pin the physics the
package exists to reproduce:

1. closed-form probability/moments agree with the Fock-basis oracle on a
   243-point parameter grid to 1e-6 absolute, within a 10-minute budget;
2. the identity beam splitter (tau = 1, m = n) returns the plain
   squeezed-coherent state exactly;
3. the headline reach numbers of zero-photon catalysis versus the
   Gaussian benchmark, with desk-scale runtime;
4. the displacement trade-off of single-photon addition (reach peaks
   near d = 2 at about 50 km);
5. sensitivity to homodyne efficiency at eta = 0.995;
6. heralding-probability decay and saturation of the rate gap for
   single-photon subtraction at unit reconciliation efficiency;
7. physicality everywhere: no symplectic eigenvalue below 1 - 1e-9,
   zero Holevo leakage for pure states, monotone rate-vs-distance;
8. byte-identical data files when a sweep is rerun.

Numbers asserted here are frozen readings of the reference curves; the
unit suites pin the same quantities at much tighter tolerances.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from cvmdi.cli_scan import default_config, main, max_distance, validate_oracle
from cvmdi.errors import CvmdiError
from cvmdi.keyrate import (
    ChannelParams,
    evolve,
    holevo,
    keyrate,
    keyrate_at_distance,
    noise_model,
    symplectic_eigenvalues,
)
from cvmdi.state_engine import StateSpec, covariance, probability, tmsc_covariance

pytestmark = pytest.mark.acceptance

V_A = 50.0
TAU = 0.9


def _spec(d, m, n):
    return StateSpec.from_variance(V_A, d, TAU, m, n)


def _report(num, label, checks):
    failed = [name for name, ok in checks.items() if not ok]
    verdict = "PASS" if not failed else "FAIL (" + "; ".join(failed) + ")"
    print(f"[criterion {num}] {label}: {verdict}", flush=True)
    assert not failed, f"criterion {num} failed: {failed}"


# --------------------------------------------------------------------------
# 1. closed form vs Fock oracle
# --------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_1_closed_form_matches_fock_oracle():
    cfg = default_config("oracle-validate")["oracle"]
    t0 = time.perf_counter()
    rows, all_passed = validate_oracle(cfg, abs_tol=1e-6)
    elapsed = time.perf_counter() - t0

    devs = [row["max_abs_dev"] for row in rows if row["error"] == ""]
    worst = max(devs) if devs else float("nan")
    checks = {
        "grid has 243 points": len(rows) == 243,
        "no point errored": all(row["error"] == "" for row in rows),
        "all within 1e-6 and converged": bool(all_passed),
        "under the 10-minute budget": elapsed <= 600.0,
    }
    _report(1, f"oracle agreement (worst {worst:.2e}, {elapsed:.0f} s)", checks)


# --------------------------------------------------------------------------
# 2. identity beam splitter
# --------------------------------------------------------------------------

def test_criterion_2_identity_beam_splitter_is_exact():
    r, d = 0.6, 1.5
    ref = tmsc_covariance(r, d)
    checks = {}
    for m in (0, 1, 2):
        spec = StateSpec(r=r, d=d, tau=1.0, m=m, n=m)
        p = probability(spec)
        cov = covariance(spec)
        dev_mat = float(np.max(np.abs(cov.matrix - ref.matrix)))
        dev_mean = float(np.max(np.abs(cov.mean - ref.mean)))
        checks[f"P = 1 exactly at m = n = {m}"] = p == 1.0
        checks[f"covariance within 1e-9 at m = n = {m}"] = (
            dev_mat <= 1e-9 and dev_mean <= 1e-9)
    _report(2, "tau = 1 returns the bare squeezed-coherent state", checks)


# --------------------------------------------------------------------------
# 3. zero-photon catalysis vs the Gaussian benchmark
# --------------------------------------------------------------------------

def test_criterion_3_catalysis_reach_and_ordering():
    t0 = time.perf_counter()
    params = ChannelParams()

    k63 = keyrate_at_distance(_spec(2.0, 0, 0), params, 63.0).K
    reach_d2 = max_distance(_spec(2.0, 0, 0), params, 1e-4)
    reach_d0 = max_distance(_spec(0.0, 0, 0), params, 1e-4)

    k00 = keyrate_at_distance(_spec(0.0, 0, 0), params, 40.0).K
    k_tmsv = keyrate_at_distance(_spec(0.0, 0, 0), params, 40.0,
                                 tmsv_baseline=True).K
    k11 = keyrate_at_distance(_spec(0.0, 1, 1), params, 40.0).K
    k22 = keyrate_at_distance(_spec(0.0, 2, 2), params, 40.0).K
    elapsed = time.perf_counter() - t0

    checks = {
        "K(63 km) >= 1e-4 at d = 2": k63 >= 1e-4,
        "rate holds past 63 km at d = 2":
            reach_d2.km > 63.0 and not reach_d2.capped,
        "reach at d = 0 within 70 km +- 10%": 63.0 <= reach_d0.km <= 77.0,
        "(0,0) beats the benchmark at 40 km": k00 > k_tmsv > 0.0,
        "(1,1) and (2,2) are dead and close":
            k11 <= 0.0 and k22 <= 0.0 and abs(k11 - k22) <= 0.01,
        "runs in seconds": elapsed < 60.0,
    }
    _report(3, f"catalysis reach (d=0 reach {reach_d0.km:.2f} km, "
               f"{elapsed:.1f} s)", checks)


# --------------------------------------------------------------------------
# 4. photon addition: displacement trade-off
# --------------------------------------------------------------------------

def test_criterion_4_photon_addition_peaks_near_d_2():
    params = ChannelParams()

    d_grid = np.linspace(0.25, 3.5, 14)
    reach = np.array([max_distance(_spec(float(d), 1, 0), params, 1e-4).km
                      for d in d_grid])
    i_star = int(np.argmax(reach))
    d_star, km_star = float(d_grid[i_star]), float(reach[i_star])

    dd = np.linspace(0.0, 6.0, 25)
    k40 = np.array([keyrate_at_distance(_spec(float(v), 1, 0), params, 40.0).K
                    for v in dd])
    j = int(np.argmax(k40))

    checks = {
        "reach peaks near d = 2": 1.5 <= d_star <= 2.75,
        "peak reach within 50 km +- 10%": 45.0 <= km_star <= 55.0,
        "rate at 40 km has an interior maximum": 0 < j < len(dd) - 1,
        "rate rises then falls with d": k40[j] > k40[0] and k40[j] > k40[-1],
    }
    _report(4, f"(1,0) trade-off (peak {km_star:.2f} km at d = {d_star:.2f})",
            checks)


# --------------------------------------------------------------------------
# 5. imperfect homodyne detectors
# --------------------------------------------------------------------------

def test_criterion_5_detector_efficiency_sensitivity():
    params = ChannelParams(eta=0.995, v_el=0.0)
    target = 1e-3

    md00 = max_distance(_spec(2.0, 0, 0), params, target).km
    md01 = max_distance(_spec(2.0, 0, 1), params, target).km
    md10 = max_distance(_spec(2.0, 1, 0), params, target).km
    md_tmsv = max_distance(_spec(0.0, 0, 0), params, target,
                           tmsv_baseline=True).km

    checks = {
        "(0,0) reach within 29 km +- 15%": 24.65 <= md00 <= 33.35,
        "(0,1) within 4 km of (0,0)": abs(md01 - md00) <= 4.0,
        "(1,0) falls below the benchmark": md10 < md_tmsv,
    }
    _report(5, f"eta = 0.995 reaches (00 {md00:.2f}, 01 {md01:.2f}, "
               f"10 {md10:.2f}, benchmark {md_tmsv:.2f} km)", checks)


# --------------------------------------------------------------------------
# 6. probability decay and rate-gap saturation for (0,1)
# --------------------------------------------------------------------------

def test_criterion_6_subtraction_probability_and_saturation():
    params = ChannelParams(beta=1.0, L_AC=50.0)
    d_grid = np.linspace(0.0, 3.0, 60)

    probs, gaps = [], []
    for d in d_grid:
        bd = keyrate(_spec(float(d), 0, 1), params)
        probs.append(bd.probability)
        gaps.append(bd.I_AB - bd.chi_BE)
    probs, gaps = np.array(probs), np.array(gaps)

    quarter = gaps[-15:]
    rel_steps = np.abs(np.diff(quarter)) / np.abs(quarter[:-1])

    checks = {
        "P strictly decreasing in d": bool(np.all(np.diff(probs) < 0.0)),
        "P drops below 0.05 before d = 3":
            bool(np.any((probs < 0.05) & (d_grid < 3.0))),
        "I_AB - chi_BE never decreases": bool(np.all(np.diff(gaps) >= 0.0)),
        "gap saturates (last-quarter steps <= 2e-3)":
            float(np.max(rel_steps)) <= 2e-3,
    }
    _report(6, f"(0,1) saturation (P(3) = {probs[-1]:.4f}, "
               f"gap {gaps[-1]:.4f} bits)", checks)


# --------------------------------------------------------------------------
# 7. physicality across every operating point above
# --------------------------------------------------------------------------

def _operating_points():
    default = ChannelParams()
    return [
        ("(0,0) d=2", _spec(2.0, 0, 0), default, False, 70.0),
        ("(0,0) d=0", _spec(0.0, 0, 0), default, False, 75.0),
        ("(1,1) d=0", _spec(0.0, 1, 1), default, False, 50.0),
        ("(2,2) d=0", _spec(0.0, 2, 2), default, False, 50.0),
        ("(1,0) d=2", _spec(2.0, 1, 0), default, False, 55.0),
        ("(0,1) d=2", _spec(2.0, 0, 1), default, False, 65.0),
        ("benchmark", _spec(0.0, 0, 0), default, True, 75.0),
        ("(0,0) d=2 eta=0.995", _spec(2.0, 0, 0),
         ChannelParams(eta=0.995), False, 35.0),
        ("(0,1) d=2 beta=1", _spec(2.0, 0, 1),
         ChannelParams(beta=1.0), False, 65.0),
    ]


def _monotone_on_positive_branch(rates):
    for i in range(len(rates) - 1):
        if rates[i] <= 0.0:
            break
        if rates[i + 1] > rates[i] + 1e-12:
            return False
    return True


def test_criterion_7_physicality_everywhere():
    checks = {}
    min_lambda = math.inf

    for label, spec, params, tmsv, l_max in _operating_points():
        try:
            rates = []
            for l_ac in np.linspace(0.0, l_max, 13):
                bd = keyrate_at_distance(spec, params, float(l_ac),
                                         tmsv_baseline=tmsv)
                rates.append(bd.K)
                sigma = tmsc_covariance(spec.r, spec.d) if tmsv \
                    else covariance(spec)
                noise = noise_model(replace(params, L_AC=float(l_ac)),
                                    v_a=spec.v_a)
                lams = symplectic_eigenvalues(evolve(sigma, noise))
                min_lambda = min(min_lambda, *lams)
            checks[f"spectra stay physical [{label}]"] = \
                min_lambda >= 1.0 - 1e-9
            checks[f"K monotone in distance [{label}]"] = \
                _monotone_on_positive_branch(rates)
        except CvmdiError as exc:
            checks[f"no physicality violation [{label}]"] = False
            print(f"  {label}: {exc}", flush=True)

    # Purity is visible to the covariance only for Gaussian states: the
    # benchmark TMSC and the vacuum-heralded (0,0) outputs.  Higher-order
    # heralded states are pure but non-Gaussian, so their covariance alone
    # carries symplectic eigenvalues > 1 and a strictly positive Gaussian
    # Holevo bound; for them the physical statement is spectrum >= 1.
    gaussian_pure = {
        "benchmark r=0.3": tmsc_covariance(0.3, 0.0),
        "benchmark r=0.8 d=1.5": tmsc_covariance(0.8, 1.5),
        "(0,0) d=2": covariance(_spec(2.0, 0, 0)),
        "(0,0) d=0": covariance(_spec(0.0, 0, 0)),
        "tau=1 (1,1)": covariance(StateSpec(r=0.6, d=1.5, tau=1.0, m=1, n=1)),
    }
    for label, sigma in gaussian_pure.items():
        checks[f"pure state leaks nothing [{label}]"] = \
            holevo(sigma) <= 1e-9

    for label, spec, _, tmsv, _ in _operating_points():
        if tmsv:
            continue
        lam_in = symplectic_eigenvalues(covariance(spec))
        checks[f"heralded input physical [{label}]"] = \
            min(lam_in) >= 1.0 - 1e-9

    _report(7, f"physicality (min symplectic eigenvalue {min_lambda:.12f})",
            checks)


# --------------------------------------------------------------------------
# 8. deterministic reruns
# --------------------------------------------------------------------------

def test_criterion_8_reruns_are_byte_identical(tmp_path):
    checks = {}
    runs = {
        "keyrate sweep": [
            "keyrate",
            "--set", "axis1.count=7", "--set", "axis1.stop=60",
            "--set", 'states=[[0,0],[1,1],"tmsv"]',
        ],
        "probability sweep": [
            "prob-sweep",
            "--set", "axis1.count=9",
        ],
    }
    for name, argv in runs.items():
        outs = []
        for attempt in ("first", "second"):
            out = tmp_path / f"{name.split()[0]}-{attempt}.csv"
            code = main(argv + ["--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        checks[f"{name} reruns byte-identical"] = outs[0] == outs[1]
        checks[f"{name} non-empty"] = len(outs[0]) > 0
    _report(8, "deterministic data files", checks)
