"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and also when this file runs as a script.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from ltvmss import (
    ChannelModel,
    GainSchedule,
    SystemModel,
    analytic_ms_recursion,
    builtin_system,
    critical_erasure_probability,
    critical_variance,
    estimate_ms_rate,
    lyapunov_spectrum,
    monodromy_spectrum,
    simulate_ensemble,
    synthesize,
)
from ltvmss.cli import run_command

RESULTS = {}

REPORTED_EX1 = (0.05, -0.1)
REPORTED_EX2 = (0.4578, 0.1191, 0.0544)


def record(number, title, ok, detail):
    RESULTS[number] = (title, bool(ok), detail)
    print(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")


def timed_cli(argv, out):
    t0 = time.perf_counter()
    code = run_command(argv + ["--out", str(out)])
    return code, time.perf_counter() - t0


def test_criterion_1_example1_spectrum(tmp_path, capsys):
    code, elapsed = timed_cli(["analyze", "--builtin", "example1", "--horizon", "10000"], tmp_path)
    with open(tmp_path / "analyze.json") as fh:
        ex = json.load(fh)["exponents"]
    err = float(np.max(np.abs(np.subtract(ex, REPORTED_EX1))))
    ok = code == 0 and err <= 2e-3 and elapsed < 5.0
    with capsys.disabled():
        record(1, "Example-1 spectrum", ok, f"exponents {ex[0]:.6f}, {ex[1]:.6f}; max error {err:.1e}; {elapsed:.2f} s")
    assert ok


def test_criterion_2_example1_threshold(tmp_path, capsys):
    code, elapsed = timed_cli(["limits", "--builtin", "example1"], tmp_path)
    with open(tmp_path / "limits.json") as fh:
        p_star = json.load(fh)["p_star"]
    ok = code == 0 and abs(p_star - 0.0952) <= 1e-4 and elapsed < 1.0
    with capsys.disabled():
        record(2, "Example-1 threshold", ok, f"p* = {p_star:.6f}; {elapsed:.2f} s")
    assert ok


def test_criterion_3_example2_spectrum(capsys):
    sys_ = builtin_system("example2")
    mono = monodromy_spectrum(sys_)
    qr = lyapunov_spectrum(sys_).exponents
    agree = float(np.max(np.abs(qr - mono)))
    vs_reported = float(max(np.max(np.abs(mono - REPORTED_EX2)), np.max(np.abs(qr - REPORTED_EX2))))
    ok = agree <= 1e-6 and vs_reported <= 2e-3
    with capsys.disabled():
        record(3, "Example-2 spectrum", ok,
               f"monodromy {np.array2string(mono, precision=6)}; QR-monodromy {agree:.1e}; "
               f"vs reported {vs_reported:.1e}")
    assert ok


def test_criterion_4_example2_threshold(tmp_path, capsys):
    code, _ = timed_cli(["limits", "--builtin", "example2"], tmp_path)
    with open(tmp_path / "limits.json") as fh:
        p_star = json.load(fh)["p_star"]
    ok = code == 0 and abs(p_star - 0.7170) <= 1e-3
    with capsys.disabled():
        record(4, "Example-2 threshold", ok, f"p* = {p_star:.6f}")
    assert ok


def tail_mean(sys_, p, T=1000, n=1000, seed=42):
    mu, s2 = p, p * (1 - p)
    _, K = synthesize(sys_, mu, s2, T)
    stats = simulate_ensemble(sys_, K, ChannelModel.bernoulli(p), np.ones(sys_.n_states), T, n,
                              seed=seed, noise_variance=1.0)
    return float(np.mean(stats.msq[T // 2:]))


@pytest.mark.parametrize("name", ["example1", "example2"])
def test_criterion_5_threshold_contrast(name, capsys):
    t0 = time.perf_counter()
    sys_ = builtin_system(name)
    p_star = critical_erasure_probability(lyapunov_spectrum(sys_), sys_.n_inputs)
    below = tail_mean(sys_, p_star - 0.02)
    above = tail_mean(sys_, p_star + 0.02)
    elapsed = time.perf_counter() - t0
    ratio = below / above
    ok = ratio >= 10.0 and elapsed < 60.0
    with capsys.disabled():
        record(f"5-{name}", f"ensemble contrast across p*, {name}", ok,
               f"tail msq {below:.3g} at p*-0.02 vs {above:.3g} at p*+0.02, ratio {ratio:.1f}; {elapsed:.1f} s")
    assert ok


def light_tailed_loop(i):
    """Random scalar or 2-state loop whose channel perturbation is small.

    The channel standard deviation times |B K| is 5% of the smallest singular
    value of the mean closed loop, so the per-realization spread of |x(t)|^2
    stays O(1) over 50 steps and 10/sqrt(n) is a ~10 sigma band.
    """
    rng = np.random.default_rng(1000 + i)
    n = 1 if i % 2 == 0 else 2
    period = 1 + i % 3
    mu = rng.uniform(0.5, 1.5)
    ch = [ChannelModel.gaussian(mu, 0.01 * mu**2),
          ChannelModel.uniform(0.8 * mu, 1.2 * mu),
          ChannelModel.two_point(0.9 * mu, 1.1 * mu, 0.5),
          ChannelModel.bernoulli(0.98)][i % 4]
    mu, s2 = ch.moments()
    A, B, K = [], [], []
    for _ in range(period):
        Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
        Acl = rng.uniform(0.8, 1.15) * Q @ np.diag(rng.uniform(0.8, 1.0, n))
        b = rng.standard_normal((n, 1))
        k = rng.standard_normal((1, n))
        smin = np.linalg.svd(Acl, compute_uv=False)[-1]
        k *= 0.05 * smin / (math.sqrt(s2) * np.linalg.norm(b @ k, 2))
        A.append(Acl - mu * b @ k)
        B.append(b)
        K.append(k)
    gains = GainSchedule(tuple(K[t % period] for t in range(50)), mu, s2)
    return SystemModel.periodic(A, B), gains, ch, rng.standard_normal(n)


def test_criterion_6_oracle_equivalence(capsys):
    n, T = 10_000, 50
    bound = 10 / math.sqrt(n)
    worst = 0.0
    for i in range(20):
        sys_, K, ch, x0 = light_tailed_loop(i)
        mu, s2 = ch.moments()
        stats = simulate_ensemble(sys_, K, ch, x0, T, n, seed=42)
        oracle = analytic_ms_recursion(sys_, K, mu, s2, x0, T)
        worst = max(worst, float(np.max(np.abs(stats.msq / oracle - 1))))
    ok = worst < bound
    with capsys.disabled():
        record(6, "oracle equivalence", ok, f"20 systems; max relative error {worst:.4f} < {bound:.2f}")
    assert ok


def constant_full_input(i):
    """Constant A with real eigenvalues of distinct modulus, invertible B."""
    rng = np.random.default_rng(2000 + i)
    n = 1 + i % 3
    top = rng.uniform(1.1, 2.0)
    lam = np.r_[top, top * rng.uniform(-0.7, 0.7, n - 1)] * rng.choice([-1, 1], n)
    V = rng.standard_normal((n, n)) + 2 * np.eye(n)
    A = V @ np.diag(lam) @ np.linalg.inv(V)
    B = rng.standard_normal((n, n)) + 2 * np.eye(n)
    return SystemModel.periodic([A], [B]), rng.uniform(0.5, 1.5), rng.standard_normal(n)


def ms_stable(sys_, mu, sigma, x0, T=300):
    s2 = sigma * sigma
    Kt = -mu / (mu * mu + s2) * np.linalg.solve(sys_.B(0), sys_.A(0))
    traj = analytic_ms_recursion(sys_, GainSchedule((Kt,) * T, mu, s2), mu, s2, x0, T)
    return estimate_ms_rate(traj, burn_in=0.2, tol=0.0).stable


def test_criterion_7_threshold_sharpness(capsys):
    worst = 0.0
    for i in range(20):
        sys_, mu, x0 = constant_full_input(i)
        sigma_star = critical_variance(lyapunov_spectrum(sys_), mu, sys_.n_states)
        lo, hi = 0.5 * sigma_star, 1.5 * sigma_star
        assert ms_stable(sys_, mu, lo, x0) and not ms_stable(sys_, mu, hi, x0)
        while hi - lo > 1e-7:
            mid = 0.5 * (lo + hi)
            if ms_stable(sys_, mu, mid, x0):
                lo = mid
            else:
                hi = mid
        worst = max(worst, abs(0.5 * (lo + hi) - sigma_star))
    ok = worst <= 1e-6
    with capsys.disabled():
        record(7, "threshold sharpness", ok, f"20 systems; max |sigma_flip - sigma*| = {worst:.1e}")
    assert ok


INVARIANTS = [
    "test_model.py::TestTransitionMatrix::test_cocycle",
    "test_model.py::TestTransitionMatrix::test_cocycle_example1",
    "test_spectrum.py::TestLyapunovSpectrum::test_determinant_identity",
    "test_synthesis.py::TestOptimalGain::test_scale_invariance",
    "test_mcsim.py::TestEnsemble::test_seed_determinism_across_workers",
    "test_limits.py::TestCriticalProbability::test_bernoulli_consistency",
]


def test_criterion_8_invariant_suites(capsys):
    here = os.path.dirname(os.path.abspath(__file__))
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[os.path.join(here, node) for node in INVARIANTS]],
                          capture_output=True, text=True, cwd=here)
    elapsed = time.perf_counter() - t0
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    with capsys.disabled():
        record(8, "named invariant suites", ok,
               f"{summary}; {elapsed:.1f} s; full-run time is checked in the session summary")
    assert ok, proc.stdout[-2000:]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
