"""Acceptance checks, one PASS/FAIL line per criterion.

Run directly for a plain report::

    python3 tests/test_acceptance.py

Under pytest every line is also a test, and the report is repeated in the
terminal summary.  Tolerances are fixed here and never tuned to results.
"""

from __future__ import annotations

import functools
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from props import PROPERTY_CHECKS  # noqa: E402

from tikhcond import (  # noqa: E402
    SceOpts,
    cond_exact,
    cond_sce,
    cond_unstructured,
    estimate_mixed_power,
    estimate_normwise_power,
    frechet_operator,
    gen_example,
    sce_operator,
    sce_ratio_study,
)

GOLDEN_RTOL = 5e-3
CELL_SECONDS = 1.0
POWER_SECONDS = 0.1
POWER_DIGITS = 5
POWER_NORMWISE_FACTOR = 10.0
PROPERTY_SECONDS = 10.0
SCE_SEEDS = range(20)
SCE_SECONDS = 30.0
SCE_BAND_M = (0.1, 20.0)
SCE_BAND_KC = (0.1, 200.0)
RHO_LAMBDAS = (2.21, 6.19e-2, 1.35e-4, 7.48e-1)


@dataclass
class Line:
    cid: str
    passed: bool
    detail: str

    def __str__(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.cid}: {self.detail}"


RESULTS: dict = {}


# ---------------------------------------------------------------------------
# 1. golden values


@functools.lru_cache(maxsize=None)
def _golden_run(key):
    example, lam, row, kind = key
    ex = gen_example(example)
    M = None if row is None else np.eye(ex.handle.n)[[row]]
    pr = ex.problem(lam, M=M)
    t0 = time.perf_counter()
    t = cond_unstructured(pr) if kind == "unstructured" else cond_exact(pr)
    return t, time.perf_counter() - t0


_QUANTITY = {"kappa": "normwise", "m": "mixed", "c": "componentwise"}

GOLDEN = [
    # (label, example, lambda, selected row or None, structure, quantity, reference)
    ("toeplitz5 unstructured normwise", "toeplitz5", 4.9988e-4, None, "unstructured", "kappa", 4.4761e3),
    ("toeplitz5 unstructured mixed", "toeplitz5", 4.9988e-4, None, "unstructured", "m", 2.0035e3),
    ("toeplitz5 unstructured componentwise", "toeplitz5", 4.9988e-4, None, "unstructured", "c", 1.6064e7),
    ("toeplitz5 structured normwise", "toeplitz5", 4.9988e-4, None, "structured", "kappa", 1.3242e3),
    ("toeplitz5 structured mixed", "toeplitz5", 4.9988e-4, None, "structured", "m", 4.4971),
    ("toeplitz5 structured componentwise", "toeplitz5", 4.9988e-4, None, "structured", "c", 1.6056e7),
    ("toeplitz5 third row normwise", "toeplitz5", 5.00e-4, 2, "structured", "kappa", 2.9088e7),
    ("toeplitz5 third row mixed", "toeplitz5", 5.00e-4, 2, "structured", "m", 8.0320e6),
    ("hankel6 normwise", "hankel6", 7.5918e-4, None, "structured", "kappa", 1.0372e3),
    ("hankel6 mixed", "hankel6", 7.5918e-4, None, "structured", "m", 3.4999),
    ("hankel6 componentwise", "hankel6", 7.5918e-4, None, "structured", "c", 1.1576e7),
    ("vandermonde25x10 normwise", "vandermonde25x10", 5.69, None, "structured", "kappa", 1.2499e1),
    ("vandermonde25x10 mixed", "vandermonde25x10", 5.69, None, "structured", "m", 2.0828e1),
    ("vandermonde25x10 componentwise", "vandermonde25x10", 5.69, None, "structured", "c", 4.0178e1),
    ("cauchy10x8 normwise", "cauchy10x8", 1.72, None, "structured", "kappa", 54.144),
    ("cauchy10x8 mixed", "cauchy10x8", 1.72, None, "structured", "m", 7.2573),
    ("cauchy10x8 componentwise", "cauchy10x8", 1.72, None, "structured", "c", 390.86),
]


def _golden_check(label, example, lam, row, kind, quantity, ref):
    def check():
        triple, seconds = _golden_run((example, lam, row, kind))
        got = getattr(triple, _QUANTITY[quantity])
        if got is None:
            return False, f"{label}: undefined (reference {ref:.5g})"
        dev = abs(got - ref) / abs(ref)
        ok = dev <= GOLDEN_RTOL and seconds < CELL_SECONDS
        return ok, (f"{label} at lambda={lam:g}: {got:.5g} vs {ref:.5g}, rel dev {dev:.1e} "
                    f"(tol {GOLDEN_RTOL:.0e}), {seconds * 1e3:.0f} ms (limit {CELL_SECONDS:g} s)")
    return check


# ---------------------------------------------------------------------------
# 2. power estimates


@functools.lru_cache(maxsize=None)
def _power_run():
    pr = gen_example("toeplitz5").problem(5.00e-4, M=np.eye(5)[[0]])
    exact = cond_exact(pr)
    t0 = time.perf_counter()
    op = frechet_operator(pr)
    m = estimate_mixed_power(op).estimate
    k = estimate_normwise_power(op).estimate
    return exact, m, k, time.perf_counter() - t0


def _power_mixed():
    exact, m, _, _ = _power_run()
    dev = abs(m - exact.mixed) / abs(exact.mixed)
    # five significant digits: relative deviation below 5e-6
    ok = dev <= 0.5 * 10.0 ** (1 - POWER_DIGITS)
    return ok, f"mixed estimate {m:.10g} vs exact {exact.mixed:.10g}, rel dev {dev:.1e}"


def _power_normwise():
    exact, _, k, _ = _power_run()
    ratio = k / exact.normwise
    ok = 1 / POWER_NORMWISE_FACTOR <= ratio <= POWER_NORMWISE_FACTOR
    return ok, f"normwise estimate {k:.6g} vs exact {exact.normwise:.6g} (ratio {ratio:.3g}, within x{POWER_NORMWISE_FACTOR:g})"


def _power_time():
    *_, seconds = _power_run()
    return seconds < POWER_SECONDS, f"both estimates in {seconds * 1e3:.1f} ms (limit {POWER_SECONDS * 1e3:g} ms)"


# ---------------------------------------------------------------------------
# 3. property suites


@functools.lru_cache(maxsize=None)
def _property_run():
    t0 = time.perf_counter()
    outs = [check() for check in PROPERTY_CHECKS]
    return outs, time.perf_counter() - t0


def _property_check(i):
    def check():
        out = _property_run()[0][i]
        return out.passed, out.line()
    return check


def _property_time():
    outs, seconds = _property_run()
    n = sum(o.n for o in outs)
    return seconds < PROPERTY_SECONDS, f"{n} instances in {seconds:.2f} s (limit {PROPERTY_SECONDS:g} s)"


# ---------------------------------------------------------------------------
# 4. statistical estimates on the rho problem


@functools.lru_cache(maxsize=None)
def _sce_run():
    ex = gen_example("toeplitz_rho")
    t0 = time.perf_counter()
    medians = {lam: np.nanmedian(sce_ratio_study(ex, lam, SCE_SEEDS, k=3), axis=0) for lam in RHO_LAMBDAS}
    return medians, time.perf_counter() - t0


def _sce_check(lam):
    def check():
        rk, rm, rc = _sce_run()[0][lam]
        ok = (SCE_BAND_M[0] < rm < SCE_BAND_M[1] and SCE_BAND_KC[0] < rk < SCE_BAND_KC[1]
              and SCE_BAND_KC[0] < rc < SCE_BAND_KC[1])
        return ok, (f"lambda={lam:g}, median over {len(SCE_SEEDS)} seeds: r_kappa={rk:.4g}, "
                    f"r_m={rm:.4g} (band {SCE_BAND_M}), r_c={rc:.4g} (band {SCE_BAND_KC})")
    return check


def _sce_time():
    _, seconds = _sce_run()
    return seconds < SCE_SECONDS, f"{len(RHO_LAMBDAS)} x {len(SCE_SEEDS)} runs in {seconds:.2f} s (limit {SCE_SECONDS:g} s)"


# ---------------------------------------------------------------------------
# 5. determinism


def _cli_bytes(*extra):
    cmd = [sys.executable, "-m", "tikhcond.cli", "cond", "sce", "--seed", "42", *extra]
    return subprocess.run(cmd, capture_output=True, check=True).stdout


def _cli_determinism():
    a, b = _cli_bytes("--format", "json"), _cli_bytes("--format", "json")
    c, d = _cli_bytes(), _cli_bytes()
    ok = a == b and c == d and len(a) > 0
    return ok, f"`cond sce --seed 42` twice: json identical={a == b} ({len(a)} bytes), default output identical={c == d}"


def _parallel_determinism():
    ok = True
    for example, lam in (("toeplitz5", 4.9988e-4), ("toeplitz_rho", 2.21)):
        op = frechet_operator(gen_example(example).problem(lam))
        for mode in ("normwise", "componentwise"):
            s = sce_operator(op, SceOpts(k=3, seed=42), mode)
            p = sce_operator(op, SceOpts(k=3, seed=42, workers=4), mode)
            ok &= bool(np.array_equal(s.abs_vector, p.abs_vector)) and s.to_json() == p.to_json()
    cli = _cli_bytes("--format", "json", "--workers", "4") == _cli_bytes("--format", "json")
    return ok and cli, f"serial and 4-thread runs bitwise equal: library={ok}, cli={cli}"


# ---------------------------------------------------------------------------
# registry

CRITERIA = [(f"1.{i + 1}", _golden_check(*g)) for i, g in enumerate(GOLDEN)]
CRITERIA += [("2.1", _power_mixed), ("2.2", _power_normwise), ("2.3", _power_time)]
CRITERIA += [(f"3.{i + 1}", _property_check(i)) for i in range(len(PROPERTY_CHECKS))]
CRITERIA += [(f"3.{len(PROPERTY_CHECKS) + 1}", _property_time)]
CRITERIA += [(f"4.{i + 1}", _sce_check(lam)) for i, lam in enumerate(RHO_LAMBDAS)]
CRITERIA += [(f"4.{len(RHO_LAMBDAS) + 1}", _sce_time)]
CRITERIA += [("5.1", _cli_determinism), ("5.2", _parallel_determinism)]


def evaluate(cid, fn) -> Line:
    passed, detail = fn()
    line = Line(cid, bool(passed), detail)
    RESULTS[cid] = line
    return line


@pytest.mark.parametrize("cid,fn", CRITERIA, ids=[c for c, _ in CRITERIA])
def test_criterion(cid, fn):
    line = evaluate(cid, fn)
    print(line)
    assert line.passed, str(line)


if __name__ == "__main__":
    lines = [evaluate(cid, fn) for cid, fn in CRITERIA]
    for line in lines:
        print(line)
    n_fail = sum(not ln.passed for ln in lines)
    print(f"{len(lines) - n_fail} passed, {n_fail} failed")
    sys.exit(1 if n_fail else 0)
