"""One test per acceptance criterion; each prints a [PASS]/[FAIL] line."""
import itertools
import json
import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from qmemlab import bounds, codebook, harness, protocol, sampling
from qmemlab.codebook import Decoder, DecoderFamily, build_P_hat, build_Q_hat, validate
from qmemlab.protocol import Basis, all_messages, basis_projector, encode
from qmemlab.qmath import spectral_norm


def record(k, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_overlap_law():
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 3):
        for z, x in itertools.product(all_messages(n), repeat=2):
            overlap = abs(encode(x, "X").inner(encode(z, "Z"))) ** 2
            zp, xp = basis_projector(z, "Z"), basis_projector(x, "X")
            op = spectral_norm(zp @ xp @ zp)
            worst = max(worst, abs(overlap - 2.0**-n), abs(op - 2.0**-n))
    elapsed = time.perf_counter() - t0
    record(1, worst <= 1e-12 and elapsed < 1,
           f"max |overlap - 2^-N| = {worst:.1e} over 84 pairs ({elapsed:.2f}s)")


def test_criterion_2_landau_pollak_fuzz():
    t0 = time.perf_counter()
    violations, slack = harness.landau_pollak_fuzz(np.random.default_rng(20261015), trials=1000)
    elapsed = time.perf_counter() - t0
    record(2, violations == 0 and elapsed < 30,
           f"{violations} violations in 1000 trials, min slack {slack:.3g} ({elapsed:.1f}s)")


def test_criterion_3_cross_norm():
    t0 = time.perf_counter()
    count, worst_ratio, bad = 0, 0.0, []
    saturation = []
    for n in range(2, 6):
        for m in range(n + 1):
            for s, xi, res in harness.cross_norm_pairs(n, m):
                count += 1
                worst_ratio = max(worst_ratio, res.norm / res.bound)
                if not res.norm <= res.bound + 1e-9:
                    bad.append((s.label, xi))
                if m == 0:
                    saturation.append(abs(res.norm - 2.0 ** (-n / 2)))
    elapsed = time.perf_counter() - t0
    sat = max(saturation)
    record(3, not bad and sat <= 1e-9 and elapsed < 120,
           f"{count} pairs, {len(bad)} above bound, max norm/bound {worst_ratio:.9f}, "
           f"M=0 saturation error {sat:.1e} ({elapsed:.1f}s)")


def test_criterion_4_expectation_identity():
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for n in (1, 2, 3):
        for m in range(n + 1):
            for s in harness.builtin_grid(n, m):
                for xi in bounds.supported_outcomes(s):
                    _, theta = protocol.joint_conditional_state(s, xi)
                    for basis, build in ((Basis.Z, build_P_hat), (Basis.X, build_Q_hat)):
                        fam = codebook.natural_family(s, xi, basis)
                        post = protocol.posterior_distribution(s, xi, basis)
                        for l in (0, 1, 2):
                            lhs = theta.expect(build(fam, l, n, m))
                            rhs = sum(p for z, p in post.items()
                                      if codebook.operational_complexity(z, fam) <= l)
                            worst = max(worst, abs(lhs - rhs))
                            checked += 1
    elapsed = time.perf_counter() - t0
    record(4, worst <= 1e-8 and elapsed < 60,
           f"{checked} checks, max residual {worst:.1e} ({elapsed:.1f}s)")


def test_criterion_5_tradeoff():
    t0 = time.perf_counter()
    rows, failing, min_slack = 0, 0, math.inf
    for n in range(2, 6):
        for m in range(n + 1):
            for s in harness.builtin_grid(n, m):
                for xi in bounds.supported_outcomes(s):
                    for l_x, l_z in itertools.product((0, 1, 2), repeat=2):
                        rep = bounds.tradeoff_for_strategy(s, xi, l_x, l_z, 1.5)
                        rows += 1
                        failing += not rep.holds
                        min_slack = min(min_slack, rep.slack)
    a = bounds.tradeoff_for_strategy(protocol.builtin_strategy("measure_all", 5), 0, 0, 0, 1.5)
    b = bounds.tradeoff_for_strategy(protocol.builtin_strategy("keep_first", 3, m=1), 0, 0, 0, 1.5)
    points_ok = (round(a.lhs_total, 6) == round(1 + 2**-5, 6) and round(a.rhs, 6) == 1.5
                 and round(b.lhs_total, 6) == 1.25 and round(b.rhs, 6) == 2.414214)
    elapsed = time.perf_counter() - t0
    record(5, failing == 0 and points_ok and elapsed < 120,
           f"{rows} rows, {failing} failing, min slack {min_slack:.4g}; "
           f"points ({a.lhs_total:.6f}, {a.rhs:.6f}) ({b.lhs_total:.6f}, {b.rhs:.6f}) ({elapsed:.1f}s)")


def test_criterion_6_scaling():
    t0 = time.perf_counter()
    points = bounds.asymptotic_sweep(harness.default_sweep_family(0.0), 0, 0, 0, range(2, 7), 1.5)
    excess_err = max(abs((p.lhs_total - 1) - 2.0**-p.n) for p in points)
    below = all(p.lhs_total - 1 < 2**1.5 * 2 ** (-0.5 * p.n) for p in points)
    consts = all(p.epsilon == 0.5 and p.c0 == pytest.approx(2**1.5) for p in points)
    elapsed = time.perf_counter() - t0
    record(6, excess_err <= 1e-9 and below and consts and elapsed < 60,
           f"N=2..6 excess error {excess_err:.1e}, below C0 2^(-N/2) at every N ({elapsed:.2f}s)")


def _m0_strategies(rng, n):
    yield from harness.builtin_grid(n, 0)
    d = 2**n
    for _ in range(3):
        povm = protocol.Povm(sampling.random_povm(rng, d, 4))
        yield protocol.BobStrategy(n, 0, protocol.QuantumChannel([np.eye(d)]), povm)


def test_criterion_7_corollary():
    t0 = time.perf_counter()
    ok = True
    # keep_all at M = N: both bases fully covered at l = 0, corollary vacuous
    for n in (2, 3, 4):
        s = protocol.builtin_strategy("keep_all", n)
        for xi in bounds.supported_outcomes(s):
            rep = bounds.tradeoff_for_strategy(s, xi, 0, 0)
            fams = harness.families_for(s, xi)
            posts = (protocol.posterior_distribution(s, xi, Basis.Z),
                     protocol.posterior_distribution(s, xi, Basis.X))
            cor = bounds.corollary_min_lengths(*fams, posts, n, n)
            ok &= abs(rep.lhs_z - 1) <= 1e-9 and abs(rep.lhs_x - 1) <= 1e-9
            ok &= cor.holds and cor.bound < 0
    # M = 0: an l = 0 family is one decoder on a scalar memory, so coverage-1 in a
    # basis needs a single supported message; attempt it anyway and let validate judge
    rng = np.random.default_rng(7)
    attempts, accepted, best = 0, 0, 0.0
    for n in (4, 5):
        for s in _m0_strategies(rng, n):
            for xi in bounds.supported_outcomes(s):
                both = True
                mass = 0.0
                for basis in Basis:
                    post = protocol.posterior_distribution(s, xi, basis)
                    mass += max(post.values())
                    support = [z for z, p in post.items() if p > protocol.ZERO_PROB]
                    fam = DecoderFamily(basis, xi, [Decoder("", {z: np.ones((1, 1)) for z in support})])
                    attempts += 1
                    both &= validate(fam, bounds.memory_states(s, xi, basis)).ok
                accepted += both
                best = max(best, mass)
    ok &= accepted == 0 and best < 2
    elapsed = time.perf_counter() - t0
    record(7, ok and elapsed < 60,
           f"keep_all covers both bases with vacuous corollary; M=0 N>=4: {attempts} "
           f"coverage-1 attempts, {accepted} accepted in both bases, max P_z+P_x {best:.4f} "
           f"({elapsed:.1f}s)")


def test_criterion_8_pgm():
    conj = bounds.helstrom_pgm_guess([encode("0", "Z"), encode("0", "X")], [0.5, 0.5])
    orth = bounds.helstrom_pgm_guess([encode("0", "Z"), encode("1", "Z")], [0.5, 0.5])
    record(8, abs(conj - 0.853553) <= 1e-6 and abs(orth - 1) <= 1e-9,
           f"PGM conjugate pair {conj:.9f}, orthogonal pair {orth:.12f}")


def test_criterion_9_determinism(tmp_path):
    exe = shutil.which("qmemlab")
    cmd = [exe] if exe else [sys.executable, "-m", "qmemlab"]
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"n": "2..4", "q": 0.5, "strategy": "keep_first:breidbart",
                               "l_x": 1, "l_z": 0, "seed": 11}))
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        proc = subprocess.run(cmd + ["run", "--config", str(cfg), "--out", str(out)],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    rows = len(outs[0].splitlines()) - 1
    record(9, outs[0] == outs[1] and rows > 0,
           f"two CLI runs, {rows} rows, byte-identical: {outs[0] == outs[1]}")
