"""Batch experiments: configuration, trade-off runs, sweeps and self-tests."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import bounds, codebook, protocol, qmath, sampling
from .bounds import IdentityMismatch
from .protocol import Basis, BobStrategy

log = logging.getLogger(__name__)

DEFAULT_MAX_DIM = 64
CSV_COLUMNS = ("n", "m", "strategy", "xi", "lhs_z", "lhs_x", "lhs_total", "rhs", "slack", "holds")
SWEEP_COLUMNS = ("n", "m", "q", "p_x", "p_z", "l_x", "l_z", "lhs_total", "rhs", "epsilon", "c0", "holds")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_IDENTITY = 0, 1, 2, 3
MEASUREMENTS = ("Z", "X", "breidbart")


class ConfigError(ValueError):
    pass


def max_alice_dim() -> int:
    """Largest allowed 2^N for checks that build Theta (env QMEMLAB_MAX_DIM)."""
    raw = os.environ.get("QMEMLAB_MAX_DIM")
    if not raw:
        return DEFAULT_MAX_DIM
    try:
        return max(DEFAULT_MAX_DIM, int(raw))
    except ValueError:
        raise ConfigError(f"QMEMLAB_MAX_DIM must be an integer, got {raw!r}") from None


def fmt(x: float) -> str:
    return f"{x:.12g}"


# --- configuration -----------------------------------------------------------

def parse_n_range(value) -> list[int]:
    """Accept ``[2, 3]``, ``"2..5"``, ``"2,3,4"``, ``5`` or ``{"min": 2, "max": 5}``."""
    if isinstance(value, dict):
        return list(range(int(value["min"]), int(value["max"]) + 1))
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        if ".." in value:
            lo, hi = value.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(v) for v in value.split(",") if v.strip()]
    return [int(v) for v in value]


def parse_strategy(value) -> dict:
    """``"keep_first:measure=X"`` or a dict ``{"kind": ..., **params}``; ``{"file": path}`` for custom."""
    if isinstance(value, dict):
        return dict(value)
    kind, _, rest = str(value).partition(":")
    spec = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            # bare token is the measurement basis, e.g. "measure_all:X"
            key, val = "measure", key
        if key == "keep":
            spec[key] = [int(v) for v in val.split("+") if v]
        elif key == "measure":
            try:
                spec[key] = float(val)
            except ValueError:
                spec[key] = val
        else:
            spec[key] = val
    if spec["kind"] == "custom" and "file" not in spec:
        raise ConfigError("custom strategy needs file=<path>")
    return spec


@dataclass(frozen=True)
class ExperimentConfig:
    n_range: tuple
    strategy: dict = field(default_factory=lambda: {"kind": "measure_all", "measure": "Z"})
    m: int | None = None
    q: float | None = None
    l_x: int | None = 0
    l_z: int | None = 0
    p_x: float | None = None
    p_z: float | None = None
    c_exponent: float = bounds.DEFAULT_C_EXPONENT
    seed: int = 0
    out: str | None = None
    families: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {"n", "n_range", "strategy", "m", "q", "l_x", "l_z", "p_x", "p_z",
                 "c_exponent", "seed", "out", "families"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        kwargs = {k: v for k, v in doc.items() if k in known and k not in ("n", "n_range")}
        n_value = doc.get("n_range", doc.get("n"))
        if n_value is None:
            raise ConfigError("config needs n (or n_range)")
        if "strategy" in kwargs:
            kwargs["strategy"] = parse_strategy(kwargs["strategy"])
        if ("p_x" in doc or "p_z" in doc) and "l_x" not in doc and "l_z" not in doc:
            kwargs.setdefault("l_x", None)
            kwargs.setdefault("l_z", None)
        try:
            return cls(n_range=tuple(parse_n_range(n_value)), **kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    @property
    def rate_mode(self) -> bool:
        return self.p_x is not None or self.p_z is not None

    def memory_for(self, n: int) -> int | None:
        if self.m is not None:
            return int(self.m)
        if self.q is not None:
            return math.floor(self.q * n + 1e-12)
        return None

    def lengths_for(self, n: int) -> tuple[int, int]:
        if self.rate_mode:
            return (math.floor((self.p_x or 0) * n + 1e-12), math.floor((self.p_z or 0) * n + 1e-12))
        return int(self.l_x or 0), int(self.l_z or 0)

    def strategy_for(self, n: int) -> BobStrategy:
        return build_strategy(self.strategy, n, self.memory_for(n))

    def validate(self) -> None:
        if not self.n_range:
            raise ConfigError("n_range is empty")
        if min(self.n_range) < 1:
            raise ConfigError("every N must be >= 1")
        limit = max_alice_dim()
        too_big = [n for n in self.n_range if 2**n > limit]
        if too_big:
            raise ConfigError(
                f"N={too_big} exceeds the dimension guard 2^N <= {limit} (set QMEMLAB_MAX_DIM)"
            )
        if self.m is not None and self.q is not None:
            raise ConfigError("give either m (fixed memory) or q (M = floor(qN)), not both")
        if self.q is not None and not 0 <= self.q <= 1:
            raise ConfigError("q must lie in [0, 1]")
        if self.rate_mode:
            for name in ("p_x", "p_z"):
                v = getattr(self, name) or 0
                if not 0 <= v <= 1:
                    raise ConfigError(f"{name} must lie in [0, 1]")
            q = self.q if self.q is not None else max(
                self.strategy_for(n).m / n for n in self.n_range)
            total = q + (self.p_x or 0) + (self.p_z or 0)
            if total >= 1:
                raise ConfigError(f"q + p_x + p_z = {total:g} must be < 1")
        else:
            if (self.l_x or 0) < 0 or (self.l_z or 0) < 0:
                raise ConfigError("l_x and l_z must be nonnegative")
        if not math.isfinite(self.c_exponent):
            raise ConfigError("c_exponent must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for n in self.n_range:
            self.strategy_for(n)


# --- strategies ---------------------------------------------------------------

def build_strategy(spec: dict, n: int, m: int | None) -> BobStrategy:
    """Instantiate the configured strategy at message length ``n``."""
    kind = spec.get("kind")
    measure = spec.get("measure", "Z")
    try:
        if kind == "custom":
            s = protocol.load_strategy(spec["file"])
            if s.n != n:
                raise ConfigError(f"custom strategy has n={s.n}, config asks for N={n}")
        elif kind == "measure_all":
            if m not in (None, 0):
                raise ConfigError("measure_all keeps no memory (M = 0)")
            s = protocol.builtin_strategy("measure_all", n, measure=measure)
        elif kind == "keep_all":
            if m not in (None, n):
                raise ConfigError("keep_all stores all N qubits (M = N)")
            s = protocol.builtin_strategy("keep_all", n)
        elif kind == "keep_first":
            mm = int(spec.get("m", m if m is not None else -1))
            if mm < 0:
                raise ConfigError("keep_first needs m or q")
            s = protocol.builtin_strategy("keep_first", n, m=min(mm, n), measure=measure)
        elif kind == "keep_subset":
            s = protocol.builtin_strategy("keep_subset", n, keep=spec["keep"], measure=measure)
        else:
            raise ConfigError(f"unknown strategy kind {kind!r}")
    except ConfigError:
        raise
    except (KeyError, ValueError, OSError) as exc:
        raise ConfigError(f"invalid strategy {spec}: {exc}") from exc
    if m is not None and s.m > m:
        raise ConfigError(f"strategy keeps {s.m} qubits but M={m}")
    return s


def builtin_grid(n: int, m: int) -> list[BobStrategy]:
    """All built-in strategies with exactly ``m`` memory qubits at message length ``n``."""
    if m == n:
        return [protocol.builtin_strategy("keep_all", n)]
    if m == 0:
        return [protocol.builtin_strategy("measure_all", n, measure=b) for b in MEASUREMENTS]
    return [protocol.builtin_strategy("keep_first", n, m=m, measure=b) for b in MEASUREMENTS]


def families_for(strategy: BobStrategy, xi: int, loaded: Sequence | None = None):
    """(z_family, x_family) for one outcome.

    Loaded families (matched on basis and outcome) win; keep-type built-ins
    fall back to their natural families, anything else to singleton families.
    """
    found = {}
    for fam in loaded or ():
        if fam.outcome == xi:
            found[fam.basis] = fam
    out = []
    for basis in (Basis.Z, Basis.X):
        if basis in found:
            out.append(found[basis])
        elif protocol.kept_qubits(strategy) is not None:
            out.append(codebook.natural_family(strategy, xi, basis))
        else:
            post = protocol.posterior_distribution(strategy, xi, basis)
            out.append(codebook.singleton_family(post, strategy.memory_dim, basis, xi))
    return tuple(out)


# --- run ---------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    n: int
    m: int
    strategy: str
    xi: int
    lhs_z: float
    lhs_x: float
    rhs: float
    wall_time: float = 0.0

    @property
    def lhs_total(self) -> float:
        return self.lhs_z + self.lhs_x

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs_total

    @property
    def holds(self) -> bool:
        return self.slack >= -qmath.ATOL

    def csv_fields(self) -> list[str]:
        return [str(self.n), str(self.m), self.strategy, str(self.xi), fmt(self.lhs_z),
                fmt(self.lhs_x), fmt(self.lhs_total), fmt(self.rhs), fmt(self.slack),
                "true" if self.holds else "false"]


@dataclass
class RunResult:
    exit_code: int
    rows: list[ResultRow]
    message: str = ""


def rows_to_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(rows, key=lambda r: (r.n, r.xi)):
        w.writerow(r.csv_fields())
    return buf.getvalue()


def compute_rows(config: ExperimentConfig) -> list[ResultRow]:
    loaded = codebook.load_families(config.families) if config.families else None
    rows = []
    for n in config.n_range:
        strategy = config.strategy_for(n)
        l_x, l_z = config.lengths_for(n)
        for xi in bounds.supported_outcomes(strategy):
            t0 = time.perf_counter()
            rep = bounds.tradeoff_for_strategy(strategy, xi, l_x, l_z, config.c_exponent,
                                               families_for(strategy, xi, loaded))
            if rep.identity_residual > bounds.IDENTITY_ATOL:
                raise IdentityMismatch(
                    f"N={n} xi={xi}: expectation/posterior residual {rep.identity_residual:.3g}")
            rows.append(ResultRow(n, strategy.m, strategy.label, xi, rep.lhs_z, rep.lhs_x,
                                  rep.rhs, time.perf_counter() - t0))
            log.debug("N=%d xi=%d slack=%.3g (%.3fs)", n, xi, rows[-1].slack, rows[-1].wall_time)
    return rows


def run(config: ExperimentConfig) -> RunResult:
    """Trade-off check for every outcome at every N; writes CSV to ``config.out``.

    Exit codes: 0 all rows hold, 1 some bound violated (rows still written),
    2 invalid configuration, 3 internal identity failure.
    """
    try:
        config.validate()
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, [], f"invalid config: {exc}")
    try:
        rows = compute_rows(config)
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, [], f"invalid config: {exc}")
    except IdentityMismatch as exc:
        return RunResult(EXIT_IDENTITY, [], f"identity self-test failed: {exc}")
    except ValueError as exc:
        return RunResult(EXIT_CONFIG, [], f"invalid input: {exc}")
    if config.out:
        Path(config.out).write_text(rows_to_csv(rows))
    bad = [r for r in rows if not r.holds]
    if bad:
        return RunResult(EXIT_VIOLATION, rows, f"{len(bad)} of {len(rows)} rows violate the bound")
    return RunResult(EXIT_OK, rows, f"{len(rows)} rows, all hold")


# --- sweep -------------------------------------------------------------------

def default_sweep_family(q: float, measure: str = "Z") -> Callable[[int], BobStrategy]:
    def make(n: int) -> BobStrategy:
        m = math.floor(q * n + 1e-12)
        if m == 0:
            return protocol.builtin_strategy("measure_all", n, measure=measure)
        if m == n:
            return protocol.builtin_strategy("keep_all", n)
        return protocol.builtin_strategy("keep_first", n, m=m, measure=measure)
    return make


def sweep_to_csv(points: Sequence[bounds.SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for p in points:
        w.writerow([p.n, p.m, fmt(p.q), fmt(p.p_x), fmt(p.p_z), p.l_x, p.l_z, fmt(p.lhs_total),
                    fmt(p.rhs), fmt(p.epsilon), fmt(p.c0), "true" if p.holds else "false"])
    return buf.getvalue()


# --- self-test ---------------------------------------------------------------

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _suite(name: str, fn: Callable[[], str]) -> SuiteResult:
    try:
        return SuiteResult(name, True, fn() or "")
    except (AssertionError, ValueError, RuntimeError) as exc:
        return SuiteResult(name, False, str(exc) or type(exc).__name__)


def _qmath_suite(rng: np.random.Generator) -> str:
    for _ in range(100):
        da, db = (int(v) for v in rng.integers(1, 5, size=2))
        rho, sigma = sampling.random_density(rng, da), sampling.random_density(rng, db)
        joint = qmath.DensityOperator((da, db), qmath.tensor(rho.matrix, sigma.matrix))
        red = qmath.partial_trace(joint, [0])
        assert abs(np.trace(red.matrix).real - 1) <= 1e-9, "partial trace lost trace"
        assert np.linalg.eigvalsh(red.matrix)[0] >= -1e-9, "partial trace broke positivity"
        assert np.allclose(red.matrix, rho.matrix, atol=1e-9), "partial trace of product"
        d = int(rng.integers(2, 33))
        a, b = sampling.ginibre(rng, d, d), sampling.ginibre(rng, d, d)
        assert qmath.spectral_norm(a @ b) <= qmath.spectral_norm(a) * qmath.spectral_norm(b) * (1 + 1e-12)
        p = sampling.random_projector(rng, d, int(rng.integers(0, d + 1)))
        nrm = qmath.spectral_norm(p)
        assert min(abs(nrm), abs(nrm - 1)) <= 1e-9 and qmath.is_projector(p)
        w, _ = qmath.herm_eig(sampling.random_density(rng, d).matrix)
        assert w[0] >= -1e-9 and w[-1] <= 1 + 1e-9 and abs(w.sum() - 1) <= 1e-9
    return "100 randomized cases"


def _channel_suite(inject_fault: bool) -> str:
    count = 0
    for n in (1, 2, 3):
        for m in range(n + 1):
            for s in builtin_grid(n, m):
                ops = s.channel.kraus_ops
                if inject_fault:
                    ops = tuple(k * (1 + 1e-3) for k in ops)
                ch = protocol.QuantumChannel(ops)  # raises on broken completeness
                gram = sum(k.conj().T @ k for k in ch.kraus_ops)
                assert np.linalg.norm(gram - np.eye(ch.input_dim)) <= 1e-9
                count += 1
    return f"{count} built-in channels complete"


def _normalization_suite() -> str:
    for n in (1, 2, 3):
        for m in range(n + 1):
            for s in builtin_grid(n, m):
                for basis in Basis:
                    for msg in protocol.all_messages(n):
                        total = sum(c.probability for c in protocol.conditional_states(s, basis, msg))
                        assert abs(total - 1) <= 1e-9, f"{s.label} {basis.value} {msg}: {total}"
    return "outcome distributions normalized"


def _pictures_suite() -> str:
    checked = 0
    for n in (1, 2, 3):
        for m in range(n + 1):
            for s in builtin_grid(n, m):
                for xi in bounds.supported_outcomes(s):
                    p_xi, theta = protocol.joint_conditional_state(s, xi)
                    if p_xi <= 1e-9:
                        continue
                    for basis in Basis:
                        post = protocol.posterior_distribution(s, xi, basis)
                        table = protocol.conditional_table(s, basis)
                        for msg in protocol.all_messages(n):
                            p, rho = protocol.condition_on_alice(theta, msg, basis)
                            assert abs(p - post.get(msg, 0.0)) <= 1e-8, "posterior mismatch"
                            if rho is not None:
                                ref = table[msg][xi].memory_state.matrix
                                assert np.max(np.abs(rho.matrix - ref)) <= 1e-8, "state mismatch"
                                checked += 1
    return f"{checked} conditional states agree across pictures"


def _identity_suite() -> str:
    worst = 0.0
    for n in (1, 2, 3):
        for m in range(n + 1):
            for s in builtin_grid(n, m):
                for xi in bounds.supported_outcomes(s):
                    for l in (0, 1, 2):
                        rep = bounds.tradeoff_for_strategy(s, xi, l, l)
                        worst = max(worst, rep.identity_residual)
    assert worst <= bounds.IDENTITY_ATOL, f"identity residual {worst:.3g}"
    return f"max residual {worst:.2e}"


def landau_pollak_fuzz(rng: np.random.Generator, trials: int = 1000,
                       dims: Sequence[int] = (2, 4, 8, 16)) -> tuple[int, float]:
    """Random (state, projector family) trials; returns (violations, smallest slack)."""
    violations, worst = 0, math.inf
    for i in range(trials):
        d = dims[i % len(dims)]
        rho = sampling.random_density(rng, d, rank=int(rng.integers(1, d + 1)))
        k = int(rng.integers(2, 6))
        projs = [sampling.random_projector(rng, d, int(rng.integers(1, max(1, d // 2) + 1)))
                 for _ in range(k)]
        res = bounds.landau_pollak_check(rho, projs)
        worst = min(worst, res.rhs - res.lhs)
        violations += not res.holds
    return violations, worst


def _landau_pollak_suite(rng: np.random.Generator) -> str:
    violations, worst = landau_pollak_fuzz(rng)
    assert violations == 0, f"{violations} violations"
    return f"1000 trials, min slack {worst:.3g}"


def cross_norm_pairs(n: int, m: int):
    """Yield (strategy, xi, CrossNorm) over every decoder pair of every built-in."""
    for s in builtin_grid(n, m):
        for xi in bounds.supported_outcomes(s):
            zf, xf = families_for(s, xi)
            ps = [codebook.decoder_operator(d, Basis.Z, n) for d in zf.decoders if d.entries]
            qs = [codebook.decoder_operator(d, Basis.X, n) for d in xf.decoders if d.entries]
            for p in ps:
                for q in qs:
                    yield s, xi, bounds.cross_norm_check(q, p, m, n)


def _cross_norm_suite(max_n: int = 4) -> str:
    count = 0
    for n in range(2, max_n + 1):
        for m in range(n + 1):
            for s, xi, res in cross_norm_pairs(n, m):
                assert res.holds, f"{s.label} xi={xi}: {res.norm} > {res.bound}"
                count += 1
    return f"{count} decoder pairs within 2^((M-N)/2)"


def selftest(seed: int = 0, inject_fault: str | None = None) -> list[SuiteResult]:
    """Run every invariant suite. ``inject_fault="channel"`` corrupts the channel suite."""
    rng = np.random.default_rng(seed)
    return [
        _suite("qmath", lambda: _qmath_suite(rng)),
        _suite("channel", lambda: _channel_suite(inject_fault == "channel")),
        _suite("normalization", _normalization_suite),
        _suite("pictures", _pictures_suite),
        _suite("identity", _identity_suite),
        _suite("landau_pollak", lambda: _landau_pollak_suite(rng)),
        _suite("cross_norm", _cross_norm_suite),
    ]
