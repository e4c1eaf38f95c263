"""Alice's conjugate-basis encoding and Bob's memory-bounded strategies.

Bob applies a channel ``H_A -> H_m (x) K`` (memory first, auxiliary second),
measures ``K`` with a POVM before the basis is announced, and keeps the
``M``-qubit memory. Outcome labels are integer indices into the POVM.
Messages are bit strings such as ``"0110"``; qubit ``i`` carries bit ``i``
and qubit 0 is the leftmost (slowest) tensor factor.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .qmath import (
    ATOL,
    DensityOperator,
    DimensionError,
    StateVector,
    as_matrix,
    dagger,
    is_positive_semidefinite,
    psd_sqrt,
)

ZERO_PROB = 1e-12

__all__ = [
    "Basis",
    "BobStrategy",
    "ConditionalState",
    "Povm",
    "QuantumChannel",
    "BASIS_VECTORS",
    "all_messages",
    "basis_projector",
    "builtin_strategy",
    "check_message",
    "condition_on_alice",
    "conditional_states",
    "conditional_table",
    "encode",
    "epr_state",
    "joint_conditional_state",
    "kept_qubits",
    "load_strategy",
    "measurement_angle",
    "outcome_probability",
    "posterior_distribution",
    "qubit_basis",
    "strategy_from_dict",
    "strategy_to_dict",
]


class Basis(str, enum.Enum):
    X = "X"
    Z = "Z"

    @classmethod
    def parse(cls, value) -> "Basis":
        return value if isinstance(value, cls) else cls(str(value).upper())


def check_message(msg: str, n: int | None = None) -> str:
    if not isinstance(msg, str) or not msg or set(msg) - {"0", "1"}:
        raise ValueError(f"message must be a nonempty bit string, got {msg!r}")
    if n is not None and len(msg) != n:
        raise DimensionError(f"message {msg!r} has length {len(msg)}, expected {n}")
    return msg


def all_messages(n: int) -> list[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=n)]


def qubit_basis(angle: float) -> np.ndarray:
    """Columns are the basis vectors (cos a, sin a) and (-sin a, cos a).

    Angle 0 is the Z basis, pi/4 the X basis (up to a global sign on the
    second vector) and pi/8 the intermediate Breidbart basis.
    """
    if not math.isfinite(angle):
        raise ValueError(f"invalid measurement angle {angle!r}")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


_SQRT_HALF = 1 / math.sqrt(2)
BASIS_VECTORS = {
    Basis.Z: np.array([[1, 0], [0, 1]], dtype=np.complex128),
    Basis.X: np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=np.complex128),
}


def _product_ket(bits: str, basis_vectors: np.ndarray) -> np.ndarray:
    out = np.ones(1, dtype=np.complex128)
    for b in bits:
        out = np.kron(out, basis_vectors[:, int(b)])
    return out


def encode(msg: str, basis) -> StateVector:
    """|z_1> (x) ... (x) |z_N> for Z, |x_1-bar> (x) ... for X."""
    check_message(msg)
    basis = Basis.parse(basis)
    return StateVector(len(msg), _product_ket(msg, BASIS_VECTORS[basis]))


def basis_projector(msg: str, basis) -> np.ndarray:
    """Rank-one projector X_x or Z_z on 2^N dimensions."""
    return encode(msg, basis).projector()


def epr_state(n: int) -> StateVector:
    """|phi>^{(x) n} ordered as H_A' (x) H_A (all of Alice's kept qubits first).

    In this block ordering the state is 2^{-n/2} sum_x |x>_A' |x>_A.
    """
    if n < 1:
        raise ValueError("epr_state needs n >= 1")
    d = 2**n
    amps = np.eye(d, dtype=np.complex128).reshape(-1) / math.sqrt(d)
    return StateVector(2 * n, amps)


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """CPTP map in Kraus form, ``rho -> sum_k K rho K^dagger``."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(as_matrix(k).copy() for k in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise DimensionError("Kraus operators must share one shape")
        for k in ops:
            k.setflags(write=False)
        gram = sum(dagger(k) @ k for k in ops)
        residual = float(np.linalg.norm(gram - np.eye(shape[1])))
        if residual > ATOL:
            raise ValueError(f"Kraus completeness violated (Frobenius residual {residual:.3g})")
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def input_dim(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def apply(self, rho) -> np.ndarray:
        rho = as_matrix(rho)
        return sum(k @ rho @ dagger(k) for k in self.kraus_ops)

    def apply_to_ket(self, psi: np.ndarray) -> list[np.ndarray]:
        """Kraus branches ``K_k |psi>``; their outer products sum to the output."""
        return [k @ psi for k in self.kraus_ops]


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple
    labels: tuple | None = None

    def __post_init__(self):
        elems = tuple(as_matrix(e).copy() for e in self.elements)
        if not elems:
            raise ValueError("a POVM needs at least one element")
        d = elems[0].shape[0]
        for e in elems:
            if e.shape != (d, d):
                raise DimensionError("POVM elements must share one square shape")
            if not is_positive_semidefinite(e):
                raise ValueError("POVM element is not positive semidefinite")
            e.setflags(write=False)
        residual = float(np.linalg.norm(sum(elems) - np.eye(d)))
        if residual > ATOL:
            raise ValueError(f"POVM elements do not sum to identity (residual {residual:.3g})")
        if self.labels is not None and len(self.labels) != len(elems):
            raise ValueError("one label per POVM element")
        roots = tuple(psd_sqrt(e) for e in elems)
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "_roots", roots)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    def sqrt(self, xi: int) -> np.ndarray:
        return self._roots[xi]


@dataclass(frozen=True, eq=False)
class BobStrategy:
    """Bob's channel ``H_A -> H_m (x) K`` plus a POVM on ``K``.

    ``m`` is the number of memory qubits; ``m == 0`` makes ``H_m`` one
    dimensional. ``kind``/``params`` describe built-in strategies and are
    ``None``/empty for custom ones.
    """

    n: int
    m: int
    channel: QuantumChannel
    povm: Povm
    kind: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise ValueError(f"need n >= 1 and m >= 0, got n={self.n}, m={self.m}")
        if self.channel.input_dim != 2**self.n:
            raise DimensionError(
                f"channel input dim {self.channel.input_dim} != 2^{self.n}"
            )
        if self.channel.output_dim != 2**self.m * self.povm.dim:
            raise DimensionError(
                f"channel output dim {self.channel.output_dim} != "
                f"2^{self.m} * dim K ({self.povm.dim})"
            )

    @property
    def memory_dim(self) -> int:
        return 2**self.m

    @property
    def num_outcomes(self) -> int:
        return len(self.povm)

    def payload(self, xi: int) -> str | None:
        labels = self.povm.labels
        return None if labels is None else labels[xi]

    @property
    def label(self) -> str:
        if self.kind is None:
            return "custom"
        extra = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.kind}({extra})" if extra else self.kind


@dataclass(frozen=True, eq=False)
class ConditionalState:
    outcome: int
    probability: float
    memory_state: DensityOperator


def _conditioned(branches: Sequence[np.ndarray], rows: int, root: np.ndarray) -> np.ndarray:
    """sum_k tr_K[(1 (x) sqrt(C)) |b_k><b_k| (1 (x) sqrt(C))] for branch kets b_k.

    Each branch is reshaped to a ``rows x dim_K`` matrix B, for which the
    conditioned block equals (B sqrt(C)^T)(B sqrt(C)^T)^dagger.
    """
    r = root.T
    out = np.zeros((rows, rows), dtype=np.complex128)
    for b in branches:
        w = b.reshape(rows, -1) @ r
        out += w @ dagger(w)
    return out


def conditional_states(strategy: BobStrategy, basis, msg: str) -> list[ConditionalState]:
    """A-posteriori memory states rho_{msg, xi} with p(xi | msg, basis).

    Outcomes with probability below 1e-12 are omitted.
    """
    check_message(msg, strategy.n)
    psi = encode(msg, basis).amplitudes
    branches = strategy.channel.apply_to_ket(psi)
    dm = strategy.memory_dim
    out = []
    for xi in range(strategy.num_outcomes):
        block = _conditioned(branches, dm, strategy.povm.sqrt(xi))
        p = float(np.trace(block).real)
        if p < ZERO_PROB:
            continue
        rho = DensityOperator((dm,), block / p, check=False)
        out.append(ConditionalState(xi, p, rho))
    return out


@lru_cache(maxsize=64)
def _table_cached(strategy: BobStrategy, basis: Basis):
    return {msg: {c.outcome: c for c in conditional_states(strategy, basis, msg)}
            for msg in all_messages(strategy.n)}


def conditional_table(strategy: BobStrategy, basis) -> dict[str, dict[int, ConditionalState]]:
    """``{msg: {xi: ConditionalState}}`` over all 2^N messages (cached per strategy)."""
    return _table_cached(strategy, Basis.parse(basis))


def outcome_probability(strategy: BobStrategy, xi: int, basis=Basis.Z) -> float:
    """p(xi) under the uniform message prior."""
    table = conditional_table(strategy, basis)
    return sum(row[xi].probability for row in table.values() if xi in row) / 2**strategy.n


def posterior_distribution(strategy: BobStrategy, xi: int, basis) -> dict[str, float]:
    """P(msg | xi, basis) under the uniform prior, over messages with p(xi|msg) > 0.

    Raises
    ------
    ValueError
        If ``xi`` has zero total probability.
    """
    table = conditional_table(strategy, basis)
    joint = {msg: row[xi].probability for msg, row in table.items() if xi in row}
    total = sum(joint.values())
    if total < ZERO_PROB:
        raise ValueError(f"outcome {xi} has zero probability")
    return {msg: p / total for msg, p in joint.items()}


def joint_conditional_state(strategy: BobStrategy, xi: int) -> tuple[float, DensityOperator]:
    """(p(xi), Theta_xi) on H_A' (x) H_m for the entanglement-based picture.

    ``id_A' (x) Lambda`` acts on |phi^N><phi^N|, the auxiliary system is
    conditioned on ``xi`` with the square-root rule and traced out.
    """
    n = strategy.n
    d = 2**n
    dm = strategy.memory_dim
    # (1 (x) K)|phi^N> as an A' x out matrix is K^T / sqrt(d), since |phi^N> ~ vec(1)
    branches = [k.T.reshape(-1) / math.sqrt(d) for k in strategy.channel.kraus_ops]
    block = _conditioned(branches, d * dm, strategy.povm.sqrt(xi))
    p = float(np.trace(block).real)
    if p < ZERO_PROB:
        raise ValueError(f"outcome {xi} has zero probability")
    return p, DensityOperator((d, dm), block / p, check=False)


def condition_on_alice(theta: DensityOperator, msg: str, basis) -> tuple[float, DensityOperator | None]:
    """Alice measures A' of ``theta`` in ``basis`` and obtains ``msg``.

    Returns the probability and the resulting memory state (``None`` when
    the probability is below 1e-12).
    """
    d, dm = theta.dims
    check_message(msg)
    if 2 ** len(msg) != d:
        raise DimensionError(f"message {msg!r} does not match A' dim {d}")
    a = encode(msg, basis).amplitudes
    t = theta.matrix.reshape(d, dm, d, dm)
    block = np.einsum("i,iajb,j->ab", np.conj(a), t, a)
    p = float(np.trace(block).real)
    if p < ZERO_PROB:
        return p, None
    return p, DensityOperator((dm,), block / p, check=False)


# --- built-in strategies -------------------------------------------------

def _permutation_isometry(n: int, order: Sequence[int]) -> np.ndarray:
    """Unitary sending qubit order (0..n-1) to ``order``: output qubit j = input qubit order[j]."""
    d = 2**n
    u = np.zeros((d, d), dtype=np.complex128)
    for i in range(d):
        bits = format(i, f"0{n}b")
        j = int("".join(bits[q] for q in order), 2)
        u[j, i] = 1
    return u


def _resolve_angle(measure) -> float:
    if isinstance(measure, (int, float)) and not isinstance(measure, bool):
        return float(measure)
    tag = str(measure).strip().upper()
    if tag == "Z":
        return 0.0
    if tag == "X":
        return math.pi / 4
    if tag in ("BREIDBART", "B"):
        return math.pi / 8
    try:
        return float(measure)
    except (TypeError, ValueError):
        raise ValueError(f"unknown measurement basis {measure!r}") from None


def _keep_subset(n: int, keep: Sequence[int], measure) -> BobStrategy:
    keep = sorted(set(int(q) for q in keep))
    if len(keep) > n or any(not 0 <= q < n for q in keep):
        raise ValueError(f"keep set {keep} invalid for n={n}")
    angle = _resolve_angle(measure)
    vecs = qubit_basis(angle)
    measured = [q for q in range(n) if q not in keep]
    u = _permutation_isometry(n, keep + measured)
    k = len(measured)
    labels = tuple(all_messages(k)) if k else ("",)
    elements = [np.outer(v, np.conj(v)) for v in (_product_ket(lab, vecs) for lab in labels)]
    params = {"keep": tuple(keep), "measure": measure if isinstance(measure, str) else angle}
    return BobStrategy(n, len(keep), QuantumChannel((u,)), Povm(tuple(elements), labels),
                       kind="keep_subset", params=params)


def builtin_strategy(kind: str, n: int, **params) -> BobStrategy:
    """Construct one of the built-in strategies.

    Kinds
    -----
    ``keep_subset``  keep qubits ``keep`` (0-based) coherently, measure the rest
        projectively in ``measure`` ("Z", "X", "breidbart" or an angle in
        radians; pi/8 is the Breidbart basis).
    ``keep_first``   ``keep_subset`` with ``keep = range(m)``.
    ``measure_all``  ``keep_subset`` with nothing kept (M = 0).
    ``keep_all``     everything stored, trivial POVM {1} (M = N).

    POVM labels of keep-type strategies are the measured bits (the payload).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    measure = params.get("measure", "Z")
    if kind == "keep_subset":
        return _keep_subset(n, params["keep"], measure)
    if kind == "keep_first":
        m = int(params["m"])
        if not 0 <= m <= n:
            raise ValueError(f"keep_first needs 0 <= m <= n, got m={m}")
        s = _keep_subset(n, range(m), measure)
    elif kind == "measure_all":
        s = _keep_subset(n, (), measure)
    elif kind == "keep_all":
        s = _keep_subset(n, range(n), "Z")
        return BobStrategy(n, n, s.channel, s.povm, kind="keep_all")
    else:
        raise ValueError(f"unknown strategy kind {kind!r}")
    p = {k: v for k, v in s.params.items() if k != "keep"}
    if kind == "keep_first":
        p["m"] = m
    return BobStrategy(s.n, s.m, s.channel, s.povm, kind=kind, params=p)


def kept_qubits(strategy: BobStrategy) -> tuple[int, ...] | None:
    """Kept qubits of a keep-type built-in, else ``None``."""
    if strategy.kind == "keep_all":
        return tuple(range(strategy.n))
    if strategy.kind == "keep_subset":
        return tuple(strategy.params["keep"])
    if strategy.kind == "keep_first":
        return tuple(range(strategy.params["m"]))
    if strategy.kind == "measure_all":
        return ()
    return None


def measurement_angle(strategy: BobStrategy) -> float | None:
    if strategy.kind == "keep_all":
        return 0.0
    if kept_qubits(strategy) is None:
        return None
    return _resolve_angle(strategy.params["measure"])


# --- JSON interface ------------------------------------------------------

def decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def encode_matrix(a) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in as_matrix(a)]


def strategy_from_dict(doc: dict) -> BobStrategy:
    """Build a custom strategy from ``{"n", "m", "kraus", "povm"}``.

    Matrices are nested lists of ``[re, im]`` pairs. Dimensions and
    completeness are validated.
    """
    try:
        n, m = int(doc["n"]), int(doc["m"])
        kraus = [decode_matrix(k) for k in doc["kraus"]]
        povm = [decode_matrix(c) for c in doc["povm"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed strategy document: {exc}") from exc
    labels = doc.get("labels")
    return BobStrategy(n, m, QuantumChannel(tuple(kraus)),
                       Povm(tuple(povm), tuple(labels) if labels else None))


def strategy_to_dict(strategy: BobStrategy) -> dict:
    doc = {
        "n": strategy.n,
        "m": strategy.m,
        "kraus": [encode_matrix(k) for k in strategy.channel.kraus_ops],
        "povm": [encode_matrix(c) for c in strategy.povm.elements],
    }
    if strategy.povm.labels is not None:
        doc["labels"] = list(strategy.povm.labels)
    return doc


def load_strategy(path) -> BobStrategy:
    return strategy_from_dict(json.loads(Path(path).read_text()))

