"""Decoder codebooks: program-indexed message sets with recovering projectors.

A :class:`Decoder` pairs a binary program string with the messages it
recovers and one memory projector per message. The projectors of a decoder
must be mutually orthogonal, sum to at most the identity and identify each
member's memory state with certainty. Program length plays the role of the
description length, so :func:`operational_complexity` is the length of the
shortest program recovering a message.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .protocol import (
    ZERO_PROB,
    Basis,
    BobStrategy,
    BASIS_VECTORS,
    all_messages,
    basis_projector,
    check_message,
    decode_matrix,
    encode_matrix,
    kept_qubits,
    measurement_angle,
    qubit_basis,
)
from .qmath import ATOL, DimensionError, as_matrix, is_hermitian

RECOVERY_ATOL = 1e-8

__all__ = [
    "Decoder",
    "DecoderFamily",
    "ValidationReport",
    "Violation",
    "build_P_hat",
    "build_Q_hat",
    "build_hat",
    "decoder_operator",
    "disjointify",
    "family_from_dict",
    "family_to_dict",
    "length_lex_programs",
    "natural_family",
    "natural_z_family",
    "operational_complexity",
    "singleton_family",
    "validate",
]


def _check_program(program: str) -> str:
    if not isinstance(program, str) or set(program) - {"0", "1"}:
        raise ValueError(f"program must be a binary string, got {program!r}")
    return program


@dataclass(frozen=True, eq=False)
class Decoder:
    program: str
    entries: Mapping[str, np.ndarray]

    def __post_init__(self):
        _check_program(self.program)
        entries = {}
        for msg, proj in self.entries.items():
            check_message(msg)
            e = as_matrix(proj).copy()
            e.setflags(write=False)
            entries[msg] = e
        object.__setattr__(self, "entries", entries)

    @property
    def messages(self) -> list[str]:
        return list(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class DecoderFamily:
    basis: Basis
    outcome: int
    decoders: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "basis", Basis.parse(self.basis))
        object.__setattr__(self, "decoders", tuple(self.decoders))

    def programs(self) -> list[str]:
        return [d.program for d in self.decoders]

    def messages(self) -> set[str]:
        return {msg for d in self.decoders for msg in d.entries}

    def upto(self, max_length: int) -> list[Decoder]:
        return [d for d in self.decoders if len(d.program) <= max_length]


@dataclass(frozen=True)
class Violation:
    check: str
    detail: str
    residual: float


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, check: str, detail: str, residual: float) -> None:
        self.violations.append(Violation(check, detail, float(residual)))

    def checks_failed(self) -> set[str]:
        return {v.check for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(f"{v.check}: {v.detail} (residual {v.residual:.3g})"
                         for v in self.violations)


def validate(family: DecoderFamily, states: Mapping) -> ValidationReport:
    """Check every decoder invariant plus perfect recovery against ``states``.

    ``states`` maps each message in ``family`` to its memory state (a
    :class:`DensityOperator` or a matrix). Violations are collected, never
    raised; a missing state is a precondition error.
    """
    report = ValidationReport()
    programs = family.programs()
    if len(set(programs)) != len(programs):
        dupes = sorted({p for p in programs if programs.count(p) > 1})
        report.add("programs", f"duplicate programs {dupes}", len(programs) - len(set(programs)))

    owner: dict[str, str] = {}
    for dec in family.decoders:
        for msg in dec.entries:
            if msg in owner:
                report.add("disjointness",
                           f"{msg} in decoders {owner[msg]!r} and {dec.program!r}", 1.0)
            else:
                owner[msg] = dec.program

    for dec in family.decoders:
        _validate_decoder(dec, states, report)
    return report


def _state_matrix(states: Mapping, msg: str) -> np.ndarray:
    if msg not in states:
        raise ValueError(f"no memory state supplied for message {msg}")
    s = states[msg]
    return as_matrix(getattr(s, "matrix", s))


def _validate_decoder(dec: Decoder, states: Mapping, report: ValidationReport) -> None:
    tag = f"decoder {dec.program!r}"
    if not dec.entries:
        return
    msgs = dec.messages
    projs = [dec.entries[z] for z in msgs]
    dim = projs[0].shape[0]
    if any(e.shape != (dim, dim) for e in projs):
        report.add("dimension", f"{tag}: projectors of mixed shape", 1.0)
        return
    rhos = [_state_matrix(states, z) for z in msgs]
    if any(r.shape != (dim, dim) for r in rhos):
        report.add("dimension", f"{tag}: memory states are not {dim}x{dim}", 1.0)
        return

    if len(msgs) > dim:
        report.add("cardinality", f"{tag}: {len(msgs)} messages exceed memory dim {dim}",
                   len(msgs) - dim)

    for z, e in zip(msgs, projs):
        herm = float(np.max(np.abs(e - np.conj(e).T)))
        idem = float(np.linalg.norm(e @ e - e))
        if herm > ATOL or idem > ATOL:
            report.add("projector", f"{tag}: E[{z}] is not a projector", max(herm, idem))

    for (i, z), (j, w) in itertools.combinations(enumerate(msgs), 2):
        r = float(np.linalg.norm(projs[i] @ projs[j]))
        if r > ATOL:
            report.add("orthogonality", f"{tag}: E[{z}] E[{w}] != 0", r)

    total = sum(projs)
    if is_hermitian(total, 1e-6):
        top = float(np.linalg.eigvalsh((total + np.conj(total).T) / 2)[-1])
        if top > 1 + ATOL:
            report.add("sub-resolution", f"{tag}: sum of projectors exceeds identity", top - 1)

    for i, z in enumerate(msgs):
        for j, w in enumerate(msgs):
            val = float(np.real(np.einsum("ab,ba->", rhos[i], projs[j])))
            r = abs(val - (1.0 if i == j else 0.0))
            if r > RECOVERY_ATOL:
                report.add("recovery", f"{tag}: tr(rho[{z}] E[{w}]) = {val:.6g}", r)


def disjointify(family: DecoderFamily) -> DecoderFamily:
    """Keep each message only in its shortest program, ties to the lexicographically least.

    Decoders emptied by the reassignment stay in the family (their composite
    projector is zero), so applying this to a disjoint family changes nothing.
    """
    best: dict[str, tuple[int, str]] = {}
    for dec in family.decoders:
        key = (len(dec.program), dec.program)
        for msg in dec.entries:
            if msg not in best or key < best[msg]:
                best[msg] = key
    decoders = tuple(
        Decoder(dec.program, {z: e for z, e in dec.entries.items() if best[z][1] == dec.program})
        for dec in family.decoders
    )
    return DecoderFamily(family.basis, family.outcome, decoders)


def operational_complexity(msg: str, family: DecoderFamily) -> float:
    """Length of the shortest program whose decoder covers ``msg`` (``inf`` if none)."""
    lengths = [len(d.program) for d in family.decoders if msg in d.entries]
    return min(lengths) if lengths else math.inf


def length_lex_programs(count: int) -> list[str]:
    """First ``count`` binary strings ordered by length, then lexicographically."""
    out: list[str] = []
    length = 0
    while len(out) < count:
        out.extend("".join(b) for b in itertools.product("01", repeat=length))
        length += 1
    return out[:count]


def decoder_operator(decoder: Decoder, basis, n: int) -> np.ndarray:
    """Composite projector sum_z B_z (x) E_z on H_A' (x) H_m for one decoder."""
    basis = Basis.parse(basis)
    if not decoder.entries:
        raise ValueError("empty decoder has no memory dimension; use build_hat")
    dm = next(iter(decoder.entries.values())).shape[0]
    out = np.zeros((2**n * dm, 2**n * dm), dtype=np.complex128)
    for msg, e in decoder.entries.items():
        check_message(msg, n)
        out += np.kron(basis_projector(msg, basis), e)
    return out


def build_hat(family: DecoderFamily, max_length: int, n: int, m: int) -> np.ndarray:
    """Sum of composite projectors over decoders with program length <= ``max_length``.

    Raises
    ------
    ValueError
        If two decoders of the family share a message.
    """
    seen: set[str] = set()
    for dec in family.decoders:
        overlap = seen.intersection(dec.entries)
        if overlap:
            raise ValueError(f"message sets overlap across decoders: {sorted(overlap)}")
        seen.update(dec.entries)
    dm = 2**m
    out = np.zeros((2**n * dm, 2**n * dm), dtype=np.complex128)
    for dec in family.upto(max_length):
        if dec.entries:
            op = decoder_operator(dec, family.basis, n)
            if op.shape != out.shape:
                raise DimensionError(f"decoder {dec.program!r} projectors are not {dm}x{dm}")
            out += op
    return out


def build_P_hat(family: DecoderFamily, max_length: int, n: int, m: int) -> np.ndarray:
    if family.basis is not Basis.Z:
        raise ValueError("build_P_hat takes a Z-basis family")
    return build_hat(family, max_length, n, m)


def build_Q_hat(family: DecoderFamily, max_length: int, n: int, m: int) -> np.ndarray:
    if family.basis is not Basis.X:
        raise ValueError("build_Q_hat takes an X-basis family")
    return build_hat(family, max_length, n, m)


# --- canonical constructions ----------------------------------------------

def natural_family(strategy: BobStrategy, xi: int, basis) -> DecoderFamily:
    """Canonical decoders for a keep-type built-in after ``basis`` is announced.

    Each decoder fixes a guess of the measured bits and reads the kept qubits
    in the announced basis, so it recovers 2^|S| messages. Guesses with zero
    posterior weight are skipped; the rest get programs in length-lex order,
    likeliest guess first (ties broken lexicographically). When the
    measurement basis matches the announcement the payload pins the guess and
    the family is a single decoder with the empty program.
    """
    basis = Basis.parse(basis)
    keep = kept_qubits(strategy)
    if keep is None:
        raise ValueError(f"no natural family for strategy kind {strategy.kind!r}")
    n = strategy.n
    measured = [q for q in range(n) if q not in keep]
    payload = strategy.payload(xi) or ""
    meas_vecs = qubit_basis(measurement_angle(strategy))
    ann_vecs = BASIS_VECTORS[basis]
    # single-qubit likelihood |<b_payload|a_guess>|^2
    overlap = np.abs(np.conj(meas_vecs).T @ ann_vecs) ** 2

    guesses = []
    for g in all_messages(len(measured)) if measured else [""]:
        w = math.prod(overlap[int(o), int(b)] for o, b in zip(payload, g))
        if w > ZERO_PROB:
            guesses.append((-round(w, 12), g))
    guesses.sort()
    programs = length_lex_programs(len(guesses))

    decoders = []
    for program, (_, g) in zip(programs, guesses):
        entries = {}
        for s in all_messages(len(keep)) if keep else [""]:
            bits = ["0"] * n
            for q, b in zip(keep, s):
                bits[q] = b
            for q, b in zip(measured, g):
                bits[q] = b
            entries["".join(bits)] = (basis_projector(s, basis) if s
                                      else np.ones((1, 1), dtype=np.complex128))
        decoders.append(Decoder(program, entries))
    return DecoderFamily(basis, xi, tuple(decoders))


def natural_z_family(strategy: BobStrategy, xi: int) -> DecoderFamily:
    """The decoder a Z-measuring keep-type strategy implies once Z is announced.

    Kept qubits are read in Z and the measured bits come from the payload;
    the single decoder has the empty program and ``2^|S|`` entries.
    """
    angle = measurement_angle(strategy)
    if angle is None:
        raise ValueError(f"natural_z_family needs a keep-type built-in, got {strategy.kind!r}")
    if abs(math.remainder(angle, math.pi / 2)) > 1e-12:
        raise ValueError("natural_z_family needs a Z-basis measurement")
    return natural_family(strategy, xi, Basis.Z)


def singleton_family(posterior: Mapping[str, float], memory_dim: int, basis, outcome: int) -> DecoderFamily:
    """One message per decoder with the identity projector, likeliest first.

    Always valid (a single message is trivially recovered) and ignores the
    quantum memory entirely.
    """
    ranked = sorted(posterior, key=lambda z: (-round(posterior[z], 12), z))
    ident = np.eye(memory_dim, dtype=np.complex128)
    decoders = tuple(Decoder(p, {z: ident}) for p, z in zip(length_lex_programs(len(ranked)), ranked))
    return DecoderFamily(basis, outcome, decoders)


# --- JSON -------------------------------------------------------------------

def family_to_dict(family: DecoderFamily) -> dict:
    return {
        "basis": family.basis.value,
        "outcome": family.outcome,
        "decoders": [
            {"program": d.program, "entries": {z: encode_matrix(e) for z, e in d.entries.items()}}
            for d in family.decoders
        ],
    }


def family_from_dict(doc: dict) -> DecoderFamily:
    try:
        decoders = tuple(
            Decoder(d["program"], {z: decode_matrix(e) for z, e in d["entries"].items()})
            for d in doc["decoders"]
        )
        return DecoderFamily(Basis.parse(doc["basis"]), int(doc["outcome"]), decoders)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed decoder family document: {exc}") from exc


def dump_families(families, path) -> None:
    Path(path).write_text(json.dumps([family_to_dict(f) for f in families]))


def load_families(path) -> list[DecoderFamily]:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        doc = [doc]
    return [family_from_dict(d) for d in doc]
