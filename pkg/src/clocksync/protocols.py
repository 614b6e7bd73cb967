"""Fringe expectations for the synchronization protocols.

Each protocol ends in a measurement whose mean follows a Ramsey fringe

    <X-quadrature> =  V cos(theta),    <Y-quadrature> = -V sin(theta),
    theta = m * phi - c,

with visibility ``V = lambda ** channel_uses`` (``lambda`` for the
unentangled baseline).  The closed forms live in :class:`Fringe`;
:func:`simulate_expectation` recomputes the same numbers by dense
density-operator evolution so the two paths can be checked against each
other.

Quadrature observables.  The X quadrature is the parity ``X^{(x)n}``.  The Y
quadrature replaces the first letter by ``Y`` (``Y X X ... X``); that string
has mean ``-V sin(theta)`` for every ``n``, whereas ``Y^{(x)n}`` would pick up
an extra ``i^n`` phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel_algebra import ChannelParams, is_cptp, make_channel
from .errors import MalformedSpec, NotCptp, OutOfRange
from .state_engine import (
    Frame,
    PauliString,
    apply_channel_at,
    apply_gate,
    basis_state,
    cat_state,
    pauli_expectation,
    plus_state,
    product_state,
)


class Kind(str, Enum):
    ENTANGLED = "Entangled"
    TRANSPORT = "Transport"
    HYBRID = "Hybrid"
    SQL_BASELINE = "SqlBaseline"


_DEFAULT_TERMINAL = {
    Kind.ENTANGLED: Frame.BOB,
    Kind.TRANSPORT: Frame.ALICE,
    Kind.HYBRID: Frame.ALICE,
    Kind.SQL_BASELINE: Frame.BOB,
}


def _enum_value(enum_cls, value, what):
    if isinstance(value, enum_cls):
        return value
    for member in enum_cls:
        if str(value).lower() == member.value.lower():
            return member
    raise MalformedSpec(f"unknown {what} {value!r}")


@dataclass(frozen=True)
class ProtocolSpec:
    """Declarative description of one bare protocol run.

    ``size`` is the qubit count for Entangled and SqlBaseline, the number of
    exchanges ``r`` for Transport, and the number of cat qubits (half the
    channel uses) for Hybrid.
    """

    kind: Kind
    size: int
    terminal: Frame | None = None
    basis: str = "X"

    def __post_init__(self):
        kind = _enum_value(Kind, self.kind, "protocol kind")
        terminal = _DEFAULT_TERMINAL[kind] if self.terminal is None else _enum_value(Frame, self.terminal, "terminal")
        basis = str(self.basis).upper()
        if basis not in ("X", "Y"):
            raise MalformedSpec(f"basis must be X or Y, got {self.basis!r}")
        if isinstance(self.size, bool) or int(self.size) != self.size or self.size < 1:
            raise MalformedSpec(f"size must be a positive integer, got {self.size!r}")
        if kind is not Kind.TRANSPORT and terminal is not _DEFAULT_TERMINAL[kind]:
            raise MalformedSpec(f"{kind.value} is measured by {_DEFAULT_TERMINAL[kind].value} only")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "terminal", terminal)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "size", int(self.size))

    @classmethod
    def hybrid(cls, channel_uses: int, basis: str = "X") -> "ProtocolSpec":
        if channel_uses % 2:
            raise MalformedSpec("Hybrid needs an even number of channel uses")
        return cls(Kind.HYBRID, channel_uses // 2, Frame.ALICE, basis)

    def channel_uses(self) -> int:
        if self.kind is Kind.TRANSPORT:
            return 2 * self.size + (1 if self.terminal is Frame.BOB else 0)
        if self.kind is Kind.HYBRID:
            return 2 * self.size
        return self.size

    def with_basis(self, basis: str) -> "ProtocolSpec":
        return ProtocolSpec(self.kind, self.size, self.terminal, basis)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "size": self.size, "terminal": self.terminal.value, "basis": self.basis}

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolSpec":
        unknown = set(data) - {"kind", "size", "terminal", "basis"}
        if unknown:
            raise MalformedSpec(f"unknown protocol keys: {sorted(unknown)}")
        return cls(data["kind"], data["size"], data.get("terminal"), data.get("basis", "X"))


@dataclass(frozen=True)
class Fringe:
    """Closed-form fringe ``V * (cos, -sin)(m * phi - c)``."""

    visibility: float
    multiplier: int
    offset: float

    def phase(self, phi: float) -> float:
        return self.multiplier * phi - self.offset

    def value(self, phi: float, basis: str = "X") -> float:
        theta = self.phase(phi)
        if basis == "X":
            return self.visibility * math.cos(theta)
        return -self.visibility * math.sin(theta)

    def slope(self, phi: float, basis: str = "X") -> float:
        theta = self.phase(phi)
        if basis == "X":
            return -self.visibility * self.multiplier * math.sin(theta)
        return -self.visibility * self.multiplier * math.cos(theta)


def fringe_for(spec: ProtocolSpec, ch: ChannelParams) -> Fringe:
    lam, alpha, size = ch.lam, ch.alpha, spec.size
    if spec.kind is Kind.ENTANGLED:
        return Fringe(lam**size, size, size * alpha)
    if spec.kind is Kind.TRANSPORT:
        if spec.terminal is Frame.ALICE:
            # the return leg cancels the channel rotation of the outbound leg
            return Fringe(lam ** (2 * size), 2 * size, 0.0)
        # one extra, uncancelled traverse to Bob
        return Fringe(lam ** (2 * size + 1), 2 * size + 1, alpha)
    if spec.kind is Kind.HYBRID:
        # no final X_A, so the recorded angle is +2 phi per qubit
        return Fringe(lam ** (2 * size), -2 * size, 0.0)
    return Fringe(lam, 1, alpha)


@dataclass(frozen=True)
class ProtocolOutcome:
    expectation: float
    visibility: float
    fringe_phase: float
    p_plus: float
    p_minus: float
    channel_uses: int


OUTCOME_COLUMNS = (
    "kind", "size", "terminal", "basis", "t", "s", "lambda", "alpha",
    "phi", "expectation", "visibility", "p_plus", "channel_uses",
)


def outcome_row(spec: ProtocolSpec, ch: ChannelParams, phi: float, outcome: ProtocolOutcome) -> dict:
    return {
        "kind": spec.kind.value,
        "size": spec.size,
        "terminal": spec.terminal.value,
        "basis": spec.basis,
        "t": ch.t,
        "s": ch.s,
        "lambda": ch.lam,
        "alpha": ch.alpha,
        "phi": phi,
        "expectation": outcome.expectation,
        "visibility": outcome.visibility,
        "p_plus": outcome.p_plus,
        "channel_uses": outcome.channel_uses,
    }


def require_cptp(ch: ChannelParams):
    M = make_channel(ch)
    report = is_cptp(M)
    if not report:
        raise NotCptp(f"channel {ch.to_dict()} is not CPTP (min Choi eigenvalue {report.min_eigenvalue:.3e})")
    return M


def fringe_probabilities(expectation: float) -> tuple[float, float]:
    if abs(expectation) > 1 + 1e-12:
        raise OutOfRange(f"|expectation| must be <= 1, got {expectation}")
    e = min(1.0, max(-1.0, float(expectation)))
    return 0.5 * (1 + e), 0.5 * (1 - e)


def _outcome(expectation, visibility, fringe_phase, uses) -> ProtocolOutcome:
    p_plus, p_minus = fringe_probabilities(expectation)
    return ProtocolOutcome(float(expectation), float(visibility), float(fringe_phase) % (2 * math.pi), p_plus, p_minus, uses)


def analytic_expectation(spec: ProtocolSpec, ch: ChannelParams, phi: float) -> ProtocolOutcome:
    require_cptp(ch)
    f = fringe_for(spec, ch)
    return _outcome(f.value(phi, spec.basis), f.visibility, f.phase(phi), spec.channel_uses())


def _quadrature(n: int, basis: str, frame: Frame) -> PauliString:
    first = "X" if basis == "X" else "Y"
    return PauliString(first + "X" * (n - 1), frame)


def _final_state(spec: ProtocolSpec, M, phi: float):
    """Evolve the initial state through gates and channel uses in protocol order."""
    if spec.kind is Kind.ENTANGLED:
        rho = cat_state(spec.size)
        for q in range(spec.size):
            rho = apply_channel_at(rho, M, q)
        return rho
    if spec.kind is Kind.TRANSPORT:
        rho = apply_gate(basis_state(1, 0), "Y90", 0, Frame.ALICE)
        for _ in range(spec.size):
            rho = apply_channel_at(rho, M, 0)
            rho = apply_gate(rho, "X", 0, Frame.BOB, phi)
            rho = apply_channel_at(rho, M, 0)
            rho = apply_gate(rho, "X", 0, Frame.ALICE)
        if spec.terminal is Frame.BOB:
            rho = apply_channel_at(rho, M, 0)
        return rho
    if spec.kind is Kind.HYBRID:
        rho = cat_state(spec.size)
        for q in range(spec.size):
            rho = apply_channel_at(rho, M, q)
            rho = apply_gate(rho, "X", q, Frame.BOB, phi)
            rho = apply_channel_at(rho, M, q)
        return rho
    rho = product_state([plus_state()] * spec.size)
    for q in range(spec.size):
        rho = apply_channel_at(rho, M, q)
    return rho


def _measure(spec: ProtocolSpec, rho, phi: float, basis: str) -> float:
    if spec.kind is Kind.SQL_BASELINE:
        # mean single-qubit outcome over the n independent qubits
        n = spec.size
        total = 0.0
        for q in range(n):
            letters = ["I"] * n
            letters[q] = basis
            total += pauli_expectation(rho, PauliString("".join(letters), Frame.BOB), phi)
        return total / n
    return pauli_expectation(rho, _quadrature(rho.n_qubits, basis, spec.terminal), phi)


def simulate_expectation(spec: ProtocolSpec, ch: ChannelParams, phi: float) -> ProtocolOutcome:
    """Brute-force counterpart of :func:`analytic_expectation`.

    Both quadratures are measured on the final state, which yields the
    visibility and fringe phase without touching the closed forms.
    """
    M = require_cptp(ch)
    rho = _final_state(spec, M, phi)
    ex = _measure(spec, rho, phi, "X")
    ey = _measure(spec, rho, phi, "Y")
    value = ex if spec.basis == "X" else ey
    return _outcome(value, math.hypot(ex, ey), math.atan2(-ey, ex), spec.channel_uses())


def nominal_uncertainty(spec: ProtocolSpec, ch: ChannelParams, phi: float) -> float:
    """Error-propagated phase uncertainty ``Delta O / |d<O>/d phi|`` of one run.

    Returns ``inf`` where the fringe slope vanishes.  For the unentangled
    baseline the single-qubit value is divided by ``sqrt(n)``.
    """
    require_cptp(ch)
    f = fringe_for(spec, ch)
    value = f.value(phi, spec.basis)
    slope = abs(f.slope(phi, spec.basis))
    if slope <= 1e-12 * abs(f.multiplier) * f.visibility or f.visibility == 0:
        return math.inf
    spread = math.sqrt(max(0.0, 1.0 - value * value))
    delta = spread / slope
    if spec.kind is Kind.SQL_BASELINE:
        delta /= math.sqrt(spec.size)
    return delta


def fringe_sweep(spec: ProtocolSpec, ch: ChannelParams, phis, simulate: bool = False) -> np.ndarray:
    fn = simulate_expectation if simulate else analytic_expectation
    return np.array([fn(spec, ch, float(p)).expectation for p in phis])
