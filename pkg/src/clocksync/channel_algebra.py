"""Single-qubit channels in the Pauli-transfer-matrix picture.

Every matrix here acts on Pauli coordinates in the fixed basis order
``(I, Z, X, Y)``: column ``xi`` of a transfer matrix holds the coordinates of
``E(sigma_xi)``, so that ``E(sigma_xi) = sum_eta sigma_eta * M[eta, xi]``.

The restricted channel used throughout the package is parametrised by
``(t, s, lambda, alpha)``: a displacement ``t`` of the Bloch sphere along Z,
a compression ``s`` along Z, a compression ``lambda`` in the equatorial plane
and a rotation ``alpha`` about Z.  It is the most general qubit channel that
commutes with rotations about Z.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import NonRotation, NotPhaseCovariant, OutOfRange

BASIS_LABELS = ("I", "Z", "X", "Y")

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "Z": PAULI_Z, "X": PAULI_X, "Y": PAULI_Y}
# stacked in basis order (I, Z, X, Y)
_BASIS = np.stack([PAULIS[k] for k in BASIS_LABELS])

DEFAULT_TOL = 1e-9
_BOUND_SLACK = 1e-12


def _two_pi_mod(angle: float) -> float:
    a = math.fmod(float(angle), 2 * math.pi)
    if a < 0:
        a += 2 * math.pi
    # fmod can land on 2*pi exactly after the shift
    return 0.0 if a >= 2 * math.pi else a


@dataclass(frozen=True)
class ChannelParams:
    """Physical parameters ``(t, s, lambda, alpha)`` of a phase-covariant channel.

    A negative ``lam`` is folded into the rotation (``alpha += pi``) so the
    stored value is always nonnegative, and ``alpha`` is reduced to
    ``[0, 2*pi)``.  Complete positivity is *not* checked here; see
    :func:`is_cptp`.
    """

    t: float = 0.0
    s: float = 1.0
    lam: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        values = (self.t, self.s, self.lam, self.alpha)
        if not all(math.isfinite(float(v)) for v in values):
            raise OutOfRange(f"channel parameters must be finite, got {values}")
        for name in ("t", "s", "lam"):
            v = float(getattr(self, name))
            if abs(v) > 1 + _BOUND_SLACK:
                raise OutOfRange(f"|{name}| must be <= 1, got {v}")
        lam = float(self.lam)
        alpha = float(self.alpha)
        if lam < 0:
            lam, alpha = -lam, alpha + math.pi
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "lam", min(lam, 1.0))
        object.__setattr__(self, "alpha", _two_pi_mod(alpha))

    @classmethod
    def identity(cls) -> "ChannelParams":
        return cls(0.0, 1.0, 1.0, 0.0)

    @classmethod
    def dephasing(cls, lam: float, alpha: float = 0.0) -> "ChannelParams":
        return cls(0.0, 1.0, lam, alpha)

    @classmethod
    def depolarizing(cls, shrink: float) -> "ChannelParams":
        """Uniform Bloch-sphere shrink by ``shrink`` (``1 - p`` for strength ``p``)."""
        return cls(0.0, shrink, shrink, 0.0)

    @classmethod
    def amplitude_damping(cls, gamma: float) -> "ChannelParams":
        """Decay toward the lower level ``|1>`` with probability ``gamma``."""
        return cls(-gamma, 1.0 - gamma, math.sqrt(1.0 - gamma), 0.0)

    def replace(self, **changes) -> "ChannelParams":
        data = self.to_dict()
        if "lam" in changes:
            changes["lambda"] = changes.pop("lam")
        data.update(changes)
        return ChannelParams.from_dict(data)

    def to_dict(self) -> dict:
        return {"t": self.t, "s": self.s, "lambda": self.lam, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelParams":
        unknown = set(data) - {"t", "s", "lambda", "alpha"}
        if unknown:
            raise OutOfRange(f"unknown channel keys: {sorted(unknown)}")
        return cls(
            float(data.get("t", 0.0)),
            float(data.get("s", 1.0)),
            float(data.get("lambda", 1.0)),
            float(data.get("alpha", 0.0)),
        )


@dataclass(frozen=True, eq=False)
class PauliTransferMatrix:
    """Real 4x4 transfer matrix in basis order ``(I, Z, X, Y)``."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=float, copy=True)
        if m.shape != (4, 4):
            raise ValueError(f"transfer matrix must be 4x4, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def __matmul__(self, other: "PauliTransferMatrix") -> "PauliTransferMatrix":
        return compose(self, other)

    def __repr__(self):
        return f"PauliTransferMatrix({np.array2string(self.entries, precision=6)})"

    def allclose(self, other: "PauliTransferMatrix", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))

    def to_dict(self) -> dict:
        return {
            "basis": list(BASIS_LABELS),
            "layout": "row-major",
            "entries": [float(x) for x in self.entries.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PauliTransferMatrix":
        if list(data.get("basis", BASIS_LABELS)) != list(BASIS_LABELS):
            raise ValueError("only the (I, Z, X, Y) basis order is supported")
        return cls(np.asarray(data["entries"], dtype=float).reshape(4, 4))

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class ChoiOperator:
    """Unit-trace Choi matrix, output factor first: ``(E x id)(|Phi><Phi|)``."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex, copy=True)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def eigenvalues(self) -> np.ndarray:
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return np.linalg.eigvalsh(herm)

    def input_marginal(self) -> np.ndarray:
        """Partial trace over the output factor; ``I/2`` for trace-preserving maps."""
        return np.einsum("aiaj->ij", self.entries.reshape(2, 2, 2, 2))


@dataclass(frozen=True)
class CptpReport:
    cptp: bool
    eigenvalues: tuple
    tp_residual: float
    tol: float

    @property
    def min_eigenvalue(self) -> float:
        return min(self.eigenvalues)

    def __bool__(self):
        return self.cptp

    def to_dict(self) -> dict:
        return {
            "cptp": self.cptp,
            "choi_eigenvalues": list(self.eigenvalues),
            "tp_residual": self.tp_residual,
            "tol": self.tol,
        }


def make_channel(params: ChannelParams) -> PauliTransferMatrix:
    c, s_ = math.cos(params.alpha), math.sin(params.alpha)
    lam = params.lam
    return PauliTransferMatrix(
        np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [params.t, params.s, 0.0, 0.0],
                [0.0, 0.0, lam * c, -lam * s_],
                [0.0, 0.0, lam * s_, lam * c],
            ]
        )
    )


def z_rotation_ptm(theta: float) -> PauliTransferMatrix:
    """Transfer matrix of ``rho -> exp(-iZ theta/2) rho exp(iZ theta/2)``."""
    return make_channel(ChannelParams(0.0, 1.0, 1.0, theta))


def bloch_z_rotation(theta: float) -> np.ndarray:
    """3x3 rotation about Z acting on Bloch coordinates ordered (Z, X, Y)."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _check_rotation(r: np.ndarray, name: str, tol: float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise NonRotation(f"{name} must be 3x3, got shape {r.shape}")
    if not np.allclose(r.T @ r, np.eye(3), atol=tol) or abs(np.linalg.det(r) - 1) > tol:
        raise NonRotation(f"{name} is not a proper rotation")
    return r


def make_general_channel(
    t_vec: Sequence[float],
    R1: np.ndarray,
    S_diag: Sequence[float],
    R2: np.ndarray,
    tol: float = 1e-9,
) -> PauliTransferMatrix:
    """General qubit transfer matrix ``[[1, 0], [t, R2 @ S @ R1]]``.

    ``t_vec`` and ``S_diag`` are given in (Z, X, Y) order, matching the basis
    order of the lower-right 3x3 block.
    """
    r1 = _check_rotation(R1, "R1", tol)
    r2 = _check_rotation(R2, "R2", tol)
    s = np.asarray(S_diag, dtype=float)
    if s.shape != (3,) or np.any(np.abs(s) > 1 + _BOUND_SLACK):
        raise OutOfRange("S_diag must hold three values with |s| <= 1")
    m = np.zeros((4, 4))
    m[0, 0] = 1.0
    m[1:, 0] = np.asarray(t_vec, dtype=float)
    m[1:, 1:] = r2 @ np.diag(s) @ r1
    return PauliTransferMatrix(m)


def compose(second: PauliTransferMatrix, first: PauliTransferMatrix) -> PauliTransferMatrix:
    """Apply ``first``, then ``second``."""
    return PauliTransferMatrix(second.entries @ first.entries)


def pauli_coordinates(op: np.ndarray) -> np.ndarray:
    """Complex coordinates ``a`` with ``op = sum_xi a[xi] sigma_xi``."""
    op = np.asarray(op, dtype=complex)
    return 0.5 * np.einsum("kji,ij->k", _BASIS, op)


def from_pauli_coordinates(coords: np.ndarray) -> np.ndarray:
    return np.einsum("k,kij->ij", np.asarray(coords, dtype=complex), _BASIS)


def apply_channel(M: PauliTransferMatrix, op: np.ndarray) -> np.ndarray:
    """Apply a transfer matrix to any 2x2 operator (linear extension)."""
    return from_pauli_coordinates(M.entries @ pauli_coordinates(op))


def superoperator_tensor(M: PauliTransferMatrix) -> np.ndarray:
    """Rank-4 tensor ``S`` with ``E(rho)[a, b] = sum_cd S[a, b, c, d] rho[c, d]``."""
    # E(rho) = 1/2 sum_{eta,xi} M[eta,xi] sigma_eta Tr(sigma_xi rho)
    return 0.5 * np.einsum("ex,eab,xdc->abcd", M.entries, _BASIS, _BASIS)


def choi_of(M: PauliTransferMatrix) -> ChoiOperator:
    sup = superoperator_tensor(M)
    # <a b| C |c d> = 1/2 E(|b><d|)[a, c]
    choi = 0.5 * np.einsum("acbd->abcd", sup).reshape(4, 4)
    return ChoiOperator(choi)


def is_cptp(M: PauliTransferMatrix, tol: float = DEFAULT_TOL) -> CptpReport:
    if tol <= 0:
        raise OutOfRange("tol must be positive")
    tp_residual = float(np.max(np.abs(M.entries[0] - np.array([1.0, 0.0, 0.0, 0.0]))))
    eigs = choi_of(M).eigenvalues()
    ok = tp_residual <= tol and bool(np.all(eigs >= -tol))
    return CptpReport(ok, tuple(float(e) for e in eigs), tp_residual, tol)


_COVARIANCE_GRID = np.linspace(0.0, 2 * math.pi, 17)[:-1] + 0.1


def is_phase_covariant(M: PauliTransferMatrix, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``M`` commutes with every rotation about Z (checked on a grid)."""
    if tol <= 0:
        raise OutOfRange("tol must be positive")
    for theta in _COVARIANCE_GRID:
        rz = z_rotation_ptm(theta).entries
        if np.max(np.abs(M.entries @ rz - rz @ M.entries)) > tol:
            return False
    return True


def equatorial_params(M: PauliTransferMatrix) -> tuple[float, float]:
    """``(lambda, alpha)`` read off the X-Y block of a phase-covariant matrix."""
    lam = math.hypot(M.entries[2, 2], M.entries[3, 2])
    alpha = _two_pi_mod(math.atan2(M.entries[3, 2], M.entries[2, 2])) if lam > 0 else 0.0
    return lam, alpha


def project_equatorial(op: np.ndarray) -> np.ndarray:
    """Keep only the X and Y components of a 2x2 operator: ``(O - Z O Z) / 2``."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {op.shape}")
    return 0.5 * (op - PAULI_Z @ op @ PAULI_Z)


def _rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def projected_channel_action(M: PauliTransferMatrix, op: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Closed-form equatorial action ``lambda * Rz(alpha) Pi(O) Rz(alpha)^dagger``."""
    if not is_phase_covariant(M, tol):
        raise NotPhaseCovariant("projected action needs a Z-covariant channel")
    lam, alpha = equatorial_params(M)
    u = _rz(alpha)
    return lam * u @ project_equatorial(op) @ u.conj().T


def cptp_region_closed_form(t: float, s: float, lam: float) -> tuple[float, float]:
    """Margins of the two inequalities bounding the CP region at ``alpha = 0``.

    Returns ``(1 - s - |t|, (1 + s)**2 - t**2 - 4 lam**2)``; the channel is
    completely positive iff both are nonnegative.
    """
    return 1.0 - s - abs(t), (1.0 + s) ** 2 - t**2 - 4.0 * lam**2
