"""Dense multi-qubit density-operator arithmetic.

Qubit 0 is the leftmost tensor factor.  ``|0>`` is the upper level, so
``Z = |0><0| - |1><1|``.  Operators written in Bob's frame are related to
Alice's by ``O_B = exp(-iZ phi/2) O_A exp(iZ phi/2)`` on every qubit, which
sends ``X -> cos(phi) X + sin(phi) Y``.

The engine is an oracle for the closed forms in :mod:`clocksync.protocols`,
not a scalable simulator, hence the hard qubit cap.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .channel_algebra import PAULIS, PauliTransferMatrix, is_cptp, superoperator_tensor
from .errors import DimensionMismatch, IndexOutOfRange, NotCptp, OutOfRange, TooManyQubits

MAX_QUBITS = 12
# Eigenvalue (PSD) checks cost O(8^n); off unless a caller opts in.
DEBUG_CHECKS = False
STATE_TOL = 1e-10


class Frame(str, Enum):
    ALICE = "Alice"
    BOB = "Bob"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    n_qubits: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise OutOfRange("n_qubits must be positive")
        if n > MAX_QUBITS:
            raise TooManyQubits(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
        m = np.array(self.matrix, dtype=complex, copy=True)
        if m.shape != (2**n, 2**n):
            raise DimensionMismatch(f"matrix shape {m.shape} does not match {n} qubits")
        if np.max(np.abs(m - m.conj().T)) > STATE_TOL:
            raise OutOfRange("density operator is not Hermitian")
        if abs(np.trace(m) - 1) > STATE_TOL:
            raise OutOfRange(f"density operator trace is {np.trace(m).real}, not 1")
        if DEBUG_CHECKS:
            check_positive(m)
        m.setflags(write=False)
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def is_positive(self, tol: float = STATE_TOL) -> bool:
        return bool(np.min(np.linalg.eigvalsh(self.matrix)) >= -tol)

    def allclose(self, other: "DensityOperator", atol: float = 1e-12) -> bool:
        return self.n_qubits == other.n_qubits and bool(
            np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol)
        )

    def to_dict(self) -> dict:
        """Debug dump: row-major ``[re, im]`` pairs."""
        flat = self.matrix.ravel()
        return {
            "n_qubits": self.n_qubits,
            "layout": "row-major",
            "entries": [[float(z.real), float(z.imag)] for z in flat],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def check_positive(m: np.ndarray, tol: float = STATE_TOL) -> None:
    lo = float(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))
    if lo < -tol:
        raise OutOfRange(f"density operator has negative eigenvalue {lo:.3e}")


@dataclass(frozen=True)
class PauliString:
    letters: str
    frame: Frame = Frame.ALICE

    def __post_init__(self):
        letters = "".join(self.letters).upper()
        if not letters or set(letters) - set("IZXY"):
            raise ValueError(f"Pauli string must use letters I, Z, X, Y; got {self.letters!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "frame", Frame(self.frame))

    def __len__(self):
        return len(self.letters)


@dataclass(frozen=True)
class FrameOffset:
    """Phase offset between the two frames, ``phi = omega * t_BA``."""

    phi: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise OutOfRange("omega must be positive")
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))

    @property
    def t_BA(self) -> float:
        return self.phi / self.omega

    @classmethod
    def from_time(cls, t_BA: float, omega: float) -> "FrameOffset":
        return cls(omega * t_BA, omega)


def _rz(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def frame_rotate(op: np.ndarray, phi: float) -> np.ndarray:
    """Re-express an operator written in Alice's frame as Bob sees it.

    Applies ``exp(-iZ phi/2)`` conjugation to every qubit of a ``2^n x 2^n``
    operator.
    """
    op = np.asarray(op, dtype=complex)
    dim = op.shape[0]
    n = int(round(math.log2(dim))) if dim > 0 else 0
    if op.shape != (dim, dim) or 2**n != dim:
        raise DimensionMismatch(f"operator shape {op.shape} is not 2^n x 2^n")
    # diagonal of the n-fold tensor product of Rz(phi)
    popcount = np.array([bin(i).count("1") for i in range(dim)])
    phases = np.exp(-0.5j * phi * (n - 2 * popcount))
    return phases[:, None] * op * phases.conj()[None, :]


def cat_state(n: int) -> DensityOperator:
    if n < 1:
        raise OutOfRange("cat state needs at least one qubit")
    if n > MAX_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    m[0, 0] = m[0, -1] = m[-1, 0] = m[-1, -1] = 0.5
    return DensityOperator(n, m)


def basis_state(n: int, index: int = 0) -> DensityOperator:
    if n > MAX_QUBITS:
        raise TooManyQubits(f"{n} qubits exceeds the cap of {MAX_QUBITS}")
    m = np.zeros((2**n, 2**n), dtype=complex)
    m[index, index] = 1.0
    return DensityOperator(n, m)


def plus_state() -> DensityOperator:
    return DensityOperator(1, 0.5 * (PAULIS["I"] + PAULIS["X"]))


def product_state(states: Sequence[DensityOperator]) -> DensityOperator:
    m = np.ones((1, 1), dtype=complex)
    for s in states:
        m = np.kron(m, s.matrix)
    return DensityOperator(sum(s.n_qubits for s in states), m)


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_Y90 = np.array([[1, -1], [1, 1]], dtype=complex) / math.sqrt(2)  # exp(-iY pi/4)


def gate_unitary(gate: str, theta: float = 0.0) -> np.ndarray:
    """Alice-frame unitary for a named gate.

    ``"X"`` is the spin flip, ``"Y90"`` the 90 degree rotation about Y taking
    ``|0>`` to ``(|0> + |1>)/sqrt(2)``, ``"H"`` the Hadamard and ``"RZ"`` the
    rotation ``exp(-iZ theta/2)``.
    """
    key = gate.upper()
    if key == "X":
        return PAULIS["X"].copy()
    if key in ("Y90", "Y-HALF-TURN"):
        return _Y90.copy()
    if key == "H":
        return _H.copy()
    if key == "RZ":
        return _rz(theta)
    raise ValueError(f"unknown gate {gate!r}")


def _check_qubit(rho: DensityOperator, qubit: int) -> None:
    if not 0 <= qubit < rho.n_qubits:
        raise IndexOutOfRange(f"qubit {qubit} out of range for {rho.n_qubits} qubits")


def _apply_left(m: np.ndarray, n: int, op: np.ndarray, qubit: int) -> np.ndarray:
    """``(I x .. op .. x I) @ m`` without forming the full operator."""
    t = m.reshape((2,) * (2 * n))
    t = np.tensordot(op, t, axes=([1], [qubit]))
    t = np.moveaxis(t, 0, qubit)
    return t.reshape(m.shape)


def _conjugate(m: np.ndarray, n: int, u: np.ndarray, qubit: int) -> np.ndarray:
    t = m.reshape((2,) * (2 * n))
    t = np.moveaxis(np.tensordot(u, t, axes=([1], [qubit])), 0, qubit)
    t = np.moveaxis(np.tensordot(u.conj(), t, axes=([1], [n + qubit])), 0, n + qubit)
    return t.reshape(m.shape)


def apply_unitary(rho: DensityOperator, u: np.ndarray, qubit: int) -> DensityOperator:
    _check_qubit(rho, qubit)
    return DensityOperator(rho.n_qubits, _conjugate(rho.matrix, rho.n_qubits, np.asarray(u, complex), qubit))


def apply_gate(
    rho: DensityOperator,
    gate: str,
    qubit: int,
    frame: Frame | str = Frame.ALICE,
    phi: float = 0.0,
    theta: float = 0.0,
) -> DensityOperator:
    """Conjugate ``rho`` by a single-qubit gate executed in the given frame."""
    _check_qubit(rho, qubit)
    u = gate_unitary(gate, theta)
    if Frame(frame) is Frame.BOB:
        u = frame_rotate(u, phi)
    return apply_unitary(rho, u, qubit)


def apply_two_qubit(rho: DensityOperator, u: np.ndarray, control: int, target: int) -> DensityOperator:
    """Conjugate by a 4x4 unitary on ``(control, target)``; used for cat preparation."""
    _check_qubit(rho, control)
    _check_qubit(rho, target)
    n = rho.n_qubits
    u4 = np.asarray(u, complex).reshape(2, 2, 2, 2)
    t = rho.matrix.reshape((2,) * (2 * n))
    t = np.tensordot(u4, t, axes=([2, 3], [control, target]))
    t = np.moveaxis(t, [0, 1], [control, target])
    t = np.tensordot(u4.conj(), t, axes=([2, 3], [n + control, n + target]))
    t = np.moveaxis(t, [0, 1], [n + control, n + target])
    return DensityOperator(n, t.reshape(rho.matrix.shape))


def apply_channel_at(
    rho: DensityOperator, M: PauliTransferMatrix, qubit: int, tol: float = 1e-9
) -> DensityOperator:
    """Apply a one-qubit channel to tensor factor ``qubit``."""
    _check_qubit(rho, qubit)
    report = is_cptp(M, tol)
    if not report:
        raise NotCptp(f"channel rejected: min Choi eigenvalue {report.min_eigenvalue:.3e}")
    n = rho.n_qubits
    sup = superoperator_tensor(M)
    t = rho.matrix.reshape((2,) * (2 * n))
    t = np.tensordot(sup, t, axes=([2, 3], [qubit, n + qubit]))
    t = np.moveaxis(t, [0, 1], [qubit, n + qubit])
    out = t.reshape(rho.matrix.shape)
    # remove round-off asymmetry so the Hermiticity check stays tight
    out = 0.5 * (out + out.conj().T)
    return DensityOperator(n, out)


def apply_channel_all(rho: DensityOperator, M: PauliTransferMatrix, qubits: Iterable[int] | None = None) -> DensityOperator:
    for q in range(rho.n_qubits) if qubits is None else qubits:
        rho = apply_channel_at(rho, M, q)
    return rho


def realize_pauli(letter: str, frame: Frame | str, phi: float) -> np.ndarray:
    op = PAULIS[letter]
    if Frame(frame) is Frame.BOB:
        op = frame_rotate(op, phi)
    return op


def pauli_expectation(rho: DensityOperator, P: PauliString, phi: float = 0.0) -> float:
    """``Tr(rho P)`` with Bob-frame letters rotated by ``phi``."""
    if len(P) != rho.n_qubits:
        raise DimensionMismatch(f"Pauli string of length {len(P)} on {rho.n_qubits} qubits")
    m = rho.matrix
    for q, letter in enumerate(P.letters):
        if letter != "I":
            m = _apply_left(m, rho.n_qubits, realize_pauli(letter, P.frame, phi), q)
    value = np.trace(m)
    if abs(value.imag) > STATE_TOL:
        raise OutOfRange(f"expectation has imaginary part {value.imag:.3e}")
    return float(np.clip(value.real, -1.0, 1.0))
