"""Shot sampling and the bit-by-bit offset estimator.

The dimensionless offset ``T`` in ``phi = pi * T`` is read out one binary
digit at a time.  Bit ``j`` uses a protocol instance with ``2**j`` channel
uses, whose fringe phase is ``2**j * phi``.  Modulo ``2*pi`` the already
known digits contribute an even multiple of ``pi``, so the phase lies in
``[pi * t_j, pi * t_j + pi)`` and the bit is decided by which half-circle
the two-quadrature phase estimate falls in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel_algebra import ChannelParams
from .errors import ClocksyncError, DegenerateShots, FlatFringe, MalformedSpec, OutOfRange
from .protocols import Kind, ProtocolSpec, analytic_expectation, fringe_for, require_cptp
from .state_engine import Frame

GENERATOR_NAME = "numpy.PCG64"


class ShotSampler:
    """Seeded binomial shot source with deterministic sub-streams.

    ``child(i)`` derives an independent stream from ``(seed, path + (i,))``
    via :class:`numpy.random.SeedSequence`, so concurrent tasks that each take
    their own child produce schedule-independent results.
    """

    generator_name = GENERATOR_NAME

    def __init__(self, seed: int = 0, stream: tuple = ()):
        if not 0 <= int(seed) < 2**64:
            raise OutOfRange("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.stream = tuple(int(s) for s in stream)
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.stream)))

    def __repr__(self):
        return f"ShotSampler(seed={self.seed}, stream={self.stream})"

    def child(self, index: int) -> "ShotSampler":
        return ShotSampler(self.seed, self.stream + (index,))

    def binomial(self, n: int, p: float) -> int:
        return int(self._rng.binomial(n, p))

    def uniform(self) -> float:
        return float(self._rng.random())


def sample_shots(p_plus: float, nu: int, sampler: ShotSampler) -> tuple[int, int]:
    if not -1e-12 <= p_plus <= 1 + 1e-12 or math.isnan(p_plus):
        raise OutOfRange(f"p_plus must lie in [0, 1], got {p_plus}")
    if nu < 1:
        raise OutOfRange("nu must be positive")
    plus = sampler.binomial(int(nu), min(1.0, max(0.0, p_plus)))
    return plus, int(nu) - plus


def _mean_outcome(expectation: float, shots: int, sampler: ShotSampler) -> float:
    plus, minus = sample_shots(0.5 * (1 + expectation), shots, sampler)
    return (plus - minus) / shots


def bit_instance(j: int, kind: Kind | str) -> ProtocolSpec:
    """Protocol instance with ``2**j`` channel uses used to read bit ``j``."""
    kind = Kind(kind) if not isinstance(kind, Kind) else kind
    if j < 1:
        raise OutOfRange("bit index starts at 1")
    if kind is Kind.ENTANGLED:
        return ProtocolSpec(kind, 2**j)
    if kind is Kind.TRANSPORT:
        return ProtocolSpec(kind, 2 ** (j - 1), Frame.ALICE)
    if kind is Kind.HYBRID:
        return ProtocolSpec(kind, 2 ** (j - 1))
    raise MalformedSpec(f"{kind.value} cannot run the extended protocol")


@dataclass(frozen=True)
class BitEstimate:
    j: int
    bit: int
    theta_hat: float
    shots_x: int
    shots_y: int
    margin: float
    resampled: bool = False


def _decision_margin(theta: float) -> float:
    r = theta % math.pi
    return min(r, math.pi - r)


def estimate_bit(
    j: int,
    nu: int,
    kind: Kind | str,
    ch: ChannelParams,
    true_phi: float,
    sampler: ShotSampler,
) -> BitEstimate:
    """Decide bit ``j`` from ``nu`` shots split over the X and Y quadratures."""
    if nu < 2:
        raise OutOfRange("need at least two shots to sample both quadratures")
    spec = bit_instance(j, kind)
    ex = analytic_expectation(spec.with_basis("X"), ch, true_phi).expectation
    ey = analytic_expectation(spec.with_basis("Y"), ch, true_phi).expectation
    shots_x, shots_y = (nu + 1) // 2, nu // 2
    # Hybrid records -2^j phi; flip so theta_hat always estimates +2^j phi
    orientation = 1 if fringe_for(spec, ch).multiplier > 0 else -1

    resampled = False
    for attempt in range(2):
        xbar = _mean_outcome(ex, shots_x, sampler)
        ybar = _mean_outcome(ey, shots_y, sampler)
        if xbar != 0.0 or ybar != 0.0:
            break
        resampled = True
    else:
        raise DegenerateShots(f"bit {j}: both quadrature means are zero after resampling")

    theta = (orientation * math.atan2(-ybar, xbar)) % (2 * math.pi)
    if theta >= 2 * math.pi:
        theta = 0.0
    bit = 1 if theta >= math.pi else 0
    return BitEstimate(j, bit, theta, shots_x, shots_y, _decision_margin(theta), resampled)


@dataclass(frozen=True)
class SyncEstimate:
    bits: tuple
    T_hat: float
    phi_hat: float
    delta_t: float
    channel_uses_total: int
    protocol_kind: Kind
    nu: int
    omega: float
    seed: int
    generator: str = GENERATOR_NAME

    @property
    def k(self) -> int:
        return len(self.bits)

    def to_dict(self) -> dict:
        return {
            "protocol_kind": self.protocol_kind.value,
            "k": self.k,
            "nu": self.nu,
            "omega": self.omega,
            "bits": [b.bit for b in self.bits],
            "theta_hats": [b.theta_hat for b in self.bits],
            "margins": [b.margin for b in self.bits],
            "shots_x": [b.shots_x for b in self.bits],
            "shots_y": [b.shots_y for b in self.bits],
            "resampled": [b.resampled for b in self.bits],
            "T_hat": self.T_hat,
            "phi_hat": self.phi_hat,
            "delta_t": self.delta_t,
            "N": self.channel_uses_total,
            "seed": self.seed,
            "generator": self.generator,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyncEstimate":
        k = len(data["bits"])
        bits = tuple(
            BitEstimate(
                j + 1,
                int(data["bits"][j]),
                float(data["theta_hats"][j]),
                int(data["shots_x"][j]),
                int(data["shots_y"][j]),
                float(data["margins"][j]),
                bool(data["resampled"][j]),
            )
            for j in range(k)
        )
        return cls(
            bits,
            float(data["T_hat"]),
            float(data["phi_hat"]),
            float(data["delta_t"]),
            int(data["N"]),
            Kind(data["protocol_kind"]),
            int(data["nu"]),
            float(data["omega"]),
            int(data["seed"]),
            data.get("generator", GENERATOR_NAME),
        )

    def bit_rows(self) -> list[dict]:
        return [
            {
                "j": b.j,
                "bit": b.bit,
                "theta_hat": b.theta_hat,
                "margin": b.margin,
                "shots_x": b.shots_x,
                "shots_y": b.shots_y,
                "resampled": b.resampled,
            }
            for b in self.bits
        ]


BIT_COLUMNS = ("j", "bit", "theta_hat", "margin", "shots_x", "shots_y", "resampled")


def estimate_offset(
    k: int,
    nu: int,
    kind: Kind | str,
    ch: ChannelParams,
    true_T: float,
    omega: float,
    sampler: ShotSampler,
) -> SyncEstimate:
    """Run the extended protocol for bits ``1..k`` of ``T = phi / pi``.

    The integer digit of ``T`` is assumed known and equal to zero.  Bit ``j``
    draws from ``sampler.child(j)``.
    """
    if k < 1:
        raise OutOfRange("k must be at least 1")
    if not omega > 0:
        raise OutOfRange("omega must be positive")
    kind = Kind(kind) if not isinstance(kind, Kind) else kind
    true_phi = math.pi * true_T
    bits = []
    uses = 0
    for j in range(1, k + 1):
        try:
            est = estimate_bit(j, nu, kind, ch, true_phi, sampler.child(j))
        except ClocksyncError as exc:
            exc.bit_index = j
            raise
        bits.append(est)
        per_shot = bit_instance(j, kind).channel_uses()
        uses += per_shot * (est.shots_x + est.shots_y) * (2 if est.resampled else 1)
    T_hat = sum(b.bit * 2.0 ** -b.j for b in bits)
    return SyncEstimate(
        tuple(bits),
        T_hat,
        math.pi * T_hat,
        math.pi / (2**k * omega),
        uses,
        kind,
        int(nu),
        float(omega),
        sampler.seed,
    )


def resource_count(k: int, nu: int) -> int:
    """Closed-form channel-use total ``2 nu (2^k - 1)`` of the extended protocol."""
    return 2 * nu * (2**k - 1)


def truncate_bits(T: float, k: int) -> float:
    return math.floor(T * 2**k) / 2**k


def decision_tails(T: float, k: int) -> list[float]:
    """Fractional tails ``0.t_{j+1} t_{j+2} ...`` seen by the decision for bits 1..k."""
    return [(T * 2**j) % 1.0 for j in range(1, k + 1)]


def draw_guarded_T(k: int, guard: float, sampler: ShotSampler, max_tries: int = 100_000) -> float:
    """Uniform ``T`` in [0, 1) whose decision tails all stay ``guard`` away from 0 and 1."""
    for _ in range(max_tries):
        T = sampler.uniform()
        if all(guard <= u <= 1 - guard for u in decision_tails(T, k)):
            return T
    raise OutOfRange(f"no offset satisfies guard {guard} for k={k}")


class UncertaintyEstimate(NamedTuple):
    mean_phi_hat: float
    std_phi_hat: float


def choose_quadrature(spec: ProtocolSpec, ch: ChannelParams, phi: float) -> str:
    f = fringe_for(spec, ch)
    sx, sy = abs(f.slope(phi, "X")), abs(f.slope(phi, "Y"))
    if max(sx, sy) < 1e-9:
        raise FlatFringe(f"fringe slope vanishes at phi={phi}")
    return "X" if sx >= sy else "Y"


def _invert_on_branch(mean: float, visibility: float, theta0: float, basis: str) -> float:
    """Phase on the monotonic fringe branch containing ``theta0`` that reproduces ``mean``."""
    two_pi = 2 * math.pi
    if basis == "X":
        v = min(1.0, max(-1.0, mean / visibility))
        base = math.floor(theta0 / two_pi) * two_pi
        local = theta0 - base
        est = math.acos(v) if local <= math.pi else two_pi - math.acos(v)
        return base + est
    w = min(1.0, max(-1.0, -mean / visibility))
    shifted = theta0 + math.pi / 2
    base = math.floor(shifted / two_pi) * two_pi
    local = shifted - base
    est = math.asin(w) if local <= math.pi else math.pi - math.asin(w)
    return base + est


def empirical_uncertainty(
    kind: Kind | str,
    size: int,
    ch: ChannelParams,
    phi: float,
    nu: int,
    trials: int,
    sampler: ShotSampler,
) -> UncertaintyEstimate:
    """Monte Carlo spread of the single-fringe phase estimate.

    Each trial samples ``nu`` shots of the steeper quadrature (``n * nu``
    single-qubit shots for the unentangled baseline), inverts the mean
    through the fringe on the branch containing the true phase and divides
    by the phase multiplier.  The channel rotation is treated as unknown, so
    the returned mean carries its systematic shift.
    """
    if trials < 2:
        raise OutOfRange("need at least two trials for a spread")
    require_cptp(ch)
    spec = ProtocolSpec(kind, size)
    f = fringe_for(spec, ch)
    basis = choose_quadrature(spec, ch, phi)
    expectation = f.value(phi, basis)
    shots = nu * size if spec.kind is Kind.SQL_BASELINE else nu
    theta0 = f.phase(phi)
    estimates = np.empty(trials)
    for i in range(trials):
        mean = _mean_outcome(expectation, shots, sampler.child(i))
        estimates[i] = _invert_on_branch(mean, f.visibility, theta0, basis) / f.multiplier
    return UncertaintyEstimate(float(np.mean(estimates)), float(np.std(estimates, ddof=1)))


def heisenberg_uncertainty(n: int, lam: float = 1.0) -> float:
    """Best single-run phase uncertainty ``1 / (n lambda^n)`` with ``n`` channel uses."""
    return 1.0 / (n * lam**n)


def sql_baseline(n: int, lam: float = 1.0) -> float:
    """Phase uncertainty ``1 / (sqrt(n) lambda)`` from ``n`` unentangled qubits."""
    return 1.0 / (math.sqrt(n) * lam)
