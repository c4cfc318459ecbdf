"""q-deformed oscillator algebra on a truncated Fock space.

Energies are kept dimensionless (units of hbar*omega) and frequencies in
units of the bare mode frequency unless an ``omega`` argument is given.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from scipy import special

MAX_LAMBDA = 50.0
MAX_EXPONENT = 700.0  # sinh/cosh overflow double range just above 709
SMALL_LAMBDA = 1e-6
SMALL_PRODUCT = 1e-4  # series for [n] only while |lambda*n| stays below this
TRUNCATION_TOLERANCE = 1e-9


class OutOfRangeError(ValueError):
    """Argument would overflow the double range (|lambda*n| too large)."""


class TruncationError(RuntimeError):
    """Neglected Fock-space probability mass is above tolerance."""


class BlueShiftValidityWarning(UserWarning):
    """Small-nonlinearity approximation used outside lambda*n << 1."""


@dataclass(frozen=True)
class QDeformation:
    """Nonlinearity parameter ``lam``; the deformation is ``q = exp(lam)``."""

    lam: float = 0.0

    def __post_init__(self):
        lam = float(self.lam)
        if not math.isfinite(lam):
            raise ValueError(f"lambda must be finite, got {self.lam!r}")
        if abs(lam) > MAX_LAMBDA:
            raise OutOfRangeError(f"|lambda| must be <= {MAX_LAMBDA}, got {lam}")
        object.__setattr__(self, "lam", lam)

    @property
    def q(self) -> float:
        return math.exp(self.lam)


@dataclass(frozen=True)
class FockSpace:
    """Fock space truncated to levels ``0 .. dim-1``."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"Fock dimension must be an integer >= 2, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    def numbers(self) -> np.ndarray:
        return np.arange(self.dim, dtype=float)


class OperatorRole(str, enum.Enum):
    ANNIHILATION = "annihilation"
    CREATION = "creation"
    NUMBER = "number"
    HAMILTONIAN = "hamiltonian"
    GENERIC = "generic"


_ADJOINT_ROLE = {
    OperatorRole.ANNIHILATION: OperatorRole.CREATION,
    OperatorRole.CREATION: OperatorRole.ANNIHILATION,
}


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense complex operator on a :class:`FockSpace`.

    Hamiltonians carry their frequency scale in ``omega`` (rad/s); their
    entries are in units of hbar*omega.
    """

    entries: np.ndarray
    space: FockSpace
    role: OperatorRole = OperatorRole.GENERIC
    omega: Optional[float] = field(default=None)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        d = self.space.dim
        if entries.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got shape {entries.shape}")
        role = OperatorRole(self.role)
        if role in (OperatorRole.NUMBER, OperatorRole.HAMILTONIAN):
            err = np.max(np.abs(entries - entries.conj().T))
            if err > 1e-13:
                raise ValueError(f"{role.value} operator is not Hermitian (max |A - A^H| = {err:.3g})")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "role", role)

    @property
    def dag(self) -> "OperatorMatrix":
        role = _ADJOINT_ROLE.get(self.role, self.role)
        return OperatorMatrix(self.entries.conj().T, self.space, role, self.omega)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.space != self.space:
            raise ValueError("operators live on different Fock spaces")
        return OperatorMatrix(self.entries @ other.entries, self.space)

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()

    def to_csv(self, path) -> None:
        """Write row-major with one quoted ``re,im`` cell per entry."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.entries:
                writer.writerow([f"{float(z.real)!r},{float(z.imag)!r}" for z in row])

    @classmethod
    def from_csv(cls, path, role=OperatorRole.GENERIC, omega=None) -> "OperatorMatrix":
        with open(path, newline="") as fh:
            rows = [[complex(*map(float, cell.split(","))) for cell in row] for row in csv.reader(fh)]
        return cls(np.array(rows, dtype=complex), FockSpace(len(rows)), role, omega)


@dataclass(frozen=True)
class ModeSpectrum:
    levels: np.ndarray  # units of hbar*omega
    transition_freqs: np.ndarray  # units of omega


def _check_exponent(x) -> None:
    if np.any(np.abs(x) > MAX_EXPONENT):
        raise OutOfRangeError(f"|lambda*n| = {np.max(np.abs(x)):.4g} exceeds {MAX_EXPONENT}")


def q_bracket(n, deform: QDeformation):
    """Deformed number ``[n] = sinh(lam*n) / sinh(lam)``.

    Accepts a scalar or an array of non-negative ``n``. Exact at ``lam == 0``;
    for tiny ``lam`` (and tiny ``lam*n``) the series ``n*(1 + lam^2 (n^2-1)/6)``
    is used.
    """
    scalar = np.ndim(n) == 0
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("q_bracket needs n >= 0")
    lam = deform.lam
    if lam == 0.0:
        out = n.copy()
    else:
        x = lam * n
        _check_exponent(x)
        with np.errstate(over="ignore"):
            out = np.sinh(x) / math.sinh(lam)
        if abs(lam) < SMALL_LAMBDA:
            series = np.abs(x) < SMALL_PRODUCT
            out = np.where(series, n * (1.0 + lam * lam * (n * n - 1.0) / 6.0), out)
        if not np.all(np.isfinite(out)):
            raise OutOfRangeError(f"[n] overflows for lambda={lam}")
    return float(out) if scalar else out


def build_annihilation(space: FockSpace) -> OperatorMatrix:
    a = np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), 1)
    return OperatorMatrix(a, space, OperatorRole.ANNIHILATION)


def build_number(space: FockSpace) -> OperatorMatrix:
    return OperatorMatrix(np.diag(space.numbers()), space, OperatorRole.NUMBER)


def q_ladder_factor(space: FockSpace, deform: QDeformation) -> np.ndarray:
    """Diagonal of ``f(n) = sqrt([n] / n)``, with ``f(0) = sqrt(lam / sinh lam)``."""
    n = space.numbers()
    f = np.empty_like(n)
    f[1:] = np.sqrt(q_bracket(n[1:], deform) / n[1:])
    f[0] = math.sqrt(_lambda_over_sinh(deform.lam))
    return f


def build_q_annihilation(space: FockSpace, deform: QDeformation) -> OperatorMatrix:
    """Deformed annihilation operator ``a_q = a f(n)``.

    The ``(n-1, n)`` entry equals ``sqrt([n])``; at ``lam = 0`` the result is
    the ordinary ladder operator.
    """
    a = build_annihilation(space).entries
    a_q = a * q_ladder_factor(space, deform)[np.newaxis, :]
    return OperatorMatrix(a_q, space, OperatorRole.ANNIHILATION)


def _sparse_matmul(a: dict, b: dict) -> dict:
    rows: dict = {}
    for (k, j), v in b.items():
        rows.setdefault(k, []).append((j, v))
    out: dict = {}
    for (i, k), u in a.items():
        for j, v in rows.get(k, ()):
            out[(i, j)] = out.get((i, j), 0) + u * v
    return out


def _commutator_residual_extended(space: FockSpace, deform: QDeformation) -> float:
    lam = deform.lam
    _check_exponent(lam * space.dim)
    digits = 40 + int(abs(lam) * space.dim / math.log(10.0))
    with mpmath.workdps(digits):
        lam_mp = mpmath.mpf(lam)

        def bracket(k):
            if lam == 0.0:
                return mpmath.mpf(k)
            return mpmath.sinh(lam_mp * k) / mpmath.sinh(lam_mp)

        a_q = {(k - 1, k): mpmath.sqrt(bracket(k)) for k in range(1, space.dim)}
        a_q_dag = {(j, i): v for (i, j), v in a_q.items()}
        q = mpmath.exp(lam_mp)
        first = _sparse_matmul(a_q, a_q_dag)
        second = _sparse_matmul(a_q_dag, a_q)
        top = space.dim - 1
        worst = mpmath.mpf(0)
        keys = set(first) | set(second) | {(k, k) for k in range(top)}
        for i, j in keys:
            if i >= top or j >= top:
                continue
            r = first.get((i, j), 0) - q * second.get((i, j), 0)
            if i == j:
                r -= mpmath.exp(-lam_mp * i)
            worst = max(worst, abs(r))
        return float(worst)


def verify_q_commutator(space: FockSpace, deform: QDeformation, precision: str = "extended") -> float:
    """Largest entry of ``a_q a_q^+ - q a_q^+ a_q - q^(-n)`` below the top level.

    ``precision="extended"`` rebuilds the deformed ladder operators with
    mpmath at enough digits that the cancellation between ``[n+1]`` and
    ``q[n]`` (both of size ~exp(lam*n)) is resolved; ``"double"`` uses the
    float matrices from :func:`build_q_annihilation` and therefore carries
    absolute rounding error of order ``eps * exp(lam * dim)``.
    """
    if space.dim < 3:
        raise ValueError("commutator check needs dim >= 3")
    if precision == "extended":
        return _commutator_residual_extended(space, deform)
    if precision != "double":
        raise ValueError(f"unknown precision {precision!r}")
    a_q = build_q_annihilation(space, deform).entries
    a_q_dag = a_q.conj().T
    rhs = np.diag(np.exp(-deform.lam * space.numbers()))
    residual = a_q @ a_q_dag - deform.q * (a_q_dag @ a_q) - rhs
    top = space.dim - 1
    return float(np.max(np.abs(residual[:top, :top])))


def energy_level(n, deform: QDeformation):
    """Level ``E_n / (hbar omega) = ([n+1] + [n]) / 2``."""
    n = np.asarray(n, dtype=float)
    out = 0.5 * (q_bracket(n + 1.0, deform) + q_bracket(n, deform))
    return float(out) if np.ndim(out) == 0 else out


def q_hamiltonian(space: FockSpace, deform: QDeformation, omega: float) -> OperatorMatrix:
    if not omega > 0:
        raise ValueError("omega must be positive")
    levels = energy_level(space.numbers(), deform)
    return OperatorMatrix(np.diag(levels), space, OperatorRole.HAMILTONIAN, float(omega))


def mode_spectrum(space: FockSpace, deform: QDeformation) -> ModeSpectrum:
    levels = energy_level(space.numbers(), deform)
    return ModeSpectrum(levels=levels, transition_freqs=np.diff(levels))


def transition_frequency(n, deform: QDeformation, omega: float):
    """Level spacing ``(E_{n+1} - E_n)/hbar = omega cosh(lam (n+1))``."""
    if np.any(np.asarray(n) < 0):
        raise ValueError("n must be >= 0")
    x = deform.lam * (np.asarray(n, dtype=float) + 1.0)
    _check_exponent(x)
    out = omega * np.cosh(x)
    return float(out) if np.ndim(out) == 0 else out


def _lambda_over_sinh(lam: float) -> float:
    if abs(lam) < SMALL_LAMBDA:
        l2 = lam * lam
        return 1.0 - l2 / 6.0 + 7.0 * l2 * l2 / 360.0
    return lam / math.sinh(lam)


def _lambda_over_sinh_minus_one(lam: float) -> float:
    # (lam - sinh lam) / sinh lam without cancellation
    if lam == 0.0:
        return 0.0
    if abs(lam) < 0.1:
        l2 = lam * lam
        diff = -lam * l2 * (1 / 6 + l2 * (1 / 120 + l2 * (1 / 5040 + l2 / 362880)))
        return diff / math.sinh(lam)
    return lam / math.sinh(lam) - 1.0


def fractional_frequency_shift(n: float, deform: QDeformation) -> float:
    """``omega_tilde/omega - 1`` for the large-n frequency, free of cancellation."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = deform.lam * n
    _check_exponent(x)
    r = _lambda_over_sinh(deform.lam)
    return r * 2.0 * math.sinh(0.5 * x) ** 2 + _lambda_over_sinh_minus_one(deform.lam)


def effective_frequency_large_n(n: float, deform: QDeformation, omega: float) -> float:
    """Amplitude-dependent frequency ``omega (lam/sinh lam) cosh(lam n)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    x = deform.lam * n
    _check_exponent(x)
    return omega * _lambda_over_sinh(deform.lam) * math.cosh(x)


def blue_shift_approx(n: float, deform: QDeformation) -> float:
    """Small-nonlinearity blue shift ``delta omega / omega = lam^2 n^2 / 2``.

    Warns with :class:`BlueShiftValidityWarning` when ``lam*n > 0.1``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    x = abs(deform.lam * n)
    if x > 0.1:
        warnings.warn(f"lambda*n = {x:.3g} is not small; blue-shift series is inaccurate",
                      BlueShiftValidityWarning, stacklevel=2)
    return 0.5 * x * x


def coherent_state(alpha: complex, space: FockSpace) -> np.ndarray:
    """Truncated coherent-state amplitudes (not renormalized)."""
    c = np.empty(space.dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for k in range(1, space.dim):
        c[k] = c[k - 1] * alpha / math.sqrt(k)
    return c


def correlation_function(alpha: complex, deform: QDeformation, omega: float, t: float,
                         space: FockSpace) -> complex:
    """First-order correlation ``<alpha| a^+(t) a(0) |alpha>`` under the q-Hamiltonian.

    Evolution phases come from the diagonal of :func:`q_hamiltonian`; for
    ``lam = 0`` the result is ``|alpha|^2 exp(i omega t)``.

    Raises
    ------
    ValueError
        If ``|alpha|^2 >= dim/4``.
    TruncationError
        If the Poisson weight dropped by the truncation exceeds 1e-9.
    """
    nbar = abs(alpha) ** 2
    if nbar >= space.dim / 4:
        raise ValueError(f"|alpha|^2 = {nbar:.4g} must be below dim/4 = {space.dim / 4}")
    # a|psi> keeps levels up to dim-2; everything from dim-1 upward is dropped
    lost = nbar * special.pdtrc(space.dim - 2, nbar)
    if lost > TRUNCATION_TOLERANCE:
        raise TruncationError(f"truncation error {lost:.3g} above {TRUNCATION_TOLERANCE}; raise dim")
    psi = coherent_state(alpha, space)
    a = build_annihilation(space).entries
    levels = q_hamiltonian(space, deform, omega).diagonal()
    forward = np.exp(-1j * omega * t * levels)
    v = forward * (a @ psi)
    v = np.conj(forward) * (a.conj().T @ v)
    return complex(np.vdot(psi, v))
