"""Discretization of a power-law spectral density into effective bath modes.

The continuous bath J(w) = 2*alpha*omega_c**(1-s) * w**s, 0 <= w <= omega_c,
is replaced by M discrete modes.  Each mesh interval [a, b] contributes one
mode that carries the interval's full spectral weight,

    lambda_k**2 = int_a^b J(t) dt,
    omega_k     = int_a^b t J(t) dt / lambda_k**2,

both evaluated as closed-form power integrals, so the zeroth and first
moments of J are exact for any exponent s.  Two meshes are provided: a
geometric (Wilson) mesh with edges Lambda**(k-M) * omega_c that piles modes
up at low frequency, and a uniform mesh with edges (k/M) * omega_c.

All quantities are in units of omega_c = 1 by convention.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "SpectralDensity",
    "BathDiscretization",
    "MeshSpec",
    "spectral_density",
    "discretize_log",
    "discretize_linear",
]


@dataclass(frozen=True)
class SpectralDensity:
    """Power-law spectral density with a hard cutoff.

    Parameters
    ----------
    alpha : float
        Dimensionless coupling strength, >= 0.
    s : float
        Spectral exponent, > 0.  s = 1 is the Ohmic case.
    omega_c : float
        Cutoff frequency, > 0.  Everything downstream assumes omega_c = 1.
    """

    alpha: float
    s: float = 1.0
    omega_c: float = 1.0

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ParameterError(f"coupling alpha must be >= 0, got {self.alpha}")
        if not (self.s > 0.0):
            raise ParameterError(f"spectral exponent s must be > 0, got {self.s}")
        if not (self.omega_c > 0.0):
            raise ParameterError(f"cutoff omega_c must be > 0, got {self.omega_c}")

    def __call__(self, omega):
        return spectral_density(omega, self)


def spectral_density(omega, sd: SpectralDensity):
    """J(omega) = 2*alpha*omega_c**(1-s)*omega**s for omega <= omega_c, else 0."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0.0):
        raise DomainError("spectral density is only defined for omega >= 0")
    j = 2.0 * sd.alpha * sd.omega_c ** (1.0 - sd.s) * w**sd.s
    j = np.where(w > sd.omega_c, 0.0, j)
    return float(j) if j.ndim == 0 else j


def _interval_moments(sd: SpectralDensity, lo, hi):
    """Exact (integral of J, weight-averaged frequency) over [lo, hi].

    The frequency is the ratio of the first to the zeroth moment and is
    independent of alpha, so it stays well defined at alpha = 0.
    """
    p = sd.s + 1.0
    q = sd.s + 2.0
    dp = hi**p - lo**p
    weight = 2.0 * sd.alpha * sd.omega_c ** (1.0 - sd.s) * dp / p
    center = (p / q) * (hi**q - lo**q) / dp
    return weight, center


@dataclass(frozen=True)
class BathDiscretization:
    """Discrete bath: mode frequencies, couplings and their mesh intervals.

    ``omegas[k]`` lies strictly inside ``[edges_lo[k], edges_hi[k]]`` and
    ``couplings[k]**2`` is the spectral weight of that interval.
    ``omega_min`` is the low-frequency scale of the mesh: the lowest interval
    edge for the geometric mesh, the first interval width omega_c/M for the
    uniform mesh (whose first interval starts at 0).
    """

    omegas: np.ndarray
    couplings: np.ndarray
    edges_lo: np.ndarray
    edges_hi: np.ndarray
    scheme: str
    omega_min: float
    spectral: SpectralDensity

    def __post_init__(self):
        for name in ("omegas", "couplings", "edges_lo", "edges_hi"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = self.omegas.size
        if m < 1:
            raise ParameterError("a bath needs at least one mode")
        for name in ("couplings", "edges_lo", "edges_hi"):
            if getattr(self, name).shape != (m,):
                raise ParameterError(f"{name} must have shape ({m},)")
        if self.scheme not in ("log", "linear"):
            raise ParameterError(f"unknown mesh scheme {self.scheme!r}")
        if self.omegas[0] <= 0.0 or np.any(np.diff(self.omegas) <= 0.0):
            raise ParameterError("mode frequencies must be positive and strictly ascending")
        if self.omegas[-1] > self.spectral.omega_c * (1.0 + 1e-12):
            raise ParameterError("mode frequencies must not exceed the cutoff")
        if np.any(self.couplings < 0.0):
            raise ParameterError("couplings must be non-negative")
        if self.spectral.alpha > 0.0 and np.any(self.couplings <= 0.0):
            raise ParameterError("all couplings must be positive when alpha > 0")
        if not (np.all(self.edges_lo < self.omegas) and np.all(self.omegas < self.edges_hi)):
            raise ParameterError("each omega_k must lie strictly inside its interval")
        # The total coupling weight must reproduce the integral of J over the
        # covered frequency range; this is what makes the mesh a faithful
        # coarse-graining of the continuum.
        total = float(np.sum(self.couplings**2))
        ref, _ = _interval_moments(self.spectral, float(self.edges_lo[0]), self.spectral.omega_c)
        if ref > 0.0 and abs(total - ref) > 1e-12 * ref:
            raise ParameterError(
                f"sum of couplings**2 = {total!r} does not match the spectral integral {ref!r}"
            )

    @property
    def n_modes(self) -> int:
        return int(self.omegas.size)

    def classical_shifts(self) -> np.ndarray:
        """Per-mode classical displacement lambda_k / (2 omega_k)."""
        return self.couplings / (2.0 * self.omegas)

    def total_weight(self) -> float:
        """Sum of lambda_k**2, i.e. the integral of J over the mesh."""
        return float(np.sum(self.couplings**2))

    def fingerprint(self) -> str:
        """Short stable hash binding checkpoints to the mesh they were built on."""
        h = hashlib.sha256()
        h.update(self.scheme.encode())
        for arr in (self.omegas, self.couplings, self.edges_lo, self.edges_hi):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]


def discretize_log(sd: SpectralDensity, ratio: float, n_modes: int) -> BathDiscretization:
    """Build a geometric (Wilson) mesh with interval edges ratio**(k - M) * omega_c.

    Parameters
    ----------
    sd : SpectralDensity
    ratio : float
        Wilson discretization parameter Lambda > 1; ratio -> 1 approaches
        the continuum.
    n_modes : int
        Number of intervals M >= 1.  The lowest edge is ratio**(-M) * omega_c.
    """
    if not (ratio > 1.0):
        raise ParameterError(f"mesh ratio must be > 1, got {ratio}")
    if n_modes < 1:
        raise ParameterError(f"n_modes must be >= 1, got {n_modes}")
    k = np.arange(n_modes + 1, dtype=float)
    edges = sd.omega_c * ratio ** (k - n_modes)
    weights, centers = _interval_moments(sd, edges[:-1], edges[1:])
    return BathDiscretization(
        omegas=centers,
        couplings=np.sqrt(weights),
        edges_lo=edges[:-1],
        edges_hi=edges[1:],
        scheme="log",
        omega_min=float(edges[0]),
        spectral=sd,
    )


def discretize_linear(sd: SpectralDensity, n_modes: int) -> BathDiscretization:
    """Build a uniform mesh with interval edges (k/M) * omega_c, k = 0..M.

    The first interval starts at zero; ``omega_min`` is reported as the
    interval width omega_c/M while ``edges_lo[0] = 0`` stays available, so
    downstream analysis can pick either low-frequency abscissa.
    """
    if n_modes < 1:
        raise ParameterError(f"n_modes must be >= 1, got {n_modes}")
    edges = sd.omega_c * np.arange(n_modes + 1, dtype=float) / n_modes
    weights, centers = _interval_moments(sd, edges[:-1], edges[1:])
    return BathDiscretization(
        omegas=centers,
        couplings=np.sqrt(weights),
        edges_lo=edges[:-1],
        edges_hi=edges[1:],
        scheme="linear",
        omega_min=float(sd.omega_c / n_modes),
        spectral=sd,
    )


@dataclass(frozen=True)
class MeshSpec:
    """Serializable mesh recipe; ``build(alpha)`` pairs it with a coupling."""

    scheme: str
    n_modes: int
    ratio: float | None = None
    s: float = 1.0
    omega_c: float = 1.0

    def __post_init__(self):
        if self.scheme not in ("log", "linear"):
            raise ParameterError(f"unknown mesh scheme {self.scheme!r}")
        if self.scheme == "log" and (self.ratio is None or not (self.ratio > 1.0)):
            raise ParameterError("log mesh requires ratio > 1")
        if self.n_modes < 1:
            raise ParameterError(f"n_modes must be >= 1, got {self.n_modes}")

    def build(self, alpha: float) -> BathDiscretization:
        sd = SpectralDensity(alpha=alpha, s=self.s, omega_c=self.omega_c)
        if self.scheme == "log":
            return discretize_log(sd, self.ratio, self.n_modes)
        return discretize_linear(sd, self.n_modes)
