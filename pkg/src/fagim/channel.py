"""Transmit-side spatial correlation and correlated Rayleigh channel sampling.

The receive side is uncorrelated, so a channel realization is
``H = G @ sqrt(diag(eigvals)) @ U^H`` with ``G`` an ``n_rx x N`` matrix of
i.i.d. CN(0, 1) entries and ``J = U diag(eigvals) U^H``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

# eigenvalues above -NEG_EIG_TOL * N are floating-point noise
NEG_EIG_TOL = 1e-10


def correlation_coefficient(t_i, t_j, wavelength: float = 1.0) -> float:
    """sinc(k * |t_i - t_j|) with k = 2*pi/wavelength and sinc(z) = sin(z)/z."""
    dx = float(t_i[0]) - float(t_j[0])
    dy = float(t_i[1]) - float(t_j[1])
    d = np.hypot(dx, dy)
    # np.sinc is the normalized sinc sin(pi u)/(pi u); u = k d / pi = 2 d / wavelength
    return float(np.sinc(2.0 * d / wavelength))


def correlation_matrix(positions: np.ndarray, wavelength: float = 1.0) -> np.ndarray:
    """Dense ``N x N`` sinc correlation matrix of the given port positions."""
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    return np.sinc(2.0 * dist / wavelength)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Correlation matrix ``J`` with its cached eigendecomposition."""

    J: np.ndarray
    U: np.ndarray
    eigenvalues: np.ndarray
    raw_eigenvalues: np.ndarray
    # sqrt(diag(eigenvalues)) @ U^H, so that H = G @ factor
    factor: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.J.shape[0]

    @classmethod
    def from_matrix(cls, J: np.ndarray) -> "CorrelationMatrix":
        J = np.asarray(J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError(f"correlation matrix must be square, got shape {J.shape}")
        n = J.shape[0]
        try:
            w, U = np.linalg.eigh(J)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition failed: {exc}") from exc
        if np.any(w < -NEG_EIG_TOL * n):
            raise NumericalError(
                f"correlation matrix is not positive semidefinite (min eigenvalue {w.min():.3e})"
            )
        lam = np.clip(w, 0.0, None)
        factor = np.sqrt(lam)[:, None] * U.conj().T
        for arr in (J, U, lam, w, factor):
            arr.setflags(write=False)
        return cls(J=J, U=U, eigenvalues=lam, raw_eigenvalues=w, factor=factor)


def build_correlation_matrix(positions: np.ndarray, wavelength: float = 1.0) -> CorrelationMatrix:
    """Correlation matrix of a set of port positions, e.g. ``plan.coordinates``."""
    return CorrelationMatrix.from_matrix(correlation_matrix(positions, wavelength))


def standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts each N(0, 1/2)."""
    if isinstance(shape, int):
        shape = (shape,)
    z = rng.standard_normal((*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)


def sample_channel(corr: CorrelationMatrix, n_rx: int, rng: np.random.Generator) -> np.ndarray:
    """One ``n_rx x N`` channel realization."""
    if n_rx < 1:
        raise ValueError("n_rx must be >= 1")
    return correlate(standard_complex_normal(rng, (n_rx, corr.N)), corr)


def correlate(g: np.ndarray, corr: CorrelationMatrix) -> np.ndarray:
    """Apply the transmit correlation to uncorrelated matrices ``g`` (``(..., n_rx, N)``)."""
    return g @ corr.factor
