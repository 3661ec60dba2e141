"""1D uniform grid, Neumann Laplacian and the space-time stimulation current."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

# Denominators of the bump exponents below this are treated as outside the
# support, so evaluation at the support boundary never divides by zero.
_BUMP_GUARD = 1e-14


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [0, L] with N intervals (N+1 nodes), N even.

    The even-interval requirement comes from the Simpson quadrature used by
    the error norms.
    """

    length: float
    intervals: int

    def __post_init__(self):
        if self.length <= 0:
            raise ConfigError("grid.length", "must be positive")
        if self.intervals < 2 or self.intervals % 2 != 0:
            raise ConfigError("grid.intervals", "must be an even integer >= 2")

    @property
    def n_nodes(self) -> int:
        return self.intervals + 1

    @property
    def h(self) -> float:
        return self.length / self.intervals

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)

    def node_at(self, x: float) -> int:
        """Index of the grid node nearest to coordinate x."""
        j = int(round(x / self.h))
        if j < 0 or j > self.intervals:
            raise ConfigError("probe", f"coordinate {x} outside [0, {self.length}]")
        return j


@dataclass(frozen=True)
class DiffusionSpec:
    """Diffusion coefficient, either given directly or derived from tissue data.

    The derived form is sigma = lambda/(1+lambda) * sigma_i / (chi * C_m),
    with equal anisotropy ratio lambda, intracellular conductivity sigma_i
    and membrane surface-to-volume ratio chi.
    """

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("diffusion.sigma", "must be positive")

    @staticmethod
    def from_tissue(anisotropy_ratio: float, sigma_i: float, chi: float,
                    membrane_capacity: float) -> "DiffusionSpec":
        if min(anisotropy_ratio, sigma_i, chi, membrane_capacity) <= 0:
            raise ConfigError("diffusion", "tissue parameters must be positive")
        sigma = (anisotropy_ratio / (1.0 + anisotropy_ratio)) * sigma_i / (chi * membrane_capacity)
        return DiffusionSpec(sigma=sigma)


def laplacian_apply(grid: Grid1D, sigma: float, u: np.ndarray,
                    out: np.ndarray | None = None) -> np.ndarray:
    """Apply the Neumann Laplacian: sigma * (u_{j+1} - 2 u_j + u_{j-1}) / h^2.

    Boundary rows use mirror ghosts (u_{-1} = u_1, u_{N+1} = u_{N-1}), which
    keeps the closure second-order accurate: end rows are
    2*sigma*(u_1 - u_0)/h^2 and 2*sigma*(u_{N-1} - u_N)/h^2.
    """
    n = grid.n_nodes
    if u.shape[0] != n:
        raise DimensionError(f"vector has length {u.shape[0]}, expected {n}")
    if out is None:
        out = np.empty_like(u)
    c = sigma / grid.h ** 2
    out[1:-1] = u[2:]
    out[1:-1] += u[:-2]
    out[1:-1] -= 2.0 * u[1:-1]
    out[1:-1] *= c
    out[0] = 2.0 * c * (u[1] - u[0])
    out[-1] = 2.0 * c * (u[-2] - u[-1])
    return out


def laplacian_bands(grid: Grid1D, sigma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub/main/super diagonals of the Neumann Laplacian matrix A."""
    n = grid.n_nodes
    c = sigma / grid.h ** 2
    sub = np.full(n - 1, c)
    sup = np.full(n - 1, c)
    diag = np.full(n, -2.0 * c)
    sub[-1] = 2.0 * c
    sup[0] = 2.0 * c
    return sub, diag, sup


def laplacian_dense(grid: Grid1D, sigma: float) -> np.ndarray:
    """Dense Neumann Laplacian (for small-grid verification only)."""
    sub, diag, sup = laplacian_bands(grid, sigma)
    a = np.diag(diag)
    a += np.diag(sub, -1)
    a += np.diag(sup, 1)
    return a


@dataclass(frozen=True)
class Stimulus1D:
    """Separable C-infinity stimulation current.

    I_app(x, t) = amplitude * bump((t - t_mid)/t_half) * bump((x - x_mid)/x_half)
    with bump(s) = exp(1 - 1/(1 - s^2)) inside |s| < 1 and 0 outside, so the
    current is identically zero outside its space-time support and infinitely
    smooth at the boundary.
    """

    amplitude: float = 50.0
    x_start: float = 0.0
    x_end: float = 1.0
    t_start: float = 0.5
    t_end: float = 2.5

    def __post_init__(self):
        if self.x_end <= self.x_start:
            raise ConfigError("stimulus.x_end", "must exceed stimulus.x_start")
        if self.t_end <= self.t_start:
            raise ConfigError("stimulus.t_end", "must exceed stimulus.t_start")

    def _bump(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        denom = 1.0 - s * s
        inside = denom > _BUMP_GUARD
        safe = np.where(inside, denom, 1.0)
        with np.errstate(over="ignore"):
            val = np.exp(1.0 - 1.0 / safe)
        return np.where(inside, val, 0.0)

    def time_factor(self, t: float) -> float:
        mid = 0.5 * (self.t_start + self.t_end)
        half = 0.5 * (self.t_end - self.t_start)
        return float(self._bump(np.asarray((t - mid) / half)))

    def space_profile(self, x: np.ndarray) -> np.ndarray:
        mid = 0.5 * (self.x_start + self.x_end)
        half = 0.5 * (self.x_end - self.x_start)
        return self.amplitude * self._bump((np.asarray(x, dtype=float) - mid) / half)


def stimulus_at(stim: Stimulus1D, x: float, t: float) -> float:
    """Point value of the stimulation current."""
    return float(stim.space_profile(np.asarray([x]))[0] * stim.time_factor(t))


ZERO_STIMULUS = Stimulus1D(amplitude=0.0)
