"""Boltzmann analysis of solver spectra.

Treating the distinct states returned by repeated annealing reads as a
thermal ensemble, the partition function over a spectrum of energies
``E_1..E_Ns`` is ``Z = sum_i exp(-beta * E_i)`` and the free energy is
``F = -log(Z) / beta``.  At the working temperature (beta = 100, i.e.
k_B T = 1e-2 in the energy unit) the raw exponentials underflow, so both
quantities are computed in shifted form around the ground energy:
``Z' = sum_i exp(-beta * (E_i - E_min))`` with ``F = E_min - log(Z')/beta``.

Sweeping the sparsity trade-off and differentiating F twice highlights the
abrupt reorganizations of the ground code: the trade-off acts as a uniform
field pushing bits toward zero, and the largest spike of ``|d2F/dlambda2|``
locates the sharpest such transition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .errors import DomainError, SolverError
from .qubo import sc_energy, to_qubo
from .solvers import SolutionSpectrum


def partition_function(spectrum: SolutionSpectrum, beta: float) -> tuple[float, float]:
    """Shifted partition function: returns (Z', shift) with
    Z = exp(-beta * shift) * Z' and shift = E_min."""
    if len(spectrum) == 0:
        raise DomainError("empty spectrum")
    if beta <= 0:
        raise DomainError("beta must be > 0")
    shift = float(spectrum.energies[0])
    z_shifted = float(np.sum(np.exp(-beta * (spectrum.energies - shift))))
    return z_shifted, shift


def free_energy(spectrum: SolutionSpectrum, beta: float) -> float:
    """F = -log(Z)/beta, evaluated as E_min - log(Z')/beta.

    Bounded by E_min - log(N_s)/beta <= F <= E_min; tends to E_min as
    beta grows.
    """
    z_shifted, shift = partition_function(spectrum, beta)
    return shift - np.log(z_shifted) / beta


@dataclass(frozen=True)
class LambdaCurve:
    """Per-lambda spectrum summaries along an ascending trade-off grid.

    Energies (``e_min``, ``free_energy``) are reported on the
    sparse-coding scale, i.e. QUBO energy plus the 0.5*||X||^2 offset, so
    curves are comparable across lambda; the offset is lambda-independent
    and cancels in derivatives.
    """

    lambdas: np.ndarray
    e_min: np.ndarray
    free_energy: np.ndarray
    n_states: np.ndarray
    recon_error: np.ndarray
    sparsity: np.ndarray
    beta: float
    read_count: int

    def __post_init__(self):
        for name in ("lambdas", "e_min", "free_energy", "n_states",
                     "recon_error", "sparsity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name)))
        if self.lambdas.ndim != 1 or np.any(np.diff(self.lambdas) <= 0):
            raise DomainError("lambda grid must be strictly ascending")

    def __len__(self) -> int:
        return self.lambdas.shape[0]


def lambda_sweep(signal, dictionary: Dictionary, grid, encoder,
                 beta: float = 100.0) -> LambdaCurve:
    """Rebuild, solve, and summarize the QUBO at every grid point.

    ``encoder`` is a solver handle (dictionary, signal, lam) ->
    SolutionSpectrum and should keep a generous number of states so the
    partition sum sees the whole collected ensemble.  Needs >= 5 strictly
    ascending grid points.  Records, per lambda: lowest energy, state
    count, free energy, plus the ground state's reconstruction error and
    sparsity fraction.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.shape[0] < 5:
        raise DomainError("lambda grid needs at least 5 points")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("lambda grid must be strictly ascending")
    signal = np.asarray(signal, dtype=np.float64).ravel()
    e_min = np.empty_like(grid)
    f_vals = np.empty_like(grid)
    n_states = np.empty(grid.shape, dtype=np.int64)
    recon = np.empty_like(grid)
    sparsity = np.empty_like(grid)
    read_count = 0
    for i, lam in enumerate(grid):
        offset = to_qubo(dictionary, signal, lam).const_offset
        try:
            spectrum = encoder(dictionary, signal, lam)
        except Exception as exc:
            raise SolverError(f"solver failed at lambda={lam}: {exc}") from exc
        ground = spectrum.ground_state
        e_min[i] = spectrum.ground_energy + offset
        f_vals[i] = free_energy(spectrum, beta) + offset
        n_states[i] = len(spectrum)
        recon[i] = sc_energy(dictionary, signal, ground, 0.0)
        sparsity[i] = float(ground.mean())
        read_count = max(read_count, spectrum.read_count)
    return LambdaCurve(lambdas=grid, e_min=e_min, free_energy=f_vals,
                       n_states=n_states, recon_error=recon,
                       sparsity=sparsity, beta=beta, read_count=read_count)


def second_derivative(curve: LambdaCurve) -> tuple[np.ndarray, np.ndarray, float]:
    """Central second differences of F on the interior grid.

    Requires uniform spacing.  Returns (interior lambdas, d2F values, and
    the lambda where |d2F| peaks - the discontinuity locator).
    """
    lams = curve.lambdas
    if len(lams) < 3:
        raise DomainError("need at least 3 grid points")
    h = np.diff(lams)
    if np.abs(h - h[0]).max() > 1e-9 * max(abs(h[0]), 1.0):
        raise DomainError("lambda grid must be uniformly spaced")
    f = curve.free_energy
    d2 = (f[:-2] - 2.0 * f[1:-1] + f[2:]) / (h[0] * h[0])
    interior = lams[1:-1]
    locator = float(interior[int(np.argmax(np.abs(d2)))])
    return interior, d2, locator


def curve_to_csv(curve: LambdaCurve) -> str:
    """CSV: lambda,E_min,F,N_s,recon_error,sparsity."""
    lines = ["lambda,E_min,F,N_s,recon_error,sparsity"]
    for i in range(len(curve)):
        lines.append(
            f"{float(curve.lambdas[i])!r},{float(curve.e_min[i])!r},"
            f"{float(curve.free_energy[i])!r},{int(curve.n_states[i])},"
            f"{float(curve.recon_error[i])!r},{float(curve.sparsity[i])!r}"
        )
    return "\n".join(lines) + "\n"


def write_curve_csv(curve: LambdaCurve, path) -> None:
    with open(path, "w") as fh:
        fh.write(curve_to_csv(curve))
