"""Scalar readouts of joint electron-nucleus density matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import partial_trace
from .model import G_0, N_LEVELS, SINGLET


class InvalidDensityMatrix(ValueError):
    pass


def _nuclear_dim(rho):
    n = rho.shape[0]
    if rho.shape != (n, n) or n % N_LEVELS:
        raise InvalidDensityMatrix(f"shape {rho.shape} is not 7*d square")
    return n // N_LEVELS


def _validate(rho, tol=1e-8):
    if not np.all(np.isfinite(rho)):
        raise InvalidDensityMatrix("non-finite entries")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidDensityMatrix(f"trace {np.trace(rho).real:.10g} != 1")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise InvalidDensityMatrix("not Hermitian")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -tol:
        raise InvalidDensityMatrix("not positive semidefinite")


def nuclear_state(rho):
    """Reduced nuclear density matrix (electron traced out)."""
    rho = np.asarray(rho)
    nd = _nuclear_dim(rho)
    return partial_trace(rho, (N_LEVELS, nd), keep=1)


def nuclear_polarization(rho, basis=None, signed=False, validate=True):
    """``rho_n(up, up) - rho_n(down, down)`` of the reduced nuclear state.

    ``basis`` is an optional unitary whose columns are the ``up``/``down``
    readout states (e.g. a conditional eigenbasis); by default the ``I_z``
    basis is used. For a spin-1 nucleus the extreme projections ``+1`` and
    ``-1`` play the roles of up and down. The absolute value is returned
    unless ``signed`` is set.
    """
    rho = np.asarray(rho)
    if validate:
        _validate(rho)
    rn = nuclear_state(rho)
    if basis is not None:
        u = np.asarray(basis)
        rn = u.conj().T @ rn @ u
    p = float((rn[0, 0] - rn[-1, -1]).real)
    return p if signed else abs(p)


def level_populations(rho):
    """Population of each of the seven electronic levels."""
    rho = np.asarray(rho)
    nd = _nuclear_dim(rho)
    return np.real(np.diagonal(rho)).reshape(N_LEVELS, nd).sum(axis=1)


def electron_polarization(rho):
    """Population of the ground ``m_s = 0`` level."""
    return float(level_populations(rho)[G_0])


def singlet_population(rho):
    return float(level_populations(rho)[SINGLET])


@dataclass(frozen=True)
class Readout:
    p_electron: float
    p_nuclear: float
    p_nuclear_signed: float
    singlet: float
    populations: tuple

    @classmethod
    def of(cls, rho, basis=None):
        pn = nuclear_polarization(rho, basis, signed=True, validate=False)
        return cls(
            p_electron=electron_polarization(rho),
            p_nuclear=abs(pn),
            p_nuclear_signed=pn,
            singlet=singlet_population(rho),
            populations=tuple(float(x) for x in level_populations(rho)),
        )
