"""scikit-learn style wrapper around a single simulation run."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .model import Params
from .schemes import SchemeKind
from .simulation import run_simulation
from .spectral import Grid
from .validation import check_state_array

__all__ = ["PhaseFieldSimulator"]


class PhaseFieldSimulator(TransformerMixin, BaseEstimator):
    """Evolve a stacked ``(phi, u)`` field with one of the four schemes.

    ``fit`` runs the simulation from ``X`` to ``t_final`` and keeps the
    diagnostics; ``transform`` returns the evolved stack. The spatial grid is
    inferred from the shape of ``X`` and ``length``.

    Parameters
    ----------
    scheme : {"ls", "sls", "ieq", "sieq"}
    dt, t_final : float
        Time step and final time.
    length : float or tuple of float
        Domain length, one value for all axes or one per axis (x first).
    bc : tuple of str, optional
        ``"periodic"`` or ``"noflux"`` per axis; periodic by default.
    sample_every : int
        Steps between diagnostic records.
    tol, max_iters, restart :
        Linear solver settings of the quadratized schemes.
    Other parameters are the model constants of :class:`dendrite.Params`.

    Attributes
    ----------
    grid_ : Grid
    params_ : Params
        Constants actually used (stabilizers dropped for ``ls``/``ieq``).
    state_ : State
        Final state.
    history_ : list of EnergyRecord
    diverged_at_ : int or None
    """

    def __init__(self, scheme="sieq", dt=1e-2, t_final=1.0, *, eps=0.06, eps4=0.05, m=4, lam=1.0,
                 K=1.0, D=1.0, tau=100.0, s1=4.0, s2=4.0, B=5e4, eta=1e-12, p_choice="quintic",
                 latent_variant="consistent", length=2 * math.pi, bc=None, sample_every=1,
                 tol=1e-9, max_iters=500, restart=30):
        self.scheme = scheme
        self.dt = dt
        self.t_final = t_final
        self.eps = eps
        self.eps4 = eps4
        self.m = m
        self.lam = lam
        self.K = K
        self.D = D
        self.tau = tau
        self.s1 = s1
        self.s2 = s2
        self.B = B
        self.eta = eta
        self.p_choice = p_choice
        self.latent_variant = latent_variant
        self.length = length
        self.bc = bc
        self.sample_every = sample_every
        self.tol = tol
        self.max_iters = max_iters
        self.restart = restart

    def _model_params(self) -> Params:
        names = Params.field_names()
        return Params(**{k: getattr(self, k) for k in names})

    def _grid_for(self, X) -> Grid:
        n = tuple(reversed(X.shape[1:]))
        length = self.length
        if np.ndim(length) == 0:
            length = (float(length),) * len(n)
        return Grid(n, tuple(length), None if self.bc is None else tuple(self.bc))

    def _run(self, X):
        grid = self._grid_for(X)
        return run_simulation(
            grid, self._model_params(), SchemeKind(self.scheme), X[0], X[1], self.t_final,
            sample_every=self.sample_every,
            solver_options={"tol": self.tol, "max_iters": self.max_iters, "restart": self.restart},
        )

    def fit(self, X, y=None):
        """Run from the initial stack ``X = [phi0, u0]``."""
        X = check_state_array(X)
        result = self._run(X)
        self.grid_ = result.grid
        self.params_ = result.params
        self.state_ = result.state
        self.history_ = result.records
        self.diverged_at_ = result.diverged_at
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        self._fit_input = X.copy()
        return self

    def transform(self, X):
        """Evolved ``[phi, u]``; ``X`` other than the fitted input is evolved afresh."""
        check_is_fitted(self, "state_")
        X = check_state_array(X)
        if X.shape != self._fit_input.shape:
            raise ValueError(f"X has shape {X.shape}, the estimator was fitted on {self._fit_input.shape}")
        if np.array_equal(X, self._fit_input):
            state = self.state_
        else:
            state = self._run(X).state
        return np.stack([state.phi, state.u])

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).transform(X)

    def energy(self, which="e_original") -> np.ndarray:
        """Recorded energy series of the fitted run."""
        check_is_fitted(self, "history_")
        return np.array([getattr(r, which) for r in self.history_], dtype=float)
