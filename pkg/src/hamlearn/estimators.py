"""Estimator-style wrappers around the functional pipelines.

Each learner takes the known structure at construction and learns the
coefficients in ``fit``; results land in ``coef_`` and ``report_``.
"""

from __future__ import annotations

import logging
import warnings
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .hamiltonian import HamiltonianSpec, build_dual_graph
from .mrf import MrfSpec, SampleBatch, learn_mrf
from .realtime import build_dynamics_series, learn_from_dynamics
from .series import ExpansionParameters, RegimeError, build_all_series, truncation_order
from .solver import newton_learn

log = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 4


def choose_truncation(scale: float, epsilon: float, degree: int, truncation: Optional[int] = None,
                      allow_unguaranteed: bool = False):
    """Return ``(m_hat, guaranteed, note)``.

    An explicit ``truncation`` always wins.  Otherwise the convergent-regime
    rule is used; outside that regime a fixed default is taken only when
    ``allow_unguaranteed`` is set.
    """
    params = ExpansionParameters(degree)
    try:
        m_rule = truncation_order(scale, epsilon, params)
    except RegimeError:
        if truncation is not None:
            return truncation, False, "series radius exceeded; using the requested truncation"
        if not allow_unguaranteed:
            raise
        note = f"series radius exceeded; falling back to truncation {DEFAULT_TRUNCATION}"
        warnings.warn(note, RuntimeWarning, stacklevel=3)
        return DEFAULT_TRUNCATION, False, note
    if truncation is None:
        return m_rule, True, None
    return truncation, truncation >= m_rule, None


def _dynamics_builder(args):
    h, g, a, m_hat = args
    return build_dynamics_series(h, g, a, m_hat)


class _StructuredLearner(BaseEstimator):
    def _check_fitted(self):
        check_is_fitted(self, "coef_")

    def get_coefficients(self) -> dict:
        self._check_fitted()
        return dict(zip(self.report_.term_ids, map(float, self.coef_)))


class GibbsHamiltonianLearner(_StructuredLearner):
    """Learn Hamiltonian coefficients from Gibbs-state expectation values.

    Parameters
    ----------
    structure : HamiltonianSpec
        Terms to learn; coefficients are ignored, ``beta`` is used unless overridden.
    beta : float, optional
    epsilon : float
        Target accuracy.
    truncation : int, optional
        Series cutoff; computed from ``beta`` and ``epsilon`` when omitted.
    allow_unguaranteed : bool
        Run outside the convergent regime and mark the report accordingly.
    jobs : int
        Worker processes for series construction.
    """

    def __init__(self, structure: Optional[HamiltonianSpec] = None, beta: Optional[float] = None,
                 epsilon: float = 0.1, truncation: Optional[int] = None, allow_unguaranteed: bool = False,
                 jobs: int = 1):
        self.structure = structure
        self.beta = beta
        self.epsilon = epsilon
        self.truncation = truncation
        self.allow_unguaranteed = allow_unguaranteed
        self.jobs = jobs

    def _validate(self, expectations):
        if not isinstance(self.structure, HamiltonianSpec):
            raise TypeError("structure must be a HamiltonianSpec")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        y = column_or_1d(check_array(expectations, ensure_2d=False), warn=False)
        if len(y) != self.structure.n_terms:
            raise ValueError(f"expected {self.structure.n_terms} expectation values, got {len(y)}")
        return y

    def fit(self, expectations, y=None, sample_count: Optional[int] = None, seed: Optional[int] = None):
        """Fit from the measured ``<E_a>`` vector (term order of ``structure``)."""
        shifts = self._validate(expectations)
        h = self.structure
        beta = h.beta if self.beta is None else self.beta
        g = build_dual_graph(h)
        m_hat, trunc_ok, note = choose_truncation(beta, self.epsilon, g.max_degree, self.truncation,
                                                  self.allow_unguaranteed)
        fs = build_all_series(h, g, m_hat, shifts, jobs=self.jobs)
        report = newton_learn(fs, beta, self.epsilon, ExpansionParameters(g.max_degree, m_hat),
                              allow_unguaranteed=self.allow_unguaranteed)
        report.guaranteed = report.guaranteed and trunc_ok
        if note:
            report.warnings.append(note)
        report.sample_count, report.seed = sample_count, seed
        self.series_ = fs
        self.report_ = report
        self.coef_ = report.estimates
        return self


class DynamicsHamiltonianLearner(_StructuredLearner):
    """Learn coefficients from probe readouts ``F_a`` after evolving for ``time``.

    Parameters
    ----------
    structure : HamiltonianSpec
    time : float
        Effective evolution time (after any amplification).
    epsilon : float
    truncation : int, optional
    allow_unguaranteed : bool
    jobs : int
    """

    def __init__(self, structure: Optional[HamiltonianSpec] = None, time: float = 0.01, epsilon: float = 0.1,
                 truncation: Optional[int] = None, allow_unguaranteed: bool = False, jobs: int = 1):
        self.structure = structure
        self.time = time
        self.epsilon = epsilon
        self.truncation = truncation
        self.allow_unguaranteed = allow_unguaranteed
        self.jobs = jobs

    def fit(self, readouts, y=None, sample_count: Optional[int] = None, seed: Optional[int] = None):
        if not isinstance(self.structure, HamiltonianSpec):
            raise TypeError("structure must be a HamiltonianSpec")
        if self.time < 0:
            raise ValueError("time must be non-negative")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        shifts = column_or_1d(check_array(readouts, ensure_2d=False), warn=False)
        h = self.structure
        if len(shifts) != h.n_terms:
            raise ValueError(f"expected {h.n_terms} readouts, got {len(shifts)}")
        g = build_dual_graph(h)
        if self.time == 0:
            m_hat, trunc_ok, note = self.truncation or 1, False, None
        else:
            m_hat, trunc_ok, note = choose_truncation(self.time, self.epsilon, g.max_degree, self.truncation,
                                                      self.allow_unguaranteed)
        fs = build_all_series(h, g, m_hat, shifts, jobs=self.jobs, builder=_dynamics_builder)
        report = learn_from_dynamics(fs, self.time, self.epsilon, ExpansionParameters(g.max_degree, m_hat),
                                     allow_unguaranteed=self.allow_unguaranteed)
        report.guaranteed = report.guaranteed and trunc_ok
        if note:
            report.warnings.append(note)
        report.sample_count, report.seed = sample_count, seed
        self.series_ = fs
        self.report_ = report
        self.coef_ = report.estimates
        return self


class MRFParameterLearner(_StructuredLearner):
    """Learn hyperedge coefficients of a binary Markov random field from samples.

    Parameters
    ----------
    structure : MrfSpec
        Hypergraph; coefficients are ignored.
    beta : float, optional
        Defaults to ``structure.beta``.
    """

    def __init__(self, structure: Optional[MrfSpec] = None, beta: Optional[float] = None):
        self.structure = structure
        self.beta = beta

    def fit(self, samples, y=None, seed: Optional[int] = None):
        if not isinstance(self.structure, MrfSpec):
            raise TypeError("structure must be an MrfSpec")
        x = check_array(samples, dtype=np.int8)
        batch = SampleBatch(x, seed)
        report = learn_mrf(self.structure, batch, self.beta)
        for msg in report.warnings:
            log.warning(msg)
        self.report_ = report
        self.coef_ = report.estimates
        return self

    def get_coefficients(self) -> dict:
        self._check_fitted()
        return dict(zip(self.report_.edge_ids, map(float, self.coef_)))
