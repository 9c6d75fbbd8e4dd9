"""scikit-learn style wrappers around the functional API.

Only evaluation is a genuine transform; the dimension estimators take no data
and ``fit`` simply runs the computation, storing results in trailing-underscore
attributes.  They exist so the pipelines compose with ``get_params``,
``set_params`` and ``clone``.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import cover, levelset, littlewood
from .core import TakagiParams, evaluate_many


class TakagiTransformer(TransformerMixin, BaseEstimator):
    """Map a single column of abscissae to ``T_{a,b}(x)``.

    ``transform`` returns an ``(n, 1)`` array; ``error_bound_`` is the
    truncation-plus-roundoff bound met by every value.
    """

    def __init__(self, a=0.5, b=2, tol=1e-12):
        self.a = a
        self.b = b
        self.tol = tol

    def fit(self, X=None, y=None):
        self.params_ = TakagiParams(self.a, self.b)
        if X is not None:
            X = check_array(X, ensure_2d=True)
            if X.shape[1] != 1:
                raise ValueError(f"expected one feature, got {X.shape[1]}")
            self.n_features_in_ = 1
        _, self.error_bound_, self.terms_used_ = evaluate_many(self.params_, np.zeros(1), self.tol)
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected one feature, got {X.shape[1]}")
        values, _, _ = evaluate_many(self.params_, X[:, 0], self.tol)
        return values[:, None]


class BoxDimensionEstimator(BaseEstimator):
    """Global box-counting slope over the grids ``b**-m``, m in ``depths``."""

    def __init__(self, a=0.5, b=2, depths=(4, 5, 6, 7, 8, 9, 10), tol=None):
        self.a = a
        self.b = b
        self.depths = depths
        self.tol = tol

    def fit(self, X=None, y=None):
        p = TakagiParams(self.a, self.b)
        self.report_ = cover.box_dim_fit(p, list(self.depths), self.tol)
        self.dimension_ = self.report_.slope
        self.theoretical_ = cover.box_dim_theoretical(p)
        return self


class LevelSetEstimator(BaseEstimator):
    """Cantor level set for ``ab`` a Littlewood root; ``dimension_`` is its box slope."""

    def __init__(self, a=0.5, b=2, depth=3, tol=1e-9, k_max=16):
        self.a = a
        self.b = b
        self.depth = depth
        self.tol = tol
        self.k_max = k_max

    def fit(self, X=None, y=None):
        p = TakagiParams(self.a, self.b)
        cert = littlewood.certify(p.ab, self.k_max, 1e-9)
        if cert is None:
            raise ValueError(f"ab={p.ab!r} is not a certified Littlewood root")
        self.certificate_ = cert
        self.approx_ = levelset.build(p, cert, self.depth, self.tol)
        self.level_value_ = self.approx_.level_value
        self.dimension_ = (
            levelset.box_dim_of_intervals(self.approx_) if self.depth >= 2 else self.approx_.dim
        )
        return self


class AssouadProbeEstimator(BaseEstimator):
    """Local covering exponent around the level set, see :func:`cover.assouad_probe`."""

    def __init__(self, a=0.5, b=2, M_range=(2, 3, 4, 5), jitter=8, theta=None, threads=1):
        self.a = a
        self.b = b
        self.M_range = M_range
        self.jitter = jitter
        self.theta = theta
        self.threads = threads

    def fit(self, X=None, y=None):
        p = TakagiParams(self.a, self.b)
        cert = littlewood.certify(p.ab, 16, 1e-9)
        if cert is None:
            raise ValueError(f"ab={p.ab!r} is not a certified Littlewood root")
        depth = math.ceil((max(self.M_range) + 1) / cert.k)
        c = levelset.build(p, cert, depth)
        self.report_ = cover.assouad_probe(p, c, list(self.M_range), self.jitter, self.theta, self.threads)
        self.exponent_ = self.report_.slope
        return self
