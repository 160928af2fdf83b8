"""scikit-learn style wrappers around the coupling calculator and the drive designer."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .design import QUANTITIES, DesignTarget, Location, Target, optimize
from .dressing import characteristic_radii, spin_couplings
from .exceptions import InvalidArgumentError, PoleError, ResonanceError
from .pair import DriveParams, validity_report
from .vdw import PairGeometry, VdwChannelSet, sample_channels

__all__ = ["DressedCouplingModel", "DriveDesigner", "check_geometries"]

_SAMPLE = sample_channels()


def check_geometries(X) -> np.ndarray:
    """Validate an (n, 1), (n, 2) or (n, 3) array of (r_um[, theta_rad[, phi_rad]]) and pad to three columns."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] not in (1, 2, 3):
        raise InvalidArgumentError(f"expected 1 to 3 columns (r, theta, phi), got {X.shape[1]}")
    if np.any(X[:, 0] <= 0):
        raise InvalidArgumentError("separations must be positive")
    out = np.empty((X.shape[0], 3))
    out[:, 0] = X[:, 0]
    out[:, 1] = X[:, 1] if X.shape[1] > 1 else math.pi / 2
    out[:, 2] = X[:, 2] if X.shape[1] > 2 else 0.0
    if np.any((out[:, 1] < 0) | (out[:, 1] > math.pi)):
        raise InvalidArgumentError("polar angles must lie in [0, pi]")
    return out


class _DriveMixin:
    def _drive(self) -> DriveParams:
        return DriveParams(self.omega_p, self.omega_m, self.delta_p, self.delta_m, self.phi_p, self.phi_m)

    def _channels(self) -> VdwChannelSet:
        return VdwChannelSet(self.c6_a, self.c6_b, self.c6_c, self.c6_d, self.n)


class DressedCouplingModel(_DriveMixin, TransformerMixin, BaseEstimator):
    """Maps bond geometries to the four spin couplings (J_z, J_par, J_pm, J_pp) in 2pi*MHz.

    ``fit`` ignores its data and only validates the drive and channel
    parameters; ``transform`` evaluates each row.  Rows that hit a pole are
    returned as NaN when ``on_pole="nan"``.
    """

    def __init__(self, omega_p=10.0, omega_m=2.5, delta_p=-50.0, delta_m=50.0, phi_p=0.0, phi_m=0.0,
                 c6_a=_SAMPLE.c6_a, c6_b=_SAMPLE.c6_b, c6_c=_SAMPLE.c6_c, c6_d=_SAMPLE.c6_d, n=_SAMPLE.n,
                 method="auto", light_shifts="absorbed", eps_max=1.0, on_pole="raise"):
        self.omega_p = omega_p
        self.omega_m = omega_m
        self.delta_p = delta_p
        self.delta_m = delta_m
        self.phi_p = phi_p
        self.phi_m = phi_m
        self.c6_a = c6_a
        self.c6_b = c6_b
        self.c6_c = c6_c
        self.c6_d = c6_d
        self.n = n
        self.method = method
        self.light_shifts = light_shifts
        self.eps_max = eps_max
        self.on_pole = on_pole

    def fit(self, X=None, y=None):
        if self.on_pole not in ("raise", "nan"):
            raise InvalidArgumentError(f"on_pole must be 'raise' or 'nan', got {self.on_pole!r}")
        if X is not None:
            check_geometries(X)
        self.drive_ = self._drive()
        self.channels_ = self._channels()
        self.scalars_ = self.channels_.scalars()
        self.radii_ = characteristic_radii(self.drive_, self.channels_) if self.delta_p and self.delta_m else None
        self.validity_ = validity_report(self.drive_, self.channels_)
        self.n_features_out_ = len(QUANTITIES)
        return self

    def transform(self, X):
        check_is_fitted(self, "drive_")
        G = check_geometries(X)
        out = np.empty((G.shape[0], 4))
        self.valid_ = np.ones(G.shape[0], dtype=bool)
        for k, (r, th, ph) in enumerate(G):
            try:
                c = spin_couplings(PairGeometry(r, th, ph), self.drive_, self.channels_, method=self.method,
                                   light_shifts_mode=self.light_shifts, eps_max=self.eps_max)
            except (PoleError, ResonanceError):
                if self.on_pole == "raise":
                    raise
                out[k] = np.nan
                self.valid_[k] = False
                continue
            out[k] = c.as_array()
            self.valid_[k] = c.valid
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(QUANTITIES, dtype=object)


class DriveDesigner(_DriveMixin, BaseEstimator):
    """Fits drive parameters so predicted couplings match targets.

    ``fit(X, y)``: ``X`` holds bond geometries (r_um[, theta_rad]), ``y`` an
    (n, 4) array of target (J_z, J_par, J_pm, J_pp) with NaN for entries left
    free.  The drive parameters passed to the constructor are the seed;
    ``bounds`` maps parameter names to (lo, hi), unlisted ones stay fixed.
    """

    def __init__(self, omega_p=10.0, omega_m=2.5, delta_p=-50.0, delta_m=50.0, phi_p=0.0, phi_m=0.0,
                 c6_a=_SAMPLE.c6_a, c6_b=_SAMPLE.c6_b, c6_c=_SAMPLE.c6_c, c6_d=_SAMPLE.c6_d, n=_SAMPLE.n,
                 bounds=None, max_iter=4000, restarts=2, random_state=0, eps_max=1.0, method="auto"):
        self.omega_p = omega_p
        self.omega_m = omega_m
        self.delta_p = delta_p
        self.delta_m = delta_m
        self.phi_p = phi_p
        self.phi_m = phi_m
        self.c6_a = c6_a
        self.c6_b = c6_b
        self.c6_c = c6_c
        self.c6_d = c6_d
        self.n = n
        self.bounds = bounds
        self.max_iter = max_iter
        self.restarts = restarts
        self.random_state = random_state
        self.eps_max = eps_max
        self.method = method

    def fit(self, X, y):
        G = check_geometries(X)
        Y = check_array(y, dtype=float, ensure_all_finite="allow-nan")
        if Y.shape != (G.shape[0], 4):
            raise InvalidArgumentError(f"y must have shape ({G.shape[0]}, 4), got {Y.shape}")
        targets = [Target(q, Location(r=float(r), theta=float(th)), float(Y[i, k]))
                   for i, (r, th, _) in enumerate(G) for k, q in enumerate(QUANTITIES) if not np.isnan(Y[i, k])]
        self.channels_ = self._channels()
        self.result_ = optimize(DesignTarget(targets, dict(self.bounds or {})), self.channels_, None, self._drive(),
                                max_iter=self.max_iter, restarts=self.restarts, rng_seed=self.random_state,
                                eps_max=self.eps_max, method=self.method)
        self.drive_ = self.result_.drive
        return self

    def predict(self, X):
        check_is_fitted(self, "drive_")
        G = check_geometries(X)
        return np.array([spin_couplings(PairGeometry(r, th, ph), self.drive_, self.channels_, method=self.method,
                                        eps_max=self.eps_max).as_array() for r, th, ph in G])

    def score(self, X, y):
        """Negative RMS residual over the non-NaN targets."""
        Y = np.asarray(y, dtype=float)
        P = self.predict(X)
        m = ~np.isnan(Y)
        return -float(np.sqrt(np.mean((P[m] - Y[m]) ** 2)))
