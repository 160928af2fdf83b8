import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from rydspin import DressedCouplingModel, DriveDesigner, DriveParams, InvalidArgumentError, PoleError, ResonanceError, find_resonances, spin_couplings
from rydspin.estimators import check_geometries


def test_check_geometries_pads():
    G = check_geometries([[2.0], [3.0]])
    assert G.shape == (2, 3) and np.all(G[:, 1] == math.pi / 2) and np.all(G[:, 2] == 0)
    with pytest.raises(InvalidArgumentError):
        check_geometries([[-1.0]])
    with pytest.raises(InvalidArgumentError):
        check_geometries([[1.0, 4.0]])
    with pytest.raises(InvalidArgumentError):
        check_geometries(np.ones((2, 4)))
    with pytest.raises(ValueError):
        check_geometries([[np.nan]])


def test_params_roundtrip_and_clone():
    m = DressedCouplingModel(delta_m=47.0)
    assert m.get_params()["delta_m"] == 47.0
    c = clone(m).set_params(omega_p=8.0)
    assert c.omega_p == 8.0 and m.omega_p == 10.0


def test_transform_matches_direct(ch, ice_drive):
    X = np.array([[1.5, math.pi / 2], [2.0, 1.0], [3.0, 0.3]])
    m = DressedCouplingModel().fit(X)
    J = m.transform(X)
    assert J.shape == (3, 4)
    from rydspin.vdw import PairGeometry
    for row, (r, th) in zip(J, X):
        assert np.array_equal(row, spin_couplings(PairGeometry(r, th), ice_drive, ch).as_array())
    assert list(m.get_feature_names_out()) == ["J_z", "J_par", "J_pm", "J_pp"]
    assert m.valid_.all()


def test_pipeline():
    X = np.geomspace(1.2, 6, 9)[:, None]
    Z = make_pipeline(DressedCouplingModel(), StandardScaler()).fit_transform(X)
    assert Z.shape == (9, 4)


def test_pole_handling(ch):
    kw = dict(omega_p=10, omega_m=5, delta_p=40, delta_m=-60)
    r0 = find_resonances(DriveParams(**kw), ch, 0.0)[0].rho
    X = [[2.0, 0.0], [r0, 0.0]]
    m = DressedCouplingModel(**kw, on_pole="nan").fit()
    out = m.transform(X)
    assert np.isfinite(out[0]).all() and np.isnan(out[1]).all()
    assert list(m.valid_) == [True, False]
    with pytest.raises((PoleError, ResonanceError)):
        DressedCouplingModel(**kw).fit().transform(X)
    with pytest.raises(InvalidArgumentError):
        DressedCouplingModel(on_pole="x").fit()


def test_designer_inverse_crime(ch):
    truth = DriveParams(10, 2.5, -50, 47)
    X = np.array([[1.8], [2.6]])
    y = np.full((2, 4), np.nan)
    y[:, 0] = [spin_couplings(r, truth, ch).j_z for r in X[:, 0]]
    y[0, 2] = spin_couplings(1.8, truth, ch).j_pm
    d = DriveDesigner(delta_m=44, bounds={"delta_m": (35, 60)}, restarts=0).fit(X, y)
    assert d.drive_.delta_m == pytest.approx(47, rel=1e-6)
    assert d.score(X, y) > -1e-9
    assert d.predict(X).shape == (2, 4)
    with pytest.raises(InvalidArgumentError):
        DriveDesigner().fit(X, y[:, :3])
