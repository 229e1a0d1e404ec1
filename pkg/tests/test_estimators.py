import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qkdroute.estimators import ExhaustiveRouter, QmcRouter, TnsRouter
from qkdroute.exceptions import PreconditionError
from qkdroute.netmodel import generate_problem

ROUTERS = [
    QmcRouter(n_steps=20_000, random_state=1),
    TnsRouter(chi=8, random_state=1),
    ExhaustiveRouter(),
]


@pytest.mark.parametrize("router", ROUTERS, ids=lambda r: type(r).__name__)
def test_fit_predict_score(router, small_problem, small_ham):
    router = clone(router)
    state = router.fit(small_problem).predict()
    assert state.shape == (5,)
    assert router.best_energy_ == small_ham.total_energy(state)[0]
    assert router.score(small_problem) == -router.best_energy_
    np.testing.assert_array_equal(router.fit_predict(small_problem), state)


@pytest.mark.parametrize("router", ROUTERS, ids=lambda r: type(r).__name__)
def test_unfitted_and_mismatched(router, small_problem):
    router = clone(router)
    with pytest.raises(NotFittedError):
        router.predict()
    router.fit(small_problem)
    with pytest.raises(PreconditionError):
        router.predict(generate_problem(10, 3, 4, 3, seed=0))


def test_params_round_trip():
    r = TnsRouter(chi=5, noise=0.0)
    assert r.get_params()["chi"] == 5
    r.set_params(chi=7, deterministic=True)
    c = clone(r)
    assert c.get_params() == r.get_params()
    assert c is not r


def test_replicas_keep_lowest(small_problem):
    r = QmcRouter(n_steps=5_000, n_replicas=3, random_state=2).fit(small_problem)
    assert r.replica_energies_.shape == (3,)
    assert r.best_energy_ == r.replica_energies_.min()


def test_qmc_router_is_reproducible(small_problem):
    a = QmcRouter(n_steps=5_000, random_state=4).fit(small_problem)
    b = QmcRouter(n_steps=5_000, random_state=4).fit(small_problem)
    np.testing.assert_array_equal(a.history_, b.history_)


def test_rejects_non_problem():
    with pytest.raises(TypeError):
        ExhaustiveRouter().fit(np.zeros((3, 3)))
