from cubeforms import verify as V


def test_check_shape():
    c = V.check_wedge_sign(3)
    assert set(c) == {"name", "passed", "detail"} and c["passed"]


def test_small_algebra_checks():
    assert V.check_homotopy(seed=1, samples=40)["passed"]
    assert V.check_degree_invariance(3, 2)["passed"]
    assert V.check_eps_identity(4)["passed"]
    assert V.check_inc_dec(2, 2)["passed"]
    assert V.check_inclusions(2, 2)["passed"]
    assert V.check_dk_injective(2, 2)["passed"]
    assert V.check_pullback_closure(seed=2, maps=20, nmax=2)["passed"]
    assert V.check_trace_identities(seed=3, samples=20)["passed"]


def test_degree_invariance_counts_checks():
    c = V.check_degree_invariance(2, 1)
    assert c["detail"]["checked"] > 0 and c["detail"]["failures"] == 0


def test_unisolvency_single():
    out = V.unisolvency_suite(2, 1, 2)
    names = [c["name"] for c in out]
    assert "unisolvency n=2 k=1 r=2" in names and all(c["passed"] for c in out)
    rep = out[0]["detail"]
    assert rep["moment_rank"] == rep["nodal_rank"] == 18 and rep["nodal_cond"] < 1e12


def test_conditions_suite_small():
    out = V.conditions_suite(2, 1, 1, levels=(2, 4))
    assert all(c["passed"] for c in out), [c for c in out if not c["passed"]]


def test_locality_suite_small():
    out = V.locality_suite(2, 2, 1, cells=3)
    assert [c["passed"] for c in out] == [True, True]


def test_summarize():
    assert V.summarize([{"passed": True}, {"passed": False}])["passed"] is False
