import numpy as np
import pytest

from loccsim import _seesaw_py, kernels
from loccsim.catalog import quad_upb, tiles4_no_stopper, tiles5
from loccsim.upb import SeesawConfig, check_upb, complement_projector

from conftest import random_state

compiled_only = pytest.mark.skipif("compiled" not in kernels.available(), reason="extension not built")


def test_python_backend_always_available():
    assert "python" in kernels.available()
    assert kernels.backend() in kernels.available()


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")


@compiled_only
@pytest.mark.parametrize("cset", [tiles5, quad_upb, tiles4_no_stopper])
def test_backends_agree_per_restart(cset):
    from loccsim import _seesaw

    s = cset()
    d = s.layout.dims[0]
    q = complement_projector(s.kets()).matrix.reshape(d, d, d, d)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = random_state(rng, d), random_state(rng, d)
        ac, bc, tc = _seesaw.seesaw_restart(q, a, b, 500, 1e-14)
        ap, bp, tp = _seesaw_py.seesaw_restart(q, a, b, 500, 1e-14)
        m = min(len(tc), len(tp))
        # identical arithmetic up to rounding; stopping can differ by a step at noise level
        assert np.allclose(tc[:m], tp[:m], atol=1e-12)
        assert abs(tc[-1] - tp[-1]) < 1e-12
        assert abs(len(tc) - len(tp)) <= 8
        # eigenvectors agree up to phase
        assert abs(abs(np.vdot(ac, ap)) - 1) < 1e-6 or abs(tc[-1] - tp[-1]) < 1e-12


@compiled_only
def test_backends_agree_on_verdicts():
    start = kernels.backend()
    try:
        out = {}
        for name in ("compiled", "python"):
            kernels.use_backend(name)
            out[name] = [check_upb(c(), SeesawConfig(restarts=20)) for c in (tiles5, quad_upb, tiles4_no_stopper)]
        for vc, vp in zip(out["compiled"], out["python"]):
            assert vc.verdict == vp.verdict
            assert abs(vc.max_overlap - vp.max_overlap) < 1e-12
    finally:
        kernels.use_backend(start)


def test_kernel_inputs_not_mutated():
    s = tiles5()
    q = complement_projector(s.kets()).matrix.reshape(3, 3, 3, 3)
    q.setflags(write=False)
    a, b = random_state(np.random.default_rng(1), 3), random_state(np.random.default_rng(2), 3)
    a0, b0 = a.copy(), b.copy()
    for name in kernels.available():
        kernels.use_backend(name)
        kernels.seesaw_restart(q, a, b, 50, 1e-14)
        assert np.array_equal(a, a0) and np.array_equal(b, b0)
    kernels.use_backend("compiled" if "compiled" in kernels.available() else "python")


def test_trace_contract():
    q = np.zeros((2, 2, 2, 2), dtype=complex)
    q[1, 1, 1, 1] = 1
    a = np.array([1, 1]) / np.sqrt(2)
    for name in kernels.available():
        kernels.use_backend(name)
        _, _, t = kernels.seesaw_restart(q.astype(complex), a.astype(complex), a.astype(complex), 10, 1e-14)
        assert t[0] == pytest.approx(0.25)
        assert t[-1] == pytest.approx(1.0)
        assert len(t) % 2 == 1
    kernels.use_backend("compiled" if "compiled" in kernels.available() else "python")
