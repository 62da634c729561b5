"""Backend selection for hot loops.

The compiled extension is used when it was built; otherwise the numpy
implementation runs. ``use_backend`` switches explicitly (tests, benchmarks).
"""

from . import _seesaw_py

try:
    from . import _seesaw as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _seesaw_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = "compiled" if _compiled is not None else "python"


def available() -> list[str]:
    return sorted(_BACKENDS)


def backend() -> str:
    return _active


def use_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available()}")
    _active = name


def seesaw_restart(q, a, b, max_iters, tol):
    return _BACKENDS[_active].seesaw_restart(q, a, b, max_iters, tol)
