"""Synthetic microbenchmark traces with planted linear performance classes.

Each trace runs one call pattern: a subset of functions, each looping
``iteration_slope * size`` times at a fixed cost per iteration.  Running time
is the summed loop cost plus Gaussian noise, so every pattern lies on a line
through the origin; patterns whose total slope coincides share a class.
Dummy functions get small random call counts unrelated to time.

Presets ``r2`` ... ``r7`` and ``r200`` ... ``r6400`` reproduce the structure
(function count, trace count, number of distinct lines) of the R_n#v suites.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .traces import TraceSet, VariableSchema

MS = 1e-3


@dataclass(frozen=True)
class CallPattern:
    functions: tuple[int, ...]
    iteration_slope: int = 1


@dataclass(frozen=True)
class BenchSpec:
    n_functions: int
    n_traces: int
    # seconds per loop iteration, one per real function
    cost_per_call: tuple[float, ...]
    call_patterns: tuple[CallPattern, ...]
    n_dummy: int = 0
    # None means 1% of the mean noiseless running time
    noise_sigma: float | None = None
    input_range: tuple[int, int] = (40, 120)
    dummy_max_count: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_functions < 1 or self.n_dummy < 0 or self.n_traces < 1:
            raise ValueError("need >= 1 function, >= 0 dummies and >= 1 trace")
        if len(self.cost_per_call) != self.n_functions:
            raise ValueError("cost_per_call needs one entry per function")
        if not self.call_patterns:
            raise ValueError("at least one call pattern is required")
        everything = set(range(self.n_functions))
        for pat in self.call_patterns:
            if not pat.functions or not set(pat.functions) <= everything:
                raise ValueError(f"pattern {pat} calls unknown or no functions")
            if pat.iteration_slope < 1:
                raise ValueError("iteration_slope must be >= 1")
        if not any(set(p.functions) == everything for p in self.call_patterns):
            raise ValueError("one pattern must call every function")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        lo, hi = self.input_range
        if not 0 < lo <= hi:
            raise ValueError("input_range must be positive and ordered")

    def pattern_slopes(self) -> np.ndarray:
        """Seconds per unit of input for each pattern."""
        cost = np.asarray(self.cost_per_call)
        return np.array(
            [p.iteration_slope * cost[list(p.functions)].sum() for p in self.call_patterns]
        )

    def pattern_classes(self) -> np.ndarray:
        """Class index of each pattern: rank of its distinct line slope."""
        slopes = np.round(self.pattern_slopes(), 12)
        distinct = np.unique(slopes)
        return np.searchsorted(distinct, slopes)

    @property
    def n_lines(self) -> int:
        return len(np.unique(np.round(self.pattern_slopes(), 12)))


def generate(spec: BenchSpec) -> TraceSet:
    """Draw ``spec.n_traces`` traces; patterns are used round-robin."""
    rng = np.random.default_rng(spec.seed)
    n, m_real, m_dummy = spec.n_traces, spec.n_functions, spec.n_dummy
    lo, hi = spec.input_range
    size = rng.integers(lo, hi + 1, size=n)
    which = np.arange(n) % len(spec.call_patterns)

    aux = np.zeros((n, m_real + m_dummy), order="F")
    for p, pat in enumerate(spec.call_patterns):
        rows = which == p
        for f in pat.functions:
            aux[rows, f] = pat.iteration_slope * size[rows]
    if m_dummy:
        aux[:, m_real:] = rng.integers(0, spec.dummy_max_count + 1, size=(n, m_dummy))

    cost = np.asarray(spec.cost_per_call, dtype=float)
    clean = aux[:, :m_real] @ cost
    sigma = 0.01 * float(clean.mean()) if spec.noise_sigma is None else spec.noise_sigma
    time = clean + rng.normal(0.0, sigma, size=n) if sigma > 0 else clean

    names = [f"f{k + 1}" for k in range(m_real)]
    names += [f"dummy{k + 1}" for k in range(m_dummy)]
    schema = VariableSchema(("size",), tuple(names), "time")
    return TraceSet(
        schema,
        size.astype(float).reshape(-1, 1),
        aux,
        time,
        truth=spec.pattern_classes()[which],
        meta={"noise_sigma": sigma, "n_lines": spec.n_lines, "patterns": which},
    )


def _singles(slopes: list[int], extra: tuple[CallPattern, ...] = ()) -> tuple[CallPattern, ...]:
    """One pattern per function with the given iteration slopes, extras, then all."""
    pats = tuple(CallPattern((f,), s) for f, s in enumerate(slopes)) + extra
    return pats + (CallPattern(tuple(range(len(slopes))), 1),)


@dataclass(frozen=True)
class _Preset:
    costs_ms: tuple[float, ...]
    patterns: tuple[CallPattern, ...]
    n_traces: int


_BASE = {
    # lines 1, 1.5, 2.5 (ms per unit size)
    "r2": _Preset((1.0, 1.5), _singles([1, 1]), 400),
    # lines 1, 2
    "r3-1": _Preset((0.5, 0.5, 1.0), _singles([2, 2, 1]), 800),
    # lines 1, 1.5, 2
    "r3-2": _Preset((0.5, 0.5, 1.0), _singles([3, 2, 1]), 800),
    # lines 1, 1.5, 2, 2.5
    "r4-2": _Preset((0.5, 0.5, 0.5, 1.0), _singles([2, 3, 4, 1]), 1200),
    # lines 1, 1.5, 2
    "r4-1": _Preset((0.5, 0.5, 0.5, 0.5), _singles([2, 2, 3, 3]), 1600),
    # lines 1, 1.5, 2; includes a two-function pattern
    "r4-3": _Preset(
        (0.25, 0.25, 0.5, 1.0), _singles([4, 6, 3, 1], (CallPattern((0, 1), 4),)), 1600
    ),
    # lines 1, 1.5, 2
    "r5": _Preset((0.25, 0.25, 0.5, 0.5, 0.5), _singles([4, 6, 2, 3, 2]), 3200),
    # lines 1, 1.5, 2, 2.5
    "r6": _Preset((0.25, 0.25, 0.5, 0.5, 0.5, 0.5), _singles([4, 6, 4, 2, 3, 4]), 6400),
    # lines 1, 1.5, 2, 2.5
    "r7": _Preset(
        (0.25, 0.25, 0.25, 0.5, 0.5, 0.25, 0.5), _singles([4, 6, 8, 2, 3, 4, 4]), 12800
    ),
}

# many-function variants: same real structure, padded with dummy functions
_DUMMY = {
    "r200": ("r2", 200, 400),
    "r400-1": ("r3-1", 400, 800),
    "r400-2": ("r3-2", 400, 800),
    "r600": ("r4-2", 600, 1200),
    "r800-1": ("r4-1", 800, 1600),
    "r800-2": ("r4-3", 800, 1600),
    "r1600": ("r5", 1600, 3200),
    "r3200": ("r6", 3200, 6400),
    "r6400": ("r6", 6400, 12800),
}

LINEAR_PRESETS = tuple(_BASE)
DUMMY_PRESETS = tuple(_DUMMY)
PRESETS = LINEAR_PRESETS + DUMMY_PRESETS


def preset(name: str, seed: int = 0, noiseless: bool = False, n_traces: int | None = None) -> BenchSpec:
    """Named benchmark spec; ``noiseless`` sets sigma to 0."""
    if name in _BASE:
        base, n_dummy, traces = _BASE[name], 0, _BASE[name].n_traces
    elif name in _DUMMY:
        parent, total, traces = _DUMMY[name]
        base = _BASE[parent]
        n_dummy = total - len(base.costs_ms)
    else:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return BenchSpec(
        n_functions=len(base.costs_ms),
        n_traces=n_traces or traces,
        cost_per_call=tuple(c * MS for c in base.costs_ms),
        call_patterns=base.patterns,
        n_dummy=n_dummy,
        noise_sigma=0.0 if noiseless else None,
        seed=seed,
    )
