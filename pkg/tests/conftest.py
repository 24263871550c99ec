import numpy as np
import pytest

from perfdiscrim import benchgen

# filled by test_acceptance.py: criterion id -> (passed, detail)
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split(":")[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def r2_traces():
    return benchgen.generate(benchgen.preset("r2"))


@pytest.fixture(scope="session")
def two_line_traces():
    spec = benchgen.BenchSpec(
        n_functions=2,
        n_traces=200,
        cost_per_call=(1e-3, 2e-3),
        call_patterns=(benchgen.CallPattern((0,)), benchgen.CallPattern((0, 1))),
        seed=3,
    )
    return benchgen.generate(spec)
