import numpy as np
import pytest

from jtenergy.coupling import fixed_point_load, is_feasible
from jtenergy.model import Association, NetworkInstance, initial_association


def random_instance(rng, n, m, demand_scale=0.3, noise=1.0):
    """Small instance in normalized units: ``M = B = 1``, unit power caps.

    Gains are log-uniform over three decades, and each UE is nudged toward
    one random cell so every cell tends to have a strongest UE of its own.
    """
    gain = 10.0 ** rng.uniform(-1.0, 2.0, size=(n, m))
    home = rng.integers(0, n, size=m)
    gain[home, np.arange(m)] *= 10.0
    demand = rng.uniform(0.2, 1.0, size=m) * demand_scale
    return NetworkInstance(gain=gain, noise_power=noise, ru_bandwidth=1.0, ru_count=1,
                           demand_min=demand, power_max=np.ones(n))


def random_feasible(rng, n_range=(2, 6), m_range=(2, 12), tries=200, demand_scale=0.3,
                    noise=1.0):
    """Draw until the best-signal association at random powers has a feasible fixed point.

    ``noise=1e-9`` with ``demand_scale=1`` gives interference-limited
    networks, where joint transmission links often pass the link test.

    Returns ``(inst, assoc, p, x)``.
    """
    for _ in range(tries):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        m = int(rng.integers(max(m_range[0], n), m_range[1] + 1))
        inst = random_instance(rng, n, m, demand_scale, noise)
        assoc = initial_association(inst)
        p = rng.uniform(0.3, 1.0, size=n)
        rep = fixed_point_load(inst, assoc, p)
        if rep.converged and is_feasible(rep.load):
            return inst, assoc, p, np.array(rep.load)
    raise RuntimeError("no feasible instance drawn")


def one_cell(gain=2.0, noise=0.5, demand=1.0, pmax=10.0, M=1, B=1.0):
    inst = NetworkInstance(gain=[[gain]], noise_power=noise, ru_bandwidth=B, ru_count=M,
                           demand_min=[demand], power_max=[pmax])
    return inst, Association(np.ones((1, 1), dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


#: ``(criterion, passed, detail)`` lines collected by the acceptance suite
VERDICTS = []


@pytest.fixture
def verdict(capsys):
    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
