import numpy as np
import pytest

from wellssl import FEATURES
from wellssl.ingest import CURVES, WellLogTable


def make_table(well_id="W", n=10, formation=None, geo=None, seed=0, **curves):
    rng = np.random.default_rng(seed)
    data = {}
    for name in CURVES:
        if name in curves:
            data[name] = np.asarray(curves[name], dtype=float)
        elif name in FEATURES:
            data[name] = rng.normal(size=n)
        else:
            data[name] = np.full(n, 8.5)
    n = len(next(iter(data.values())))
    return WellLogTable(
        well_id=well_id,
        depth=np.arange(n, dtype=float) * 0.5 + 100.0,
        curves=data,
        mask={k: ~np.isnan(v) for k, v in data.items()},
        formation=np.array(formation if formation is not None else ["F"] * n, dtype=object),
        geo_class=np.array(geo if geo is not None else [-1] * n, dtype=np.int64),
    )


@pytest.fixture
def table_factory():
    return make_table


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_log.LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
