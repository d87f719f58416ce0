import numpy as np
import pytest

from netrobust.economic import (
    IOTable,
    assess_network,
    deficit_recursion,
    driven_recursion,
    load_io_csv,
    normalize_returns,
    regular_table,
    single_table_verdict,
    star_table,
    surrogate_table,
    write_io_csv,
)
from netrobust.errors import BadConfig, HorizonTooShort, NegativeEntry, ParseError, ZeroRow
from netrobust.matrix_core import NetworkMatrix, resolvent_column_sums


def _table(a, mu=0.5):
    a = np.asarray(a, dtype=float)
    return IOTable(NetworkMatrix.from_array(a), mu, tuple(f"s{i}" for i in range(len(a))))


def test_table_validation():
    with pytest.raises(BadConfig):
        _table(np.eye(2), mu=1.0)
    with pytest.raises(NegativeEntry) as ei:
        _table([[0.5, -0.1], [0.0, 1.0]])
    assert ei.value.index == (0, 1)


def test_normalize_returns():
    t = normalize_returns(_table([[1.0, 3.0], [2.0, 2.0]]))
    assert np.allclose(t.A.entries, [[0.25, 0.75], [0.5, 0.5]])
    with pytest.raises(ZeroRow) as ei:
        normalize_returns(_table([[1.0, 1.0], [0.0, 0.0]]))
    assert ei.value.label == "s1"


def test_csv_roundtrip(tmp_path):
    t = surrogate_table(n=12, n_hubs=2, seed=3)
    p = tmp_path / "t.csv"
    write_io_csv(p, t)
    back = load_io_csv(p)
    assert back.mu == t.mu and back.sector_labels == t.sector_labels
    assert np.array_equal(back.A.entries, t.A.entries)


@pytest.mark.parametrize("text,line", [
    ("0.5,0.5\n0.5,0.5\n", None),
    ("mu=0.5\n0.5,0.5\n0.5\n", 3),
    ("mu=0.5\n0.5,x\n0.5,0.5\n", 2),
    ("mu=abc\n", 1),
    ("mu=0.5\nn=3\n0.5,0.5\n0.5,0.5\n", None),
])
def test_csv_parse_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as ei:
        load_io_csv(p)
    assert ei.value.line == line


def test_trajectory_matches_resolvent():
    t = surrogate_table(n=50, n_hubs=4, seed=1)
    shock = np.random.default_rng(0).standard_normal(50)
    traj = deficit_recursion(t, shock)
    closed = float(resolvent_column_sums(t.network) @ shock)
    assert traj.x_inf == pytest.approx(closed, rel=1e-10)
    assert traj.aggregate_partial_sums[-1] == traj.x_inf


def test_eta_cancels():
    t = star_table(10, 0.4)
    shock = np.linspace(-1, 1, 10)
    a = deficit_recursion(t, shock)
    b = driven_recursion(t, shock, eta=np.arange(10.0))
    assert b.x_inf == pytest.approx(a.x_inf, rel=1e-10)


def test_horizon_too_short():
    with pytest.raises(HorizonTooShort):
        deficit_recursion(regular_table(5, 0.9), np.ones(5), horizon=3)


def test_surrogate_is_row_stochastic():
    t = surrogate_table(n=40, n_hubs=3, seed=4)
    assert np.max(t.row_sum_defect) < 1e-12
    assert np.all(t.A.entries >= 0)


def test_single_table_verdict():
    assert single_table_verdict(1.5, 100) == "no-tail-risk"
    assert single_table_verdict(5.0, 100) == "tail-risk"
    assert single_table_verdict(3.0, 100) == "inconclusive"


def test_assess_requires_normalized():
    with pytest.raises(BadConfig):
        assess_network(_table([[0.2, 0.2], [0.1, 0.1]]))


def test_assess_star_and_regular():
    s = assess_network(star_table(100, 0.51), samples=20_000, seed=1)
    r = assess_network(regular_table(100, 0.51), samples=20_000, seed=1, mean_shift=-0.1)
    assert s.verdict == "tail-risk"
    assert r.verdict == "no-tail-risk"
    assert r.mean_shift == -0.1
    assert len(s.histogram) == 80


def test_surrogate_radius_and_diagnostic():
    from netrobust.matrix_core import perron_vector
    from netrobust.tailrisk import macro_diagnostic

    t = surrogate_table()
    assert np.max(t.row_sum_defect) < 1e-12
    assert perron_vector(t.network).lambda_pf == pytest.approx(t.mu, abs=1e-8)
    assert macro_diagnostic(t.network) > macro_diagnostic(regular_table(t.n, t.mu).network)
