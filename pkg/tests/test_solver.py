import numpy as np
import pytest

from prefelicit.solver import (
    LinearModel,
    SolverUsageError,
    Status,
    check_assignment,
    extract,
    solve,
    warm_start,
)


def _min_x_at_least_one():
    m = LinearModel(sense="min")
    x = m.add_var("x", 0.0, 10.0, obj=1.0)
    m.add_constr([(x, 1.0)], ">=", 1.0)
    return m, x


class TestSolveBasics:
    def test_minimize_simple(self):
        m, x = _min_x_at_least_one()
        out = solve(m)
        assert out.status is Status.OPTIMAL
        assert out.objective == pytest.approx(1.0)
        assert extract(out, x) == pytest.approx(1.0)

    def test_infeasible(self):
        m = LinearModel(sense="min")
        x = m.add_var("x", obj=1.0)
        m.add_constr([(x, 1.0)], ">=", 1.0)
        m.add_constr([(x, 1.0)], "<=", 0.0)
        assert solve(m).status is Status.INFEASIBLE

    def test_unbounded(self):
        m = LinearModel(sense="max")
        x = m.add_var("x", 0.0, obj=1.0)
        assert solve(m).status is Status.UNBOUNDED

    def test_milp_solves(self):
        m = LinearModel(sense="max")
        xs = [m.add_binary(f"b{i}", obj=w) for i, w in enumerate([5, 4, 3])]
        m.add_constr([(xs[0], 2.0), (xs[1], 2.0), (xs[2], 2.0)], "<=", 4.0)
        out = solve(m)
        assert out.status is Status.OPTIMAL
        assert out.objective == pytest.approx(9.0)
        assert extract(out, xs) == [1, 1, 0]

    def test_resolve_is_idempotent(self):
        m, _ = _min_x_at_least_one()
        first = solve(m)
        second = solve(m)
        assert first.status is second.status
        assert first.objective == pytest.approx(second.objective, abs=1e-9)


class TestExtract:
    def test_binary_rounding(self):
        m = LinearModel(sense="max")
        z = m.add_binary("z", obj=1.0)
        out = solve(m)
        out.values = np.array([0.9999997])   # nearly integral backend output
        assert extract(out, z) == 1

    def test_fractional_binary_rejected(self):
        m = LinearModel(sense="max")
        z = m.add_binary("z", obj=1.0)
        out = solve(m)
        out.values = np.array([0.4])
        with pytest.raises(SolverUsageError, match="fractional"):
            extract(out, z)

    def test_values_on_infeasible_is_usage_error(self):
        m = LinearModel(sense="min")
        x = m.add_var("x", obj=1.0)
        m.add_constr([(x, 1.0)], ">=", 1.0)
        m.add_constr([(x, 1.0)], "<=", 0.0)
        out = solve(m)
        with pytest.raises(SolverUsageError):
            extract(out, x)


def _small_mip():
    m = LinearModel(sense="max")
    b1 = m.add_binary("b1", obj=2.0)
    b2 = m.add_binary("b2", obj=3.0)
    x = m.add_var("x", 0.0, 1.0, obj=1.0)
    m.add_constr([(b1, 1.0), (b2, 1.0), (x, 1.0)], "<=", 2.0)
    return m, (b1, b2, x)


class TestWarmStart:
    def test_empty_hint_is_identity(self):
        m, _ = _small_mip()
        base = solve(m).objective
        warm_start(m, {})
        assert solve(m).objective == pytest.approx(base)

    def test_feasible_hint_same_value(self):
        m, (b1, b2, _) = _small_mip()
        base = solve(m).objective
        warm_start(m, {b1: 1, b2: 1})
        assert solve(m).objective == pytest.approx(base)

    def test_infeasible_hint_is_advisory(self):
        m, (b1, b2, _) = _small_mip()
        m.add_constr([(b1, 1.0), (b2, 1.0)], "<=", 1.0)
        base = solve(m).objective
        warm_start(m, {b1: 1, b2: 1})   # violates the new row
        out = solve(m)
        assert out.status is Status.OPTIMAL
        assert out.objective == pytest.approx(base)

    def test_non_binary_hint_rejected(self):
        m, (_, _, x) = _small_mip()
        with pytest.raises(SolverUsageError, match="non-binary"):
            warm_start(m, {x: 1})

    def test_check_assignment(self):
        m, (b1, b2, _) = _small_mip()
        ok, obj = check_assignment(m, {b1: 1, b2: 0})
        assert ok and obj == pytest.approx(2.0 + 1.0)
        m.add_constr([(b1, 1.0)], "<=", 0.0)
        ok, obj = check_assignment(m, {b1: 1, b2: 0})
        assert not ok and obj is None


class TestModelDump:
    def test_lp_format_roundtrips_the_structure(self, tmp_path):
        m, x = _min_x_at_least_one()
        b = m.add_binary("pick", obj=2.0)
        m.add_constr([(x, 1.0), (b, -3.0)], "<=", 4.0, name="cap")
        path = tmp_path / "model.lp"
        m.write_lp(str(path))
        text = path.read_text()
        assert text.startswith("\\")
        assert "Minimize" in text
        assert "cap:" in text
        assert "Binaries" in text and "pick" in text
        assert text.rstrip().endswith("End")


class TestStrongDuality:
    def test_random_bounded_lps(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            n = int(rng.integers(2, 5))
            mrows = int(rng.integers(2, 6))
            m = LinearModel(sense="min")
            zs = [m.add_var(f"z{j}", obj=float(rng.normal())) for j in range(n)]
            z0 = rng.normal(size=n)
            for _ in range(mrows):
                a = rng.normal(size=n)
                slack = float(rng.uniform(0.0, 2.0))
                m.add_constr([(zs[j], float(a[j])) for j in range(n)],
                             ">=", float(a @ z0 - slack))
            for j in range(n):      # box as explicit rows keeps duals on rows
                m.add_constr([(zs[j], 1.0)], ">=", -50.0)
                m.add_constr([(zs[j], 1.0)], "<=", 50.0)
            out = solve(m)
            assert out.status is Status.OPTIMAL
            rhs = np.array([c.rhs for c in m._constraints])
            dual_obj = float(out.marginals @ rhs)
            assert dual_obj == pytest.approx(out.objective, abs=1e-6)
