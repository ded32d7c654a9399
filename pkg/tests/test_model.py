import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ucmanifold.ds import DSStructure, UncertainInputSpec
from ucmanifold.eaa import NoiseVector, QuadraticForm, qf_to_ds, sample_noise
from ucmanifold.errors import CaseParseError, InvalidInputError, PreconditionError
from ucmanifold.model import (
    Schedule, ScenarioConfig, UCProblem, UnitSpec, check_deterministic_constraints, constraint_violation,
    fuel_cost, power_balance_qf, read_scenario, read_units, schedule_cost, spinning_reserve,
    transition_cost, write_fitness_csv, write_schedule_csv, write_violations_csv,
)
from ucmanifold.cli import bundled

from conftest import lossless_pair, toy_problem, toy_units


def unit(**kw):
    base = dict(id="g", bus=0, lmin=10.0, umax=100.0, mut=1, mdt=1, ramp_up=100.0, ramp_down=100.0,
                a=0.0, b=1.0, c=0.0, su=100.0, sd=20.0, init_status=-24, init_output=0.0)
    base.update(kw)
    return UnitSpec(**base)


def flat(units, hours, outputs):
    p = np.tile(np.asarray(outputs, float), (hours, 1))
    return Schedule((p > 0).astype(np.int8), p)


class TestUnits:
    @pytest.mark.parametrize("kw", [dict(lmin=-1.0), dict(lmin=200.0), dict(mut=0), dict(mdt=0),
                                    dict(ramp_up=0.0), dict(a=-1.0), dict(init_status=0)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            unit(**kw)

    def test_schedule_zeroes_off_dispatch(self):
        s = Schedule([[0, 1]], [[5.0, 7.0]])
        assert s.p.tolist() == [[0.0, 7.0]]

    def test_schedule_rejects_non_binary(self):
        with pytest.raises(InvalidInputError):
            Schedule([[2]], [[0.0]])


class TestCosts:
    def test_transition(self):
        g = unit()
        assert transition_cost(g, 0, 1) == 100 and transition_cost(g, 1, 1) == 0
        assert transition_cost(g, 1, 0) == 20 and transition_cost(g, 0, 0) == 0

    def test_fuel(self):
        assert fuel_cost(unit(), 0, 0.0) == 0
        assert fuel_cost(unit(a=0.01, b=2.0, c=10.0), 1, 100.0) == pytest.approx(310.0)
        assert fuel_cost(unit(), 1, 10.0) == 10.0

    def test_fuel_precondition(self):
        with pytest.raises(PreconditionError):
            fuel_cost(unit(), 1, 5.0)

    @given(st.integers(0, 23))
    def test_startup_adds_exactly_su(self, start):
        units = [unit(lmin=0.0, b=0.0, su=123.0), unit(id="h", init_status=24, b=2.0)]
        u = np.zeros((24, 2), np.int8)
        u[:, 1] = 1
        p = np.zeros((24, 2))
        p[:, 1] = 50.0
        before = schedule_cost(Schedule(u, p), units)
        u[start:, 0] = 1
        assert schedule_cost(Schedule(u, p), units) - before == pytest.approx(123.0)

    def test_initial_status_counts(self):
        on = unit(init_status=5)
        s = Schedule(np.zeros((2, 1)), np.zeros((2, 1)))
        assert schedule_cost(s, [on]) == on.sd


class TestDeterministicChecks:
    def test_all_off_clean(self):
        units = toy_units()
        units[0] = unit(init_status=-24)
        assert check_deterministic_constraints(Schedule(np.zeros((24, 2)), np.zeros((24, 2))), units) == []

    def test_min_up_two_hours(self):
        g = unit(mut=3)
        u = np.zeros((24, 1))
        u[0] = 1
        v = check_deterministic_constraints(Schedule(u, u * 50), [g])
        assert [(x.constraint, x.magnitude, x.hour) for x in v] == [("min-up", 2.0, 1)]

    def test_min_down_from_initial_status(self):
        g = unit(mdt=4, init_status=-2)
        v = check_deterministic_constraints(Schedule(np.ones((3, 1)), np.full((3, 1), 50.0)), [g])
        assert [(x.constraint, x.magnitude) for x in v] == [("min-down", 2.0)]

    def test_ramp_magnitude(self):
        g = unit(ramp_up=20.0, ramp_down=20.0, init_status=24)
        p = np.array([[20.0], [60.0], [20.0]])
        v = check_deterministic_constraints(Schedule(np.ones((3, 1)), p), [g])
        assert [(x.constraint, x.magnitude) for x in v] == [("ramp", 20.0), ("ramp", 20.0)]

    def test_bounds(self):
        v = check_deterministic_constraints(Schedule([[1]], [[5.0]]), [unit(init_status=1)])
        assert v[0].constraint == "bounds" and v[0].magnitude == pytest.approx(5.0)

    def test_adequacy(self):
        v = check_deterministic_constraints(Schedule([[1]], [[50.0]]), [unit(init_status=1)], demand=[150.0])
        assert v[-1].constraint == "adequacy" and v[-1].magnitude == 50.0


class TestReserve:
    def test_examples(self):
        g = unit(umax=100.0, ramp_up=20.0)
        assert spinning_reserve(Schedule([[0]], [[0.0]]), 0, [g]) == 0
        assert spinning_reserve(Schedule([[1]], [[100.0]]), 0, [g]) == 0
        assert spinning_reserve(Schedule([[1]], [[70.0]]), 0, [g]) == 20


class TestConstraintViolation:
    def test_examples(self):
        assert constraint_violation(DSStructure.degenerate(0.0), 0.1, "two-sided", 0.9) == 0
        assert constraint_violation(DSStructure.interval(5.0, 6.0), 1.0, "<=", 1.0) == 1
        g = DSStructure(np.arange(10.0), np.arange(10.0) + 0.5, np.full(10, 0.1))
        assert constraint_violation(g, 6.5, "<=", 0.9) == pytest.approx(0.2)

    def test_sigma_range(self):
        with pytest.raises(InvalidInputError):
            constraint_violation(DSStructure.degenerate(0.0), 1.0, "<=", 1.5)

    @given(st.floats(-5, 5), st.floats(0.01, 3), st.floats(0, 1))
    def test_bounded_by_sigma(self, c, w, sigma):
        cv = constraint_violation(DSStructure.interval(c - w, c + w), 1.0, "two-sided", sigma)
        assert 0 <= cv <= sigma


class TestBalanceQF:
    def const(self, v, k=1):
        return QuadraticForm.constant(v, k)

    def test_balanced(self):
        q = power_balance_qf(None, 0, [self.const(50.0), self.const(-50.0)], self.const(0.0))
        assert q.is_constant() and q.central == 0

    def test_surplus(self):
        q = power_balance_qf(None, 0, [self.const(55.0), self.const(-50.0)], self.const(0.0))
        assert q.central == 5

    def test_interval_load(self):
        noise = NoiseVector.from_inputs({"d": DSStructure.interval(49.0, 51.0)})
        load = QuadraticForm(-50.0, [-1.0], [[0.0]])
        q = power_balance_qf(None, 0, [self.const(50.0), load], self.const(0.0))
        assert q.linear[0] == -1.0 and noise.radii[0] == 1.0

    def test_basis_mismatch(self):
        with pytest.raises(InvalidInputError):
            power_balance_qf(None, 0, [self.const(1.0, 2)], self.const(0.0, 1))


class TestEvaluate:
    def test_deterministic_balanced(self):
        prob = toy_problem(50.0)
        s = flat(prob.units, 24, [50.0, 0.0])
        sol = prob.evaluate(s)
        assert sol.fitness.is_degenerate and sol.fitness_central == pytest.approx(schedule_cost(s, prob.units))
        assert all(v.constraint == "reserve" for v in sol.violations)

    def test_penalty_and_scaling(self):
        prob = toy_problem(50.0)
        s = flat(prob.units, 24, [55.0, 0.0])
        cost = schedule_cost(s, prob.units)
        assert prob.evaluate(s).fitness_central == pytest.approx(cost + 0.1 * 24 * 25)
        sc = prob.scenario
        doubled = ScenarioConfig(sc.load_profile, sc.bus_shares, penalty_cost=0.2)
        pen2 = UCProblem(prob.case, prob.units, doubled).evaluate(s).fitness_central - cost
        assert pen2 == pytest.approx(2 * 0.1 * 24 * 25)

    def test_all_off_balance_cv(self, ieee30):
        sol = ieee30.evaluate(ieee30.empty_schedule())
        bal = [v.cv for v in sol.violations if v.constraint == "balance"]
        assert len(bal) == 24 and np.allclose(bal, 0.9)

    def test_balance_matches_direct_route(self):
        spec = UncertainInputSpec("d", "triangular-fuzzy", {"a": 49.9, "m": 50.0, "b": 50.1}, bus=1, sign=-1)
        prob = toy_problem(50.0, hours=3, inputs=(spec,))
        s = flat(prob.units, 3, [50.05, 0.0])
        sol = prob.evaluate(s)
        got = sum(v.cv for v in sol.violations if v.constraint == "balance")
        q = power_balance_qf(s, 0, prob.bus_qfs(s, 0), QuadraticForm.zero(prob.k))
        ref = constraint_violation(qf_to_ds(q, prob.noise), 0.1, "two-sided", 0.9)
        assert got == pytest.approx(3 * ref) and 0 < ref < 0.9

    def test_fitness_encloses_samples(self):
        spec = UncertainInputSpec("d", "interval", {"lo": 40.0, "hi": 60.0}, bus=1, sign=-1)
        prob = toy_problem(50.0, hours=4, inputs=(spec,))
        s = flat(prob.units, 4, [50.0, 0.0])
        sol = prob.evaluate(s)
        eps = sample_noise(prob.noise, 2000, np.random.default_rng(0))
        load = prob.noise.midpoints[0] + prob.noise.radii[0] * eps[:, 0]
        vals = schedule_cost(s, prob.units) + 0.1 * 4 * (50.0 - load) ** 2
        lo, hi = sol.fitness.support
        assert lo - 1e-9 <= vals.min() and vals.max() <= hi + 1e-9

    def test_ieee30_tcv_accounting(self, ieee30):
        rng = np.random.default_rng(3)
        for _ in range(5):
            u = rng.integers(0, 2, (24, ieee30.G))
            p = u * rng.uniform(ieee30.lmin, ieee30.umax, (24, ieee30.G))
            sol = ieee30.evaluate(Schedule(u, p))
            assert sol.tcv == pytest.approx(sum(v.cv for v in sol.violations), abs=1e-9)
            sigma = ieee30.scenario.sigma
            for v in sol.violations:
                assert 0 < v.cv <= sigma.get(v.constraint, 1.0) + 1e-12
            assert np.all(np.isfinite(sol.fitness.lo)) and np.all(sol.fitness.lo <= sol.fitness.hi)

    def test_line_violation_on_weak_line(self):
        prob = UCProblem(lossless_pair(capacity=30.0), toy_units(),
                         ScenarioConfig(np.full(2, 50.0), [0.0, 1.0]))
        sol = prob.evaluate(flat(prob.units, 2, [50.0, 0.0]))
        lines = [v for v in sol.violations if v.constraint == "line"]
        assert len(lines) == 2 and all(v.cv == 1.0 for v in lines)

    def test_shape_mismatch(self, ieee30):
        with pytest.raises(InvalidInputError):
            ieee30.evaluate(Schedule(np.zeros((2, 2)), np.zeros((2, 2))))


class TestFiles:
    def test_bundled_units(self, ieee30_units):
        assert [g.id for g in ieee30_units] == ["G1", "G2", "G3", "G4", "G5", "G6"]
        assert sum(g.umax for g in ieee30_units) == pytest.approx(435.0)

    def test_unit_parse_error_line(self, tmp_path, ieee30_case):
        f = tmp_path / "u.csv"
        f.write_text("id,bus,Lmin,Umax,MUT,MDT,UR,DR,a,b,c,SU,SD,init\n"
                     "G1,1,10,100,1,1,10,10,0,1,0,0,0,1\n"
                     "G2,1,10,x,1,1,10,10,0,1,0,0,0,1\n")
        with pytest.raises(CaseParseError, match="u.csv:3"):
            read_units(f, ieee30_case)

    def test_unit_missing_columns(self, tmp_path, ieee30_case):
        f = tmp_path / "u.csv"
        f.write_text("id,bus\nG1,1\n")
        with pytest.raises(CaseParseError, match="missing columns"):
            read_units(f, ieee30_case)

    def test_scenario_levels(self, ieee30_case):
        sc = read_scenario(bundled("ieee30_scenario.json"), ieee30_case, "30", "20")
        wind = next(i for i in sc.inputs if i.kind == "weibull-windfarm")
        load = next(i for i in sc.inputs if i.kind == "interval")
        assert wind.params["rated_power"] == 84.0 and load.params["lo"] == 8.96
        assert sc.bus_shares.sum() == pytest.approx(1.0)

    def test_scenario_unknown_level(self, ieee30_case):
        with pytest.raises(CaseParseError, match="level"):
            read_scenario(bundled("ieee30_scenario.json"), ieee30_case, "40", "15")

    def test_scenario_bad_json(self, tmp_path, ieee30_case):
        f = tmp_path / "s.json"
        f.write_text("{\n  nope\n}")
        with pytest.raises(CaseParseError, match="s.json:2"):
            read_scenario(f, ieee30_case)

    def test_exports(self, tmp_path):
        prob = toy_problem(50.0, hours=2)
        sol = prob.evaluate(flat(prob.units, 2, [50.0, 0.0]))
        write_schedule_csv(sol.schedule, prob.units, tmp_path / "s.csv")
        write_fitness_csv(sol.fitness, tmp_path / "f.csv")
        write_violations_csv(sol, tmp_path / "v.csv")
        rows = list(csv.DictReader(open(tmp_path / "s.csv")))
        assert len(rows) == 4 and rows[0] == {"hour": "1", "unit": "cheap", "on": "1", "mw": "50.0"}
        fit = list(csv.DictReader(open(tmp_path / "f.csv")))
        assert sum(float(r["mass"]) for r in fit) == pytest.approx(1.0)
        viol = list(csv.DictReader(open(tmp_path / "v.csv")))
        assert len(viol) == len(sol.violations)
