import csv
import io
import math
import os
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

from splurge_cnoma_capacity.channel import DEFAULT_CONTROL, reference_links
from splurge_cnoma_capacity.closed_form import exact_scheme_capacities
from splurge_cnoma_capacity.exceptions import InfeasibleAllocationError
from splurge_cnoma_capacity.experiments import (
    CSV_COLUMNS,
    Method,
    RowStatus,
    SweepConstraint,
    SweepSpec,
    SweepVariable,
    allocation_for_pn2,
    antenna_study,
    figure_spec,
    find_optimal_pn2,
    summarize,
    sweep,
    write_csv,
)
from splurge_cnoma_capacity.mc_sim import BaselineSplit, OperatingPoint, PowerAllocation, Scheme, ergodic_capacities
from splurge_cnoma_capacity.oam import build_oam_channel


def reference_point(rho_db: float = 15.0) -> OperatingPoint:
    return OperatingPoint(
        rho_db=rho_db,
        links=reference_links(),
        oam=build_oam_channel(1, 4),
        power=PowerAllocation(p_n1=0.2, p_n2=0.2, p_f=0.6),
    )


class TestSweepSpec(unittest.TestCase):
    """Test cases for SweepSpec validation."""

    def test_grid_must_be_nonempty(self) -> None:
        """Test an empty grid is rejected."""
        with self.assertRaises(ValueError):
            SweepSpec(variable=SweepVariable.RHO_DB, grid=(), fixed=reference_point())

    def test_grid_must_increase(self) -> None:
        """Test a non-increasing grid is rejected."""
        with self.assertRaises(ValueError):
            SweepSpec(variable=SweepVariable.RHO_DB, grid=(5.0, 5.0), fixed=reference_point())
        with self.assertRaises(ValueError):
            SweepSpec(variable=SweepVariable.RHO_DB, grid=(10.0, 5.0), fixed=reference_point())

    def test_power_grid_range(self) -> None:
        """Test p_n2 values outside [0, P] are rejected."""
        with self.assertRaises(ValueError):
            SweepSpec(variable=SweepVariable.P_N2, grid=(0.1, 1.5), fixed=reference_point())


class TestAllocationForPn2(unittest.TestCase):
    """Test cases for the sweep constraints."""

    def test_conserved_sum(self) -> None:
        """Test p_N1 = P - p_F - p_N2."""
        power = allocation_for_pn2(0.1, p_n1=0.2, p_f=0.6, total=1.0, constraint=SweepConstraint.CONSERVED_SUM)
        self.assertAlmostEqual(power.p_n1, 0.3, places=15)
        self.assertEqual(power.p_f, 0.6)

    def test_conserved_sum_exhausted(self) -> None:
        """Test p_N2 = P - p_F leaves no power for x1."""
        with self.assertRaises(InfeasibleAllocationError):
            allocation_for_pn2(0.4, p_n1=0.2, p_f=0.6, total=1.0, constraint=SweepConstraint.CONSERVED_SUM)

    def test_fixed_near_power(self) -> None:
        """Test p_N1 is held and p_F takes the remainder, never below the template."""
        power = allocation_for_pn2(0.1, p_n1=0.2, p_f=0.6, total=1.0, constraint=SweepConstraint.FIXED_PN1)
        self.assertEqual(power.p_n1, 0.2)
        self.assertAlmostEqual(power.p_f, 0.7, places=15)
        with self.assertRaises(InfeasibleAllocationError):
            allocation_for_pn2(0.25, p_n1=0.2, p_f=0.6, total=1.0, constraint=SweepConstraint.FIXED_PN1)


class TestSweep(unittest.TestCase):
    """Test cases for sweep."""

    def test_single_point_matches_direct_calls(self) -> None:
        """Test a one-value grid reproduces ergodic_capacities and exact_scheme_capacities."""
        point = reference_point()
        spec = SweepSpec(
            variable=SweepVariable.RHO_DB,
            grid=(15.0,),
            fixed=point,
            schemes=(Scheme.CNOMA_OAM,),
            methods=(Method.MONTE_CARLO, Method.CLOSED_FORM),
            trials=3_000,
            seed=11,
        )
        table = sweep(spec)
        self.assertEqual(len(table), 2)
        monte_carlo, closed_form = table.rows
        direct = ergodic_capacities(Scheme.CNOMA_OAM, point, 3_000, 11)
        exact = exact_scheme_capacities(point, DEFAULT_CONTROL)
        self.assertEqual(monte_carlo.c_sum, direct.c_sum)
        self.assertEqual(monte_carlo.std_err, direct.std_error.sum)
        self.assertEqual(closed_form.c_sum, exact.c_sum)
        self.assertEqual(closed_form.effective_order, exact.effective_order)

    def test_row_order_and_markers(self) -> None:
        """Test grid-major ordering and the unsupported marker for OMA-OAM by closed form."""
        spec = SweepSpec(
            variable=SweepVariable.RHO_DB,
            grid=(10.0, 20.0),
            fixed=reference_point(),
            methods=(Method.CLOSED_FORM,),
            trials=100,
        )
        table = sweep(spec)
        self.assertEqual([row.variable for row in table], [10.0, 10.0, 10.0, 20.0, 20.0, 20.0])
        self.assertEqual([row.scheme for row in table][:3], [Scheme.CNOMA_OAM, Scheme.CNOMA, Scheme.OMA_OAM])
        oma = table.select(Scheme.OMA_OAM, Method.CLOSED_FORM)
        self.assertTrue(all(row.status is RowStatus.UNSUPPORTED for row in oma))
        self.assertTrue(all(math.isnan(row.c_sum) for row in oma))

    def test_infeasible_rows_are_marked(self) -> None:
        """Test infeasible p_n2 values produce explicit rows instead of disappearing."""
        spec = SweepSpec(
            variable=SweepVariable.P_N2,
            grid=(0.1, 0.2, 0.4),
            fixed=reference_point(),
            schemes=(Scheme.CNOMA_OAM,),
            methods=(Method.CLOSED_FORM,),
        )
        table = sweep(spec)
        self.assertEqual([row.status for row in table], [RowStatus.OK, RowStatus.OK, RowStatus.INFEASIBLE])
        self.assertIn("p_n1", table.rows[-1].detail)

    def test_thread_count_does_not_change_table(self) -> None:
        """Test concurrent grid evaluation keeps rows and values identical."""
        base = dict(
            variable=SweepVariable.RHO_DB,
            grid=(0.0, 10.0, 20.0),
            fixed=reference_point(),
            schemes=(Scheme.CNOMA_OAM, Scheme.OMA_OAM),
            methods=(Method.MONTE_CARLO,),
            trials=2_000,
            seed=4,
        )
        serial = sweep(SweepSpec(threads=1, **base))
        parallel = sweep(SweepSpec(threads=3, **base))
        self.assertEqual(serial.to_csv_text(), parallel.to_csv_text())

    def test_fixed_constraint_sweep(self) -> None:
        """Test the fixed-p_N1 reading marks p_n2 > 0.2 infeasible at p_F = 0.6."""
        spec = figure_spec(3, methods=["closed_form"], sweep_constraint="fixed_pn1")
        table = sweep(spec)
        statuses = {row.variable: row.status for row in table}
        self.assertIs(statuses[0.2], RowStatus.OK)
        self.assertIs(statuses[0.25], RowStatus.INFEASIBLE)
        sums = table.column("c_sum", Scheme.CNOMA_OAM, Method.CLOSED_FORM)
        ok = [value for value in sums if not math.isnan(value)]
        self.assertTrue(all(later > earlier for earlier, later in zip(ok, ok[1:])))


class TestResultTableCsv(unittest.TestCase):
    """Test cases for CSV output."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.spec = SweepSpec(
            variable=SweepVariable.RHO_DB,
            grid=(15.0,),
            fixed=reference_point(),
            trials=1_000,
            seed=2,
        )
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self) -> None:
        """Clean up test fixtures."""
        for name in os.listdir(self.temp_dir):
            os.remove(os.path.join(self.temp_dir, name))
        os.rmdir(self.temp_dir)

    def test_header_and_format(self) -> None:
        """Test the column order and full-precision scientific notation."""
        text = sweep(self.spec).to_csv_text()
        rows = list(csv.reader(io.StringIO(text)))
        self.assertEqual(tuple(rows[0]), CSV_COLUMNS)
        self.assertEqual(rows[0][:8], [
            "variable", "scheme", "method", "c_ccu", "c_ceu", "c_sum", "std_err", "effective_order"
        ])
        self.assertEqual(len(rows), 1 + 3 * 2)
        self.assertEqual(rows[1][0], "1.50000000000000000e+01")
        self.assertTrue(all(len(row) == len(CSV_COLUMNS) for row in rows))
        self.assertEqual(float(rows[1][5]), float(rows[1][3]) + float(rows[1][4]))

    def test_byte_identical_reruns(self) -> None:
        """Test the same spec writes the same bytes."""
        first = write_csv(sweep(self.spec), Path(self.temp_dir) / "first.csv")
        second = write_csv(sweep(self.spec), Path(self.temp_dir) / "second.csv")
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_summary_lines(self) -> None:
        """Test one summary line per row."""
        table = sweep(self.spec)
        lines = list(summarize(table))
        self.assertEqual(len(lines), len(table))
        self.assertTrue(any("unsupported" in line for line in lines))


class TestFindOptimalPn2(unittest.TestCase):
    """Test cases for find_optimal_pn2."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.point = reference_point()

    def test_fixed_near_power_optimum(self) -> None:
        """Test the fixed-p_N1 reading puts the optimum at 0.2 on the 0.05 grid."""
        result = find_optimal_pn2(15.0, 0.6, 0.05, self.point, constraint=SweepConstraint.FIXED_PN1)
        self.assertAlmostEqual(result.p_n2, 0.2, places=12)
        self.assertFalse(result.degenerate)
        self.assertEqual(result.ties, ())

    def test_refinement_keeps_optimum(self) -> None:
        """Test refining the grid to 0.01 moves the optimum by less than one coarse step."""
        coarse = find_optimal_pn2(15.0, 0.6, 0.05, self.point, constraint=SweepConstraint.FIXED_PN1)
        fine = find_optimal_pn2(15.0, 0.6, 0.01, self.point, constraint=SweepConstraint.FIXED_PN1)
        self.assertLess(abs(fine.p_n2 - coarse.p_n2), 0.05)

    def test_conserved_sum_optimum_sits_on_the_boundary(self) -> None:
        """Test the conserved-sum sum capacity rises over the whole grid, so the optimum is p_N2 = 0.35."""
        result = find_optimal_pn2(15.0, 0.6, 0.05, self.point)
        self.assertEqual(result.grid, (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35))
        values = result.c_sum_values
        self.assertTrue(all(later > earlier for earlier, later in zip(values, values[1:])), values)
        self.assertAlmostEqual(result.p_n2, 0.35, places=12)
        self.assertEqual(result.ties, ())
        self.assertFalse(result.degenerate)

        for p_n2, c_sum in zip(result.grid, values):
            allocation = allocation_for_pn2(
                p_n2, p_n1=0.2, p_f=0.6, total=1.0, constraint=SweepConstraint.CONSERVED_SUM
            )
            self.assertAlmostEqual(allocation.p_n1, 0.4 - p_n2, places=12)
            expected = exact_scheme_capacities(replace(self.point, power=allocation), DEFAULT_CONTROL).c_sum
            self.assertAlmostEqual(c_sum, expected, places=12)

        fixed = find_optimal_pn2(15.0, 0.6, 0.05, self.point, constraint=SweepConstraint.FIXED_PN1)
        self.assertNotAlmostEqual(fixed.p_n2, result.p_n2, places=6)

    def test_degenerate_range_warns(self) -> None:
        """Test a feasible range narrower than the step falls back to its midpoint."""
        with self.assertLogs("splurge_cnoma_capacity.experiments", level="WARNING"):
            result = find_optimal_pn2(15.0, 0.97, 0.05, self.point)
        self.assertTrue(result.degenerate)
        self.assertAlmostEqual(result.p_n2, 0.015, places=12)

    def test_empty_feasible_grid(self) -> None:
        """Test p_F <= P/2 leaves no feasible allocation."""
        with self.assertRaises(InfeasibleAllocationError):
            find_optimal_pn2(15.0, 0.4, 0.05, self.point)

    def test_argument_validation(self) -> None:
        """Test invalid step and p_F values."""
        with self.assertRaises(ValueError):
            find_optimal_pn2(15.0, 0.6, 0.0, self.point)
        with self.assertRaises(ValueError):
            find_optimal_pn2(15.0, 1.0, 0.05, self.point)


class TestFigureSpecs(unittest.TestCase):
    """Test cases for figure presets and the antenna study."""

    def test_figure_three(self) -> None:
        """Test the OAM power sweep preset."""
        spec = figure_spec(3)
        self.assertIs(spec.variable, SweepVariable.P_N2)
        self.assertEqual(spec.grid, (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35))
        self.assertEqual(spec.fixed.rho_db, 15.0)
        self.assertEqual(spec.fixed.power.p_f, 0.6)
        self.assertEqual(spec.schemes, (Scheme.CNOMA_OAM,))
        self.assertIs(spec.constraint, SweepConstraint.CONSERVED_SUM)

    def test_snr_figures(self) -> None:
        """Test figures 4 to 6 sweep 0 to 30 dB for all schemes with the matched split."""
        for figure in (4, 5, 6):
            spec = figure_spec(figure, trials=500)
            self.assertIs(spec.variable, SweepVariable.RHO_DB)
            self.assertEqual(spec.grid[0], 0.0)
            self.assertEqual(spec.grid[-1], 30.0)
            self.assertEqual(len(spec.grid), 13)
            self.assertEqual(set(spec.schemes), set(Scheme))
            self.assertIs(spec.split, BaselineSplit.MATCHED)
            self.assertEqual(spec.trials, 500)
            self.assertAlmostEqual(spec.fixed.oam.principal_singular_value, 0.5, places=15)

    def test_unknown_figure(self) -> None:
        """Test an unknown figure number is rejected."""
        with self.assertRaises(ValueError):
            figure_spec(7)

    def test_antenna_study(self) -> None:
        """Test μ1 = 1/√M per row and that fewer antennas favour the OAM term."""
        rows = antenna_study(reference_point(30.0), trials=2_000)
        self.assertEqual([row.antennas for row in rows], [1, 2, 4, 8])
        for row in rows:
            self.assertAlmostEqual(row.mu1, 1.0 / math.sqrt(row.antennas), places=14)
        sums = [row.cnoma_oam.c_sum for row in rows]
        self.assertTrue(all(later < earlier for earlier, later in zip(sums, sums[1:])))
        self.assertTrue(all(row.beats_oma_in_sum for row in rows))


if __name__ == '__main__':
    unittest.main()
