import shutil
import tempfile
import unittest
from pathlib import Path

import pytest

from splurge_cnoma_capacity.experiments import (
    CSV_COLUMNS,
    Method,
    ResultRow,
    ResultTable,
    RowStatus,
    SweepVariable,
    write_csv,
)
from splurge_cnoma_capacity.mc_sim import Scheme, SchemeCapacities
from splurge_cnoma_capacity.results_store import ResultStore, ResultStoreFactory


def sample_table() -> ResultTable:
    rows = []
    for rho_db, offset in ((10.0, 0.0), (20.0, 1.0)):
        rows.append(ResultRow.from_capacities(
            rho_db, Scheme.CNOMA_OAM, Method.CLOSED_FORM,
            SchemeCapacities(c_ccu=1.5 + offset, c_ceu=2.25 + offset, c_sum=3.75 + 2.0 * offset, effective_order=17),
        ))
        rows.append(ResultRow.marker(
            rho_db, Scheme.OMA_OAM, Method.CLOSED_FORM, RowStatus.UNSUPPORTED, "no closed form",
        ))
    return ResultTable(variable=SweepVariable.RHO_DB, rows=rows)


class TestResultStoreFactory(unittest.TestCase):
    """Test archiving result tables into SQLite."""

    def setUp(self) -> None:
        """Set up test fixtures."""
        self.temp_dir = tempfile.mkdtemp()
        self.store_path = Path(self.temp_dir) / "store"

    def tearDown(self) -> None:
        """Clean up test fixtures."""
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_from_table(self) -> None:
        """Test rows come back in order with NaN stored as NULL."""
        store = ResultStoreFactory.from_table(sample_table(), store_path=self.store_path, name="snr")

        self.assertEqual(store.db_table, "snr")
        self.assertTrue((self.store_path / "snr.sqlite").exists())
        self.assertEqual(store.column_names, list(CSV_COLUMNS))

        rows = store.fetch_rows()
        self.assertEqual(len(rows), 4)
        self.assertEqual(rows[0]["scheme"], "cnoma_oam")
        self.assertEqual(rows[0]["c_sum"], 3.75)
        self.assertEqual(rows[0]["effective_order"], 17)
        self.assertEqual(rows[0]["status"], "ok")
        self.assertIsNone(rows[1]["c_ccu"])
        self.assertEqual(rows[1]["status"], "unsupported")
        self.assertEqual([row["variable"] for row in rows], [10.0, 10.0, 20.0, 20.0])

    def test_fetch_filters(self) -> None:
        """Test scheme and method filters, including CLI spellings."""
        store = ResultStoreFactory.from_table(sample_table(), store_path=self.store_path, name="snr")

        cnoma_oam = store.fetch_rows(scheme="cnoma-oam")
        self.assertEqual([row["c_ccu"] for row in cnoma_oam], [1.5, 2.5])
        self.assertEqual(len(store.fetch_rows(method=Method.CLOSED_FORM)), 4)
        self.assertEqual(store.fetch_rows(method="monte_carlo"), [])

    def test_rewrite_replaces_table(self) -> None:
        """Test archiving under the same name replaces the earlier rows."""
        ResultStoreFactory.from_table(sample_table(), store_path=self.store_path, name="snr")
        store = ResultStoreFactory.from_table(sample_table(), store_path=self.store_path, name="snr")
        self.assertEqual(len(store.fetch_rows()), 4)

    def test_from_csv(self) -> None:
        """Test a CSV written by write_csv archives to the same rows as the table."""
        csv_path = Path(self.temp_dir) / "figure4.csv"
        write_csv(sample_table(), csv_path)

        from_csv = ResultStoreFactory.from_csv(csv_path, store_path=self.store_path)
        from_table = ResultStoreFactory.from_table(sample_table(), store_path=self.store_path, name="direct")

        self.assertEqual(from_csv.db_table, "figure4")
        self.assertEqual(from_csv.fetch_rows(), from_table.fetch_rows())

    def test_from_csv_header_mismatch(self) -> None:
        """Test a CSV with foreign columns is rejected."""
        csv_path = Path(self.temp_dir) / "other.csv"
        csv_path.write_text("name,age\nAlice,30\n", encoding="utf-8")

        with pytest.raises(RuntimeError, match="Column mismatch"):
            ResultStoreFactory.from_csv(csv_path, store_path=self.store_path)

    def test_from_csv_missing_file(self) -> None:
        """Test a missing CSV raises RuntimeError."""
        with pytest.raises(RuntimeError):
            ResultStoreFactory.from_csv(Path(self.temp_dir) / "missing.csv", store_path=self.store_path)


class TestResultStore(unittest.TestCase):
    """Test ResultStore value semantics."""

    def test_validation(self) -> None:
        """Test empty URLs and table names are rejected."""
        with pytest.raises(ValueError):
            ResultStore(db_url="", db_table="t")
        with pytest.raises(ValueError):
            ResultStore(db_url="sqlite:///x.sqlite", db_table="")

    def test_equality_and_str(self) -> None:
        """Test stores compare by URL and table."""
        first = ResultStore(db_url="sqlite:///x.sqlite", db_table="t")
        second = ResultStore(db_url="sqlite:///x.sqlite", db_table="t")
        other = ResultStore(db_url="sqlite:///x.sqlite", db_table="u")
        self.assertEqual(first, second)
        self.assertNotEqual(first, other)
        self.assertNotEqual(first, "t")
        self.assertIn("columns=9", str(first))
        self.assertIn("status", repr(first))

    def test_missing_table(self) -> None:
        """Test reading a table that does not exist raises RuntimeError."""
        with tempfile.TemporaryDirectory() as temp_dir:
            store = ResultStore(db_url=f"sqlite:///{Path(temp_dir) / 'empty.sqlite'}", db_table="absent")
            with pytest.raises(RuntimeError):
                store.fetch_rows()


if __name__ == '__main__':
    unittest.main()
