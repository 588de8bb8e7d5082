"""
SQLite archive of result tables.

Tables are written with SQLAlchemy, either directly from a ResultTable or by
streaming a previously emitted CSV file through splurge-tools.
"""

import logging
import math
from os import PathLike
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from sqlalchemy import (
    Column as SAColumn,
    Float,
    Integer,
    MetaData,
    String,
    Table,
    create_engine,
    insert,
    literal_column,
    select,
)
from sqlalchemy.exc import SQLAlchemyError
from splurge_tools.dsv_helper import DsvHelper
from splurge_tools.streaming_tabular_data_model import StreamingTabularDataModel

from splurge_cnoma_capacity.experiments import CSV_COLUMNS, Method, ResultTable
from splurge_cnoma_capacity.mc_sim import Scheme

logger = logging.getLogger(__name__)

_FLOAT_COLUMNS = ("variable", "c_ccu", "c_ceu", "c_sum", "std_err")
_INTEGER_COLUMNS = ("effective_order",)


def _column_type(name: str) -> Any:
    if name in _FLOAT_COLUMNS:
        return Float
    if name in _INTEGER_COLUMNS:
        return Integer
    return String


def _table_definition(table_name: str, metadata: MetaData) -> Table:
    return Table(
        table_name,
        metadata,
        *[SAColumn(name, _column_type(name), nullable=True) for name in CSV_COLUMNS]
    )


def _coerce(name: str, value: Any) -> Any:
    """Convert a CSV or row value to its column type; NaN and empty become NULL."""
    if value in (None, ""):
        return None
    if name in _FLOAT_COLUMNS:
        number = float(value)
        return None if math.isnan(number) else number
    if name in _INTEGER_COLUMNS:
        return int(value)
    return str(value)


class ResultStore:

    def __init__(
            self,
            *,
            db_url: str,
            db_table: str
    ) -> None:
        if not db_url:
            raise ValueError("db_url cannot be empty")
        if not db_table:
            raise ValueError("db_table cannot be empty")
        self._db_url = db_url
        self._db_table = db_table
        self._column_names = list(CSV_COLUMNS)

    @property
    def db_url(self) -> str:
        """Get the database URL."""
        return self._db_url

    @property
    def db_table(self) -> str:
        """Get the database table name."""
        return self._db_table

    @property
    def column_names(self) -> List[str]:
        """Get the list of column names."""
        return self._column_names

    def fetch_rows(
            self,
            *,
            scheme: Optional[Union[Scheme, str]] = None,
            method: Optional[Union[Method, str]] = None
    ) -> List[Dict[str, Any]]:
        """
        Read archived rows in insertion order, optionally filtered.

        Args:
            scheme: Only rows of this scheme
            method: Only rows of this method

        Returns:
            List of column-name to value mappings

        Raises:
            RuntimeError: If the query fails
        """
        try:
            engine = create_engine(self._db_url)
            table = Table(self._db_table, MetaData(), autoload_with=engine)
            statement = select(table).order_by(literal_column("rowid"))
            if scheme is not None:
                statement = statement.where(table.c.scheme == Scheme.parse(scheme).value)
            if method is not None:
                statement = statement.where(table.c.method == Method(method).value)
            with engine.connect() as connection:
                rows = [dict(row._mapping) for row in connection.execute(statement)]
            engine.dispose()
            return rows
        except SQLAlchemyError as exc:
            raise RuntimeError(f"Failed to read result store {self._db_table}: {exc}")

    def __str__(self) -> str:
        return f"ResultStore(db_url={self._db_url}, table={self._db_table}, columns={len(self._column_names)})"

    def __repr__(self) -> str:
        return f"ResultStore(db_url={self._db_url}, table={self._db_table}, columns={self._column_names})"

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, ResultStore):
            return False
        return (
            self._db_url == other._db_url and
            self._db_table == other._db_table and
            self._column_names == other._column_names
        )


class ResultStoreFactory:

    @staticmethod
    def _create_table(store_path: Union[str, PathLike], name: str) -> ResultStore:
        """Create (or replace) an empty result table in <store_path>/<name>.sqlite."""
        store_path = Path(store_path)
        store_path.mkdir(parents=True, exist_ok=True)
        db_url = f"sqlite:///{store_path / f'{name}.sqlite'}"

        engine = create_engine(db_url)
        metadata = MetaData()
        table = _table_definition(name, metadata)
        table.drop(engine, checkfirst=True)
        metadata.create_all(engine)
        engine.dispose()
        return ResultStore(db_url=db_url, db_table=name)

    @staticmethod
    def _insert_batch(
            engine,
            *,
            table_name: str,
            batch_data: List[dict],
            chunk_size: int = 25
    ) -> None:
        """
        Insert a batch of rows into the specified table in smaller chunks.

        Args:
            engine: SQLAlchemy engine instance
            table_name: Name of the table to insert into
            batch_data: List of dictionaries representing rows to insert
            chunk_size: Number of rows per insert statement (default: 25)
        """
        with engine.connect() as connection:
            metadata = MetaData()
            table = Table(table_name, metadata, autoload_with=engine)
            insert_stmt = insert(table)

            for i in range(0, len(batch_data), chunk_size):
                chunk = batch_data[i:i + chunk_size]
                connection.execute(insert_stmt, chunk)
            connection.commit()

    @classmethod
    def from_table(
            cls,
            table: ResultTable,
            *,
            store_path: Union[str, PathLike],
            name: str
    ) -> ResultStore:
        """
        Archive a result table.

        Args:
            table: Rows to store
            store_path: Directory holding the SQLite file
            name: Table name, also the database file stem

        Returns:
            ResultStore for the new table

        Raises:
            RuntimeError: If database creation or insertion fails
        """
        try:
            store = cls._create_table(store_path, name)
            batch_data = [
                {column: _coerce(column, value) for column, value in zip(CSV_COLUMNS, row.csv_fields())}
                for row in table.rows
            ]
            engine = create_engine(store.db_url)
            if batch_data:
                cls._insert_batch(engine, table_name=name, batch_data=batch_data)
            engine.dispose()
            logger.info("archived %d rows into %s", len(batch_data), store)
            return store
        except SQLAlchemyError as exc:
            raise RuntimeError(f"Failed to archive result table: {exc}")
        except (ValueError, TypeError, OSError) as exc:
            raise RuntimeError(f"Error archiving result table: {exc}")

    @classmethod
    def from_csv(
            cls,
            csv_path: Union[str, PathLike],
            *,
            store_path: Union[str, PathLike],
            batch_size: int = 1000
    ) -> ResultStore:
        """
        Stream a result CSV into a SQLite table named after the file stem.

        Args:
            csv_path: CSV written by write_csv
            store_path: Directory holding the SQLite file
            batch_size: Number of rows to insert in each batch

        Returns:
            ResultStore for the new table

        Raises:
            RuntimeError: If the header does not match the result schema or insertion fails
        """
        csv_path = Path(csv_path)
        if not csv_path.exists():
            raise RuntimeError(f"Result file not found: {csv_path}")
        try:
            raw_stream = DsvHelper.parse_stream(
                csv_path,
                delimiter=",",
                bookend='"',
                bookend_strip=True,
                skip_header_rows=0,
                skip_footer_rows=0
            )
            streaming_model = StreamingTabularDataModel(
                raw_stream,
                header_rows=1,
                skip_empty_rows=True,
                chunk_size=batch_size
            )
            column_names = list(streaming_model.column_names)
            if column_names != list(CSV_COLUMNS):
                raise ValueError(
                    f"Column mismatch: CSV columns {column_names} "
                    f"do not match result columns {list(CSV_COLUMNS)}"
                )

            store = cls._create_table(store_path, csv_path.stem)
            engine = create_engine(store.db_url)
            batch_data = []
            count = 0
            for row_data in streaming_model.iter_rows():
                if row_data.get("variable") == "variable":
                    continue
                batch_data.append({col: _coerce(col, row_data.get(col)) for col in column_names})
                if len(batch_data) >= batch_size:
                    cls._insert_batch(engine, table_name=store.db_table, batch_data=batch_data)
                    count += len(batch_data)
                    batch_data = []
            if batch_data:
                cls._insert_batch(engine, table_name=store.db_table, batch_data=batch_data)
                count += len(batch_data)
            engine.dispose()
            logger.info("archived %d rows from %s into %s", count, csv_path, store)
            return store
        except SQLAlchemyError as exc:
            raise RuntimeError(f"Database insertion failed: {exc}")
        except (ValueError, TypeError, AttributeError, OSError) as exc:
            raise RuntimeError(f"Streaming result CSV to SQLite failed: {exc}")
