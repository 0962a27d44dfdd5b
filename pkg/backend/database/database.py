from pathlib import Path
from typing import Dict, Union

from loguru import logger
from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from backend.database.models import Base

RESULTS_DB = "results.db"

# One engine per database URL for the life of the process
_engines: Dict[str, Engine] = {}


def database_url(path: Union[str, Path]) -> str:
    """SQLite URL for a results database file or a run directory"""
    path = Path(path)
    if path.suffix != ".db":
        path = path / RESULTS_DB
    return f"sqlite:///{path.resolve().as_posix()}"


def create_db_engine(path: Union[str, Path]) -> Engine:
    url = database_url(path)
    engine = _engines.get(url)
    if engine is None:
        engine = create_engine(url, future=True)
        _engines[url] = engine
    return engine


def dispose_engines():
    """Close the pooled connections of every cached engine"""
    for url, engine in _engines.items():
        logger.debug(f"Disposing database engine {url}")
        engine.dispose()
    _engines.clear()


def create_tables(engine: Engine):
    """Create all tables in the database"""
    Base.metadata.create_all(bind=engine)


def get_session_factory(path: Union[str, Path], create: bool = True) -> sessionmaker:
    engine = create_db_engine(path)
    if create:
        Path(engine.url.database).parent.mkdir(parents=True, exist_ok=True)
        create_tables(engine)
    return sessionmaker(autocommit=False, autoflush=False, bind=engine, expire_on_commit=False)


def get_db_session(path: Union[str, Path]) -> Session:
    """Get a database session for an existing results database"""
    return get_session_factory(path, create=False)()
