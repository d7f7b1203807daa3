import pytest

from helpers import make_engine


@pytest.fixture
def engine(tmp_path):
    eng = make_engine(tmp_path / "data")
    yield eng
    eng.close()


@pytest.fixture
def session(engine):
    return engine.create_session()
