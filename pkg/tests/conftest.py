import numpy as np
import pytest

from hydb import open_database
from hydb.image import random_cover
from hydb.schema import parse_ddl

EMP_MASTER = "emp_master(emp_id INT NOT NULL, name CHAR(40), PRIMARY KEY(emp_id))"
EMP_SALARY = ("emp_salary(sal_id INT NOT NULL, emp_id INT, amount MONEY NOT NULL, "
              "PRIMARY KEY(sal_id))")

ACCEPTANCE_RESULTS = []


def write_cover(path, width=64, height=64, kind="bmp24", seed=0):
    path.write_bytes(random_cover(np.random.default_rng(seed), width, height, kind))
    return path


@pytest.fixture
def covers(tmp_path):
    d = tmp_path / "covers"
    d.mkdir()
    return {
        "big": write_cover(d / "big.bmp", 800, 600, seed=1),
        "small": write_cover(d / "small.bmp", 64, 64, seed=2),
        "link": write_cover(d / "link.ppm", 40, 40, kind="ppm", seed=3),
        "gray": write_cover(d / "gray.pgm", 64, 64, kind="pgm", seed=4),
        "tiny": write_cover(d / "tiny.bmp", 2, 2, seed=5),
    }


@pytest.fixture
def dbdir(tmp_path):
    d = tmp_path / "db"
    d.mkdir()
    return d


@pytest.fixture
def db(dbdir):
    cat = open_database(dbdir, sync=False)
    yield cat
    cat.close()


@pytest.fixture
def emp_db(db, covers):
    """The employee master/salary pair linked by emp_id."""
    from hydb import ForeignKey

    db.create_table(parse_ddl(EMP_MASTER), covers["small"])
    db.create_table(parse_ddl(EMP_SALARY), covers["gray"])
    db.create_foreign_key(ForeignKey("emp_salary", ["emp_id"], "emp_master", ["emp_id"]),
                          covers["link"])
    return db


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
