import io
import subprocess
import sys

import pytest

from hydb import Money, Predicate, open_database
from hydb.cli import run
from hydb.errors import HydbError
from hydb.query import format_rows, parse_assignments, parse_row, parse_where
from hydb.schema import parse_ddl

from conftest import EMP_MASTER, EMP_SALARY


def cli(*argv):
    out = io.StringIO()
    code = run([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture
def emp_dir(dbdir, covers):
    assert cli("init", dbdir)[0] == 0
    assert cli("create-table", dbdir, "--cover", covers["small"], "--schema", EMP_MASTER)[0] == 0
    assert cli("create-table", dbdir, "--cover", covers["gray"], "--schema", EMP_SALARY)[0] == 0
    assert cli("link", dbdir, "--child", "emp_salary(emp_id)", "--parent", "emp_master(emp_id)",
               "--cover", covers["link"])[0] == 0
    return dbdir


def test_select_three_rows_csv(emp_dir):
    for v in ['1,alice', '2,"smith, bob"', '3,\\N']:
        assert cli("insert", emp_dir, "emp_master", "--values", v) == (0, "")
    code, out = cli("select", emp_dir, "emp_master", "--output", "csv")
    assert code == 0
    assert out.splitlines() == ["1,alice", '2,"smith, bob"', "3,\\N"]


def test_select_tsv_columns_where(emp_dir):
    cli("insert", emp_dir, "emp_master", "--values", "1,alice")
    cli("insert", emp_dir, "emp_master", "--values", "2,bob")
    code, out = cli("select", emp_dir, "emp_master", "--where", "emp_id > 1",
                    "--columns", "name,emp_id", "--output", "tsv")
    assert (code, out) == (0, "bob\t2\n")


def test_pk_violation_names_key(emp_dir, capsys):
    cli("insert", emp_dir, "emp_master", "--values", "7,a")
    capsys.readouterr()
    code, out = cli("insert", emp_dir, "emp_master", "--values", "7,b")
    err = capsys.readouterr().err
    assert (code, out) == (2, "")
    assert "PkViolation" in err and "(7,)" in err


def test_constraint_exit_codes(emp_dir):
    cli("insert", emp_dir, "emp_master", "--values", "1,a")
    cli("insert", emp_dir, "emp_salary", "--values", "10,1,5.5")
    assert cli("insert", emp_dir, "emp_salary", "--values", "11,9,1")[0] == 2
    assert cli("delete", emp_dir, "emp_master", "--where", "emp_id = 1")[0] == 2
    assert cli("update", emp_dir, "emp_master", "--set", "emp_id=4")[0] == 2
    assert cli("drop-table", emp_dir, "emp_master")[0] == 2
    assert cli("insert", emp_dir, "emp_salary", "--values", "12,\\N,\\N")[0] == 2


def test_update_delete_print_counts(emp_dir):
    for i in range(4):
        cli("insert", emp_dir, "emp_master", "--values", f"{i},n{i}")
    assert cli("update", emp_dir, "emp_master", "--set", "name='x y'", "--where", "emp_id < 2") == (0, "2\n")
    assert cli("select", emp_dir, "emp_master", "--where", "name = 'x y'")[1] == "0,x y\n1,x y\n"
    assert cli("delete", emp_dir, "emp_master", "--where", "emp_id >= 3") == (0, "1\n")
    assert cli("delete", emp_dir, "emp_master", "--where", "emp_id = 99") == (0, "0\n")


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["select"],
    ["insert", "DIR", "emp_master"],
    ["select", "DIR", "emp_master", "--output", "xml"],
    ["select", "DIR", "emp_master", "--where", "emp_id ~ 1"],
    ["select", "DIR", "emp_master", "--where", "emp_id = x"],
    ["select", "DIR", "emp_master", "--where", "zz = 1"],
    ["select", "DIR", "nope"],
    ["insert", "DIR", "emp_master", "--values", "1"],
    ["update", "DIR", "emp_master", "--set", "emp_id"],
    ["create-table", "DIR", "--cover", "COVER", "--schema", "t(a INT)"],
])
def test_usage_errors(emp_dir, covers, argv):
    argv = [emp_dir if a == "DIR" else covers["small"] if a == "COVER" else a for a in argv]
    assert cli(*argv)[0] == 1


def test_io_errors(tmp_path, covers):
    assert cli("select", tmp_path / "missing", "t")[0] == 4
    assert cli("inspect", tmp_path / "missing.bmp")[0] == 4
    db = tmp_path / "db"
    cli("init", db)
    assert cli("create-table", db, "--cover", tmp_path / "none.bmp", "--schema", EMP_MASTER)[0] == 4


def test_lock_held_exit(emp_dir):
    with open_database(emp_dir):
        assert cli("select", emp_dir, "emp_master")[0] == 4


def test_verify_clean_and_flipped(emp_dir):
    cli("insert", emp_dir, "emp_master", "--values", "1,alice")
    code, out = cli("verify", emp_dir)
    assert code == 0 and out.splitlines()[-1] == "ok"
    path = emp_dir / "emp_master.bmp"
    raw = bytearray(path.read_bytes())
    raw[-7] ^= 0x01
    path.write_bytes(bytes(raw))
    code, out = cli("verify", emp_dir)
    assert code == 3 and out.splitlines()[-1] == "FAILED"
    assert any("emp_master" in line for line in out.splitlines()[:-1])


def test_inspect(emp_dir, covers):
    code, out = cli("inspect", emp_dir / "emp_master.bmp", "--cover", covers["small"])
    assert code == 0
    assert "lsb_channel: table emp_master" in out
    assert "trailer_channel: record block (0 bytes, 0 rows)" in out
    assert "delta[+1]" in out and "delta[-1]" in out
    code, out = cli("inspect", covers["small"])
    assert code == 0 and "lsb_capacity: 1536" in out


def test_inspect_corrupt_exit(emp_dir):
    path = emp_dir / "emp_master.bmp"
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0x80
    path.write_bytes(bytes(raw))
    assert cli("inspect", path)[0] == 3


def test_output_determinism(emp_dir):
    cli("insert", emp_dir, "emp_master", "--values", "1,\"q\"\"uote\"")
    cli("insert", emp_dir, "emp_master", "--values", "2,é")
    runs = {cli("select", emp_dir, "emp_master")[1] for _ in range(5)}
    assert len(runs) == 1
    assert runs.pop() == '1,"q""uote"\n2,é\n'


def test_library_and_cli_agree(tmp_path, covers):
    """The same scenario driven both ways leaves identical files and output."""
    script = [
        ("insert", "emp_master", "1,alice"),
        ("insert", "emp_master", "2,bob"),
        ("insert", "emp_salary", "10,1,100.5"),
        ("insert", "emp_salary", "11,3,1"),
        ("insert", "emp_master", "2,dup"),
        ("update", "emp_master", "name='B'", "emp_id = 2"),
        ("update", "emp_master", "emp_id=5", "emp_id = 1"),
        ("delete", "emp_master", None, "emp_id = 2"),
        ("delete", "emp_salary", None, "amount > 50"),
    ]
    lib, via_cli = tmp_path / "lib", tmp_path / "cli"
    for d in (lib, via_cli):
        cli("init", d)
        cli("create-table", d, "--cover", covers["small"], "--schema", EMP_MASTER)
        cli("create-table", d, "--cover", covers["gray"], "--schema", EMP_SALARY)
        cli("link", d, "--child", "emp_salary(emp_id)", "--parent", "emp_master(emp_id)",
            "--cover", covers["link"])

    lib_log, cli_log = [], []
    with open_database(lib) as cat:
        for op, table, arg, where in [(s + (None,))[:4] for s in script]:
            s = cat.schema(table)
            try:
                if op == "insert":
                    cat.insert(table, parse_row(s, arg))
                    lib_log.append(0)
                elif op == "update":
                    n = cat.update(table, parse_assignments(s, arg), parse_where(s, where))
                    lib_log.append((0, n))
                else:
                    lib_log.append((0, cat.delete(table, parse_where(s, where))))
            except HydbError as exc:
                lib_log.append(exc.exit_code)
        lib_rows = {t: format_rows(cat.select(t)) for t in cat.tables}
    for op, table, arg, where in [(s + (None,))[:4] for s in script]:
        if op == "insert":
            cli_log.append(cli("insert", via_cli, table, "--values", arg)[0])
        else:
            extra = ["--set", arg] if op == "update" else []
            code, out = cli(op, via_cli, table, *extra, "--where", where)
            cli_log.append((code, int(out)) if code == 0 else code)
    cli_rows = {t: cli("select", via_cli, t)[1] for t in lib_rows}

    assert lib_log == cli_log
    assert lib_rows == cli_rows
    for f in lib.iterdir():
        if f.suffix != ".lock":
            assert f.read_bytes() == (via_cli / f.name).read_bytes(), f.name


def test_cli_matches_engine_values(emp_dir):
    cli("insert", emp_dir, "emp_master", "--values", "1,a")
    cli("insert", emp_dir, "emp_salary", "--values", "3,1,12.345")
    with open_database(emp_dir) as cat:
        assert cat.select("emp_salary", Predicate.where(("amount", "=", Money(123450)))) == [
            (3, 1, Money(123450))]


def test_console_entry_point(emp_dir):
    proc = subprocess.run([sys.executable, "-m", "hydb", "select", str(emp_dir), "emp_master"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout == ""
    proc = subprocess.run([sys.executable, "-m", "hydb", "frobnicate"], capture_output=True, text=True)
    assert proc.returncode == 1 and "usage" in proc.stderr


def test_ddl_matches_library(dbdir, covers):
    cli("init", dbdir)
    cli("create-table", dbdir, "--cover", covers["small"], "--schema", EMP_MASTER)
    with open_database(dbdir) as cat:
        assert cat.schema("emp_master") == parse_ddl(EMP_MASTER)
