import sys

import numpy as np
import pytest

from ddgpce.errors import CountMismatchError, ExternalModelError
from ddgpce.external import ExternalModel

PY = sys.executable


def script(tmp_path, body):
    path = tmp_path / "model.py"
    path.write_text("import sys\nlines = sys.stdin.read().splitlines()\nheader, rows = lines[0], lines[1:]\n" + body)
    return ExternalModel((PY, str(path)))


def test_first_column_echo(tmp_path):
    m = script(tmp_path, "assert header == 'x1,x2,x3'\nfor r in rows: print(r.split(',')[0])\n")
    x = np.random.default_rng(0).normal(size=(17, 3))
    assert np.array_equal(m(x), x[:, 0])


def test_batches_are_sharded(tmp_path):
    m = script(tmp_path, "for r in rows: print(float(r.split(',')[1]) * 2)\n")
    sharded = ExternalModel(m.command, batch_size=4)
    x = np.arange(22.0).reshape(11, 2)
    assert np.array_equal(sharded(x), 2 * x[:, 1])


def test_count_mismatch(tmp_path):
    m = script(tmp_path, "for r in rows[:-1]: print(1.0)\n")
    with pytest.raises(CountMismatchError) as err:
        m(np.ones((5, 2)))
    assert err.value.expected == 5 and err.value.actual == 4


def test_nonzero_exit_carries_stderr(tmp_path):
    m = script(tmp_path, "sys.stderr.write('mesh failed')\nsys.exit(3)\n")
    with pytest.raises(ExternalModelError) as err:
        m(np.ones((2, 2)))
    assert err.value.returncode == 3 and "mesh failed" in str(err.value)


def test_parse_error_line_number(tmp_path):
    m = script(tmp_path, "print(1.0)\nprint('oops')\nprint(2.0)\n")
    with pytest.raises(ExternalModelError, match="line 2") as err:
        m(np.ones((3, 1)))
    assert err.value.line == 2 and err.value.sample_index == 1


def test_timeout(tmp_path):
    m = script(tmp_path, "import time\ntime.sleep(5)\n")
    with pytest.raises(ExternalModelError, match="timed out"):
        ExternalModel(m.command, timeout=0.5)(np.ones((1, 1)))


def test_missing_command():
    with pytest.raises(ExternalModelError, match="cannot start"):
        ExternalModel.from_string("definitely-not-a-command-xyz")(np.ones((1, 1)))
