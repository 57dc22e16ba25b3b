import json
import subprocess
import sys

import numpy as np
import pytest

from qcorr import random_family, transpose_map, FiniteQuantumSpace
from qcorr.cli import JobSpec, main, run
from qcorr.serialize import dumps, to_json
from qcorr import DomainError


def call(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else dumps(obj))
    return path


def test_trace_pipeline(tmp_path, capsys):
    code, fam = call(capsys, "random-family", "--P", "2,1", "--O", "1,2", "--d", "3", "--seed", "7")
    assert code == 0
    f = write(tmp_path, "f.json", fam)
    assert call(capsys, "validate-family", f)[0] == 0
    code, corr = call(capsys, "from-trace", f)
    assert code == 0
    c = write(tmp_path, "c.json", corr)
    code, out = call(capsys, "check-correlation", c)
    assert code == 0, out
    rep = json.loads(out)
    assert rep["synchronous"] and rep["sync_sum"] == pytest.approx(2)
    code, real = call(capsys, "gns-realize", f)
    assert code == 0
    r = write(tmp_path, "r.json", real)
    code, out = call(capsys, "analyze-sync", r)
    assert code == 0 and json.loads(out)["equals_trace_correlation"]
    code, out = call(capsys, "build-correlation", r)
    X1 = np.asarray(json.loads(out)["X"][0][0][0][0])
    X2 = np.asarray(json.loads(corr)["X"][0][0][0][0])
    assert np.max(np.abs(X1 - X2)) <= 1e-12


def test_seed_reproducible(capsys):
    args = ("random-family", "--P", "2", "--O", "1,1", "--d", "2", "--seed", "123")
    assert call(capsys, *args)[1] == call(capsys, *args)[1]
    assert call(capsys, *args[:-1], "124")[1] != call(capsys, *args)[1]


def test_broken_adjoint_names_index(tmp_path, capsys):
    F = random_family([1], [1, 1], 2, seed=0)
    gens = F.gens.copy()
    gens[1, 0, 0, 1] += 0.5
    f = write(tmp_path, "bad.json", F.with_gens(gens))
    code, out = call(capsys, "validate-family", f)
    assert code == 1
    rep = json.loads(out)
    assert rep["status"] == "fail"
    assert rep["worst"]["adjoint"] == {"k": 1, "i": 0, "j": 0, "l": 0, "s": 0, "t": 0}


def test_unsatisfiable_random_family(capsys):
    code, out = call(capsys, "random-family", "--P", "1", "--O", "2", "--d", "3", "--seed", "1")
    assert code == 2
    rep = json.loads(out)
    assert rep["error"] == "unsatisfiable"
    assert "c_0*2 = 1*3 = 3" in rep["message"]


def test_bad_inputs_exit_two(tmp_path, capsys):
    f = write(tmp_path, "broken.json", '{"P": {"blocks": [1]},, }')
    code, out = call(capsys, "validate-family", f)
    assert code == 2
    assert json.loads(out)["offset"] == 22
    assert call(capsys, "validate-family", tmp_path / "missing.json")[0] == 2
    assert call(capsys, "random-family", "--P", "1", "--O", "1", "--d", "1", "--tol", "-1")[0] == 2
    assert call(capsys, "no-such-command")[0] == 2


def test_precondition_exit_one(tmp_path, capsys):
    F = random_family([2], [2], 2, seed=1)
    f = write(tmp_path, "f.json", F)
    tau = write(tmp_path, "tau.json", json.dumps(
        {"space": {"blocks": [2]}, "density": [[[[0.9, 0], [0, 0]], [[0, 0], [0.1, 0]]]]}))
    code, out = call(capsys, "from-trace", f, "--tau", tau)
    assert code == 1
    assert json.loads(out)["error"] == "precondition"


def test_nonsync_flag(tmp_path, capsys):
    p = np.full((2, 2, 2, 2), 0.25)
    from qcorr import from_classical_table
    c = write(tmp_path, "c.json", from_classical_table([1, 1], [1, 1], p))
    assert call(capsys, "check-correlation", c)[0] == 1
    assert call(capsys, "check-correlation", c, "--allow-nonsync")[0] == 0
    code, out = call(capsys, "classical-table", c, "--csv")
    assert code == 0 and out.splitlines()[0] == "k,k',l,l',p"


def test_pisier_command(tmp_path, capsys):
    m = write(tmp_path, "m.json", transpose_map(FiniteQuantumSpace((2,))))
    code, out = call(capsys, "pisier", m)
    # transpose reverses products, so the homomorphism precondition fails
    assert code == 1 and json.loads(out)["error"] == "precondition"


def test_pisier_on_gns_map(tmp_path, capsys):
    # the family map of a homomorphism from M_2 decomposes with C = M_2 (x) D
    F = random_family([2], [2], 4, seed=2)
    m = write(tmp_path, "m.json", F.as_map())
    code, out = call(capsys, "pisier", m)
    rep = json.loads(out)
    assert code == 0 and rep["dimension_identity"]


def test_table_output(tmp_path, capsys):
    f = write(tmp_path, "f.json", random_family([1], [1, 1], 1, seed=0))
    code, out = call(capsys, "validate-family", f, "--table")
    assert code == 0
    assert "status" in out and not out.lstrip().startswith("{")


def test_out_file(tmp_path, capsys):
    dest = tmp_path / "fam.json"
    code, out = call(capsys, "random-family", "--P", "1", "--O", "1", "--d", "2", "--seed", "3", "--out", dest)
    assert code == 0 and out == ""
    assert json.loads(dest.read_text())["d"] == 2


def test_batch(tmp_path, capsys):
    f = write(tmp_path, "f.json", random_family([1], [1, 1], 2, seed=0))
    jobs = [{"command": "validate-family", "inputs": [str(f)]},
            {"command": "random-family", "options": {"P": "1", "O": "2", "d": 3}, "seed": 1},
            {"command": "from-trace", "inputs": [str(f)], "output": str(tmp_path / "c.json")}]
    b = write(tmp_path, "batch.json", json.dumps({"jobs": jobs}))
    code, out = call(capsys, "batch", b)
    assert code == 2
    rep = json.loads(out)["jobs"]
    assert [j["exit_code"] for j in rep] == [0, 2, 0]
    assert (tmp_path / "c.json").exists()


def test_jobspec_validation():
    with pytest.raises(DomainError):
        JobSpec("validate-family")
    with pytest.raises(DomainError):
        JobSpec("random-family", seed=-1)
    code, doc = run(JobSpec("random-family", options={"P": "1", "O": "1", "d": 1}, seed=0))
    assert code == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qcorr", "random-family", "--P", "1",
                           "--O", "1,1", "--d", "1", "--seed", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["d"] == 1
