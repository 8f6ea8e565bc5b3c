"""Fixtures that produce real pipeline CSVs through the CLI of the root
package (the only interface the figure package consumes)."""

import subprocess
import sys

import pytest

REF_CONFIG = """
n = 5
m = critical
lambda = 4.0
c1 = 1.0
c2 = 1.0
r_min = 1e-3
r_max = 1e3
N = 384
dt0 = 1e-3
t_end = 0.02
"""

GEO_CONFIG = """
n = 6
m = critical
lambda = 6.0
c1 = 1.0
c2 = 1.0
r_min = 1e-4
r_max = 1e3
N = 1025
dt0 = 1e-3
t_end = 0.25
"""


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "fdlab", *args],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="session")
def reference_csvs(tmp_path_factory):
    """solve + verify artifacts of the reference-constants run."""
    base = tmp_path_factory.mktemp("ref")
    cfg = base / "run.cfg"
    cfg.write_text(REF_CONFIG, encoding="utf-8")
    solve_dir = base / "solve"
    verify_dir = base / "verify"
    run_cli("solve", "--config", str(cfg), "--out", str(solve_dir))
    run_cli("verify", "--traj", str(solve_dir / "trajectory.csv"),
            "--config", str(cfg), "--out", str(verify_dir))
    return {"trajectory": solve_dir / "trajectory.csv",
            "envelope": verify_dir / "envelope.csv"}


@pytest.fixture(scope="session")
def geometry_csvs(tmp_path_factory):
    """solve + geometry artifacts of the critical-exponent run."""
    base = tmp_path_factory.mktemp("geo")
    cfg = base / "run.cfg"
    cfg.write_text(GEO_CONFIG, encoding="utf-8")
    solve_dir = base / "solve"
    geom_dir = base / "geom"
    run_cli("solve", "--config", str(cfg), "--out", str(solve_dir))
    run_cli("geometry", "--traj", str(solve_dir / "trajectory.csv"),
            "--config", str(cfg), "--out", str(geom_dir))
    return {"geometry": geom_dir / "geometry.csv",
            "endfit": geom_dir / "endfit.csv",
            "blowdown": geom_dir / "blowdown.csv"}
