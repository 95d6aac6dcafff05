"""Invocations exercised by the CLI tests and the determinism check."""
from pathlib import Path

SPECS = Path(__file__).resolve().parent.parent / "specs"


def spec(name: str) -> str:
    return str(SPECS / f"{name}.json")


CORPUS = [
    ["realize", "--set", "2,3", "--verify"],
    ["realize", "--set", "2,4,8,tail:pow(2)", "--truncate", "3"],
    ["realize", "--set", "2,3,6", "--lcm-closed", "--format", "csv"],
    ["realize", "--set", "1000,1001"],
    ["orbits", "--set", "2,3"],
    ["orbits", "--set", "2,3", "--format", "csv"],
    ["simulate", "--spec", spec("chacon"), "--stages", "5", "--A", "3:0-5", "--m", "13,40"],
    ["simulate", "--spec", spec("djr"), "--stages", "3", "--format", "csv"],
    ["weak-limit", "--spec", spec("case_i"), "--case", "i", "--p", "2", "--A", "3:0,2,3", "--B", "3:1,2,4",
     "--min-height", "10000"],
    ["weak-limit", "--spec", spec("case_ii"), "--case", "ii", "--p", "1", "--A", "3:0,2,3", "--B", "3:1,2,4",
     "--min-height", "10000", "--format", "csv"],
    ["weak-limit", "--spec", spec("half_spacer"), "--case", "iv", "--p", "1", "--A", "3:0-3", "--B", "3:1-8",
     "--min-height", "10000"],
    ["weak-limit", "--spec", spec("chacon"), "--case", "iv", "--p", "1", "--tol", "0.02"],
    ["cocycle-verify", "--spec", spec("cocycle_fiber_shift"), "--mode", "fiber-shift", "--k", "1", "--chi", "1",
     "--A", "3:0,1,3", "--B", "3:1-3", "--min-height", "10000"],
    ["cocycle-verify", "--spec", spec("cocycle_orbit_average"), "--mode", "orbit-average", "--k", "1",
     "--chi", "1", "--A", "3:0,1,3", "--B", "3:1-3", "--min-height", "10000", "--format", "csv"],
    ["cocycle-verify", "--spec", spec("cocycle_fiber_shift"), "--k", "1", "--fiber-pair", "0", "1",
     "--A", "3:0,1,3", "--B", "3:1-3", "--min-height", "10000"],
    ["cocycle-verify", "--spec", spec("cocycle_fiber_shift"), "--m", "13", "--chi", "1", "--A", "3:0,1,3"],
    ["multiplicity", "--op", "diamond", "--set", "2", "--set", "3"],
    ["multiplicity", "--op", "double-coset", "--n", "4", "--k", "2", "--group", "C3"],
    ["multiplicity", "--op", "power", "--n", "5", "--group", "S4"],
    ["multiplicity", "--op", "poisson", "--kind", "example82", "--terms", "5", "--format", "csv"],
    ["multiplicity", "--op", "closure", "--gens", "3,5", "--semigroup", "add", "--bound", "12"],
    ["plan", "--set", "3,4"],
    ["plan", "--set", "2,3,6", "--format", "csv"],
    ["oracle", "--op", "tensor-sym", "--symbols", "5", "--n", "3"],
    ["oracle", "--op", "cartesian", "--n", "4", "--group", "S3"],
    ["oracle", "--op", "exp", "--p", "2", "--N", "4"],
    ["oracle", "--op", "gn-rep", "--n", "3", "--m", "4"],
]
