import csv
import io
import json
import math
import re
import types

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thetalam import __version__
from thetalam.cli import main
from thetalam.config import (
    ConfigParseError,
    ConfigValidationError,
    RunConfig,
    Tolerances,
    parse_config,
    render_config,
)
from thetalam.fileio import (
    SolutionFormatError,
    cross_section_svg,
    csv_text,
    dumps_json,
    emit_cross_section,
    read_solution,
    solution_text,
    write_solution,
)
from thetalam.geom import MetricProfile, lambda_weight
from thetalam.lam_sim import TargetSet, run_sequence
from thetalam.rotmin import EPS_AREA
from thetalam.theta_pde import BoundaryCurve, solve_dirichlet

EUC = MetricProfile.euclidean()


@pytest.fixture(scope="module")
def disk_estimate(grids):
    return run_sequence(TargetSet.parse("0.7"), EUC, [4, 8, 16], grids(128))


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- configuration -----------------------------------------------------------------


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg.metric == "euclidean" and cfg.grid_n == 256
    assert cfg.tolerances == Tolerances(1e-8, EPS_AREA, 0.1)
    assert cfg.delta_exhaustion is None and cfg.radius == 1.0
    assert cfg.n_list == (4, 8, 16, 32)


def test_poincare_default_exhaustion():
    cfg = parse_config("metric=poincare")
    assert cfg.delta_exhaustion == 0.01 and cfg.radius == pytest.approx(0.99)


def test_full_document_with_comments():
    text = """
    # run of the two-height target
    metric = poincare   # ball model
    grid_n = 128
    delta_exhaustion = 0.02
    target_set = 0.25,0.75
    n_list = 4, 8, 16
    tol_EL = 1e-9
    tau = 0.15
    """
    cfg = parse_config(text)
    assert (cfg.metric, cfg.grid_n, cfg.delta_exhaustion) == ("poincare", 128, 0.02)
    assert cfg.target().points == [0.25, 0.75]
    assert cfg.n_list == (4, 8, 16)
    assert cfg.tolerances.tol_EL == 1e-9 and cfg.tolerances.tau == 0.15
    assert cfg.tolerances.tol_area == EPS_AREA


@pytest.mark.parametrize(
    "text, field",
    [
        ("grid_n=10", "grid_n"),
        ("grid_n=4096", "grid_n"),
        ("metric=poincare\ndelta_exhaustion=0.5", "delta_exhaustion"),
        ("metric=poincare\ndelta_exhaustion=0", "delta_exhaustion"),
        ("delta_exhaustion=0.01", "delta_exhaustion"),
        ("metric=spherical", "metric"),
        ("tol_EL=0", "tol_EL"),
        ("tol_area=-1e-7", "tol_area"),
        ("tau=1.5", "tau"),
        ("n_list=8,4", "n_list"),
        ("target_set=1.5", "target_set"),
    ],
)
def test_validation_names_the_field(text, field):
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(text)
    assert exc.value.field == field
    assert field in str(exc.value)


@pytest.mark.parametrize(
    "text, line",
    [
        ("metric=euclidean\ngrid_n 64", 2),
        ("\n\ncolour=red", 3),
        ("grid_n=64\ngrid_n=128", 2),
        ("# header\ngrid_n=sixty", 2),
        ("n_list=4,x", 1),
    ],
)
def test_parse_error_carries_line(text, line):
    with pytest.raises(ConfigParseError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


configs = st.builds(
    RunConfig,
    metric=st.sampled_from(["euclidean", "poincare"]),
    grid_n=st.integers(32, 2048),
    target_set=st.sampled_from(["", "0.25", "0.25,0.75", "[0.3:0.4],0.9"]),
    n_list=st.lists(st.integers(1, 512), min_size=1, max_size=6, unique=True).map(lambda x: tuple(sorted(x))),
    tolerances=st.builds(
        Tolerances,
        tol_EL=st.floats(1e-14, 1.0),
        tol_area=st.floats(1e-14, 1.0),
        tau=st.floats(1e-3, 0.99),
    ),
)


@settings(max_examples=60, deadline=None, derandomize=True)
@given(cfg=configs)
def test_render_parse_round_trip(cfg):
    cfg = cfg.validated()
    back = parse_config(render_config(cfg))
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_config_hash_tracks_content():
    a = parse_config("grid_n=128")
    assert a.digest() == parse_config("# same\ngrid_n = 128\n").digest()
    assert a.digest() != parse_config("grid_n=129").digest()
    assert re.fullmatch(r"[0-9a-f]{16}", a.digest())


# -- serialization --------------------------------------------------------------------


def test_json_is_canonical():
    doc = {"b": np.float64(1.5), "a": [np.int64(2), float("nan"), np.array([1.0, np.inf])], "c": np.bool_(True)}
    text = dumps_json(doc)
    assert json.loads(text) == {"a": [2, None, [1.0, None]], "b": 1.5, "c": True}
    assert text.index('"a"') < text.index('"b"')


def test_csv_round_trips_floats():
    x = [0.1, 1 / 3, 2.0**-40, math.pi * 1e10]
    text = csv_text(["x", "tag"], [[v, "k"] for v in x] + [[math.nan, "n"]])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["x", "tag"]
    assert [float(r[0]) for r in rows[1:-1]] == x
    assert rows[-1] == ["", "n"]


@pytest.mark.parametrize("metric", ["euclidean", "poincare"])
def test_solution_file_round_trip(grids, tmp_path, metric):
    m = MetricProfile(metric)
    g = grids(32, 0.99 if m.is_hyperbolic else 1.0)
    sol = solve_dirichlet(BoundaryCurve(lambda z: np.sin(2 * z), label="sin2z"), m, g)
    path = tmp_path / "sol.csv"
    write_solution(path, sol, __version__, {"target_set": "0.3"})
    back, head = read_solution(path, {(g.grid_n, g.radius): g})
    assert np.array_equal(back.theta, sol.theta)
    assert back.metric == sol.metric and back.grid is g
    assert head["boundary_label"] == "sin2z" and head["target_set"] == "0.3"
    assert head["energy"] == sol.energy and head["version"] == __version__
    # the grid is rebuilt when no cache is supplied
    again, _ = read_solution(path)
    assert np.array_equal(again.grid.nodes, g.nodes)
    assert solution_text(back, __version__, {"target_set": "0.3"}).splitlines()[1:] == path.read_text().splitlines()[1:]


def test_solution_file_corruption(grids, tmp_path):
    g = grids(32)
    sol = solve_dirichlet(BoundaryCurve.helicoid(1.0), EUC, g)
    good = solution_text(sol, __version__)
    head, cols, *rows = good.splitlines()
    cases = {
        "header": "not json\n" + "\n".join([cols] + rows),
        "columns": "\n".join([head, "a,b,c"] + rows),
        "row": "\n".join([head, cols] + rows[:-1] + ["1,2"]),
        "missing": "\n".join([head, cols] + rows[:-1]),
        "moved": "\n".join([head, cols, "0.5,0.5,0"] + rows[1:]),
    }
    for name, text in cases.items():
        p = tmp_path / f"{name}.csv"
        p.write_text(text)
        with pytest.raises(SolutionFormatError):
            read_solution(p)


# -- cross sections --------------------------------------------------------------------


def _polylines(svg, kind=None):
    pat = r'<polyline points="([^"]+)"[^>]*?' + (f'data-kind="{kind}"' if kind else "") + "/>"
    out = []
    for m in re.finditer(pat, svg):
        pts = np.array([[float(v) for v in p.split(",")] for p in m.group(1).split()])
        out.append(pts * np.array([1.0, -1.0]))
    return out


def test_empty_estimate_is_outline_only():
    est = types.SimpleNamespace(rotational_leaves=[], blowup_K=[], solutions=[])
    svg = cross_section_svg(est)
    assert svg.count("<circle") == 1 and "<polyline" not in svg
    assert 'r="1.000000"' in svg


def test_disk_run_draws_horizontal_chords(disk_estimate, tmp_path):
    svg = emit_cross_section(disk_estimate, tmp_path / "x.svg")
    assert (tmp_path / "x.svg").read_text() == svg
    chords = _polylines(svg, "disk")
    assert len(chords) == 4  # two disks, each with its mirror image
    h = disk_estimate.grid.h
    heights = sorted(float(np.mean(P[:, 1])) for P in chords)
    assert heights[:2] == pytest.approx([-0.7, -0.7], abs=0.02)
    assert heights[2:] == pytest.approx([0.7, 0.7], abs=0.02)
    for P in chords:
        assert np.ptp(P[:, 1]) <= 4 * h
        half = math.sqrt(1 - np.mean(P[:, 1]) ** 2)
        assert np.max(np.abs(P[:, 0])) == pytest.approx(half, abs=2 * h)
    # mirror pairs
    xs = sorted(round(float(np.sign(np.mean(P[:, 0]))), 1) for P in chords)
    assert xs == [-1.0, -1.0, 1.0, 1.0]


def test_cross_section_is_deterministic_and_fixed_precision(disk_estimate):
    a = cross_section_svg(disk_estimate)
    b = cross_section_svg(disk_estimate)
    assert a == b
    body = a.split("?>", 1)[1]
    nums = re.findall(r"-?\d+\.\d+", body)
    assert nums and all(len(x.split(".")[1]) == 6 for x in nums)


def test_blowup_points_are_dots():
    est = types.SimpleNamespace(rotational_leaves=[], blowup_K=[-0.75, 0.75], solutions=[])
    svg = cross_section_svg(est)
    assert 'cy="-0.750000"' in svg and 'cy="0.750000"' in svg


def test_unwritable_svg_path(disk_estimate, tmp_path):
    with pytest.raises(OSError):
        emit_cross_section(disk_estimate, tmp_path / "missing" / "x.svg")


# -- command line -----------------------------------------------------------------------


def test_acrit_is_repeatable(capsys):
    code, first, _ = run_cli(capsys, "acrit", "--metric", "euclidean")
    assert code == 0
    _, second, _ = run_cli(capsys, "acrit", "--metric", "euclidean")
    assert first == second
    doc = json.loads(first)
    assert doc["verdict_flip"] is True
    lo, hi = doc["bracket"]
    assert lo < doc["a_crit"] < hi and hi - lo < 1e-7
    assert doc["provenance"]["version"] == __version__
    assert re.fullmatch(r"[0-9a-f]{16}", doc["provenance"]["config_hash"])


def test_catenoid_family_table(capsys, tmp_path):
    out = tmp_path / "fam.csv"
    assert run_cli(capsys, "catenoid-family", "--metric", "euclidean", "--a-range", "0.2:0.7:6", "--out", out)[0] == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["a"]) for r in rows] == pytest.approx([0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    for r in rows:
        a = float(r["a"])
        assert float(r["disk_area"]) == pytest.approx(2 * math.pi * (1 - a * a))
        if r["catenoid_area_stable"]:
            assert float(r["catenoid_area_stable"]) < float(r["catenoid_area_unstable"])
    assert [r["verdict"] for r in rows] == ["AnnuliOnly"] * 3 + ["DisksOnly"] * 3
    assert rows[-1]["catenoid_area_stable"] == ""


def test_ribbon_ratio_is_bounded_and_convergent(capsys):
    code, out, _ = run_cli(capsys, "ribbon", "--theta-waist", "0.8", "--theta-range", "1e-4:0.1:12", "--log")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    th = np.array([float(r["theta"]) for r in rows])
    ratio = np.array([float(r["ratio"]) for r in rows])
    assert np.allclose(ratio, [float(r["ribbon_length"]) for r in rows] / th, rtol=1e-12)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 10
    # t' ~ c theta^2 / (2 pi) and lambda ~ 2 pi / theta^2 give ribbon / theta -> c / 3, with an O(theta^2) correction
    limit = float(lambda_weight(0.8)) / 3
    assert np.all(np.abs(ratio - limit) <= 1e-4 + 0.25 * th**2)
    assert abs(ratio[-1] - limit) > 10 * abs(ratio[0] - limit)


def test_theta_solve_helicoid_report(capsys, tmp_path):
    sol = tmp_path / "hel.csv"
    code, out, _ = run_cli(capsys, "theta-solve", "--boundary", "helicoid:0.5", "--grid-n", 64, "--out", sol)
    assert code == 0
    rep = json.loads(out)
    assert rep["converged"] and rep["weak_residual_max"] <= rep["tol_EL"]
    assert rep["el_residual_nodal_max"] <= rep["el_residual_nodal_bound"]
    g, head = read_solution(sol)
    assert head["config_hash"] == rep["provenance"]["config_hash"]
    assert np.max(np.abs(g.theta - g.grid.z / 0.5)) <= 10 * g.grid.h**2


def test_theta_solve_boundary_file_and_warm_start(capsys, tmp_path):
    z = np.linspace(-1, 1, 401)
    bfile = tmp_path / "bd.csv"
    np.savetxt(bfile, np.column_stack([z, -0.5 * z**2]), delimiter=",", header="z,theta", comments="")
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(capsys, "theta-solve", "--boundary", bfile, "--grid-n", 32, "--out", first)[0] == 0
    code, out, _ = run_cli(capsys, "theta-solve", "--boundary", bfile, "--grid-n", 32, "--init", "file",
                           "--init-file", first, "--out", second)
    assert code == 0 and json.loads(out)["iterations"] == 0
    assert read_solution(first)[0].theta.tolist() == read_solution(second)[0].theta.tolist()


@pytest.mark.parametrize(
    "argv, code",
    [
        (["theta-solve", "--boundary", "helicoid:0.5", "--grid-n", "10", "--out", "{tmp}/x.csv"], 1),
        (["theta-solve", "--boundary", "helicoid:0", "--grid-n", "32", "--out", "{tmp}/x.csv"], 1),
        (["theta-solve", "--boundary", "helicoid:0.005", "--grid-n", "32", "--out", "{tmp}/x.csv"], 1),
        (["theta-solve", "--boundary", "helicoid:0.5", "--grid-n", "32", "--init", "zero", "--tol", "1e-300",
          "--max-iters", "1", "--out", "{tmp}/x.csv"], 2),
        (["theta-solve", "--boundary", "helicoid:0.5", "--grid-n", "32", "--out", "{tmp}/no/x.csv"], 3),
        (["theta-solve", "--boundary", "{tmp}/absent.csv", "--grid-n", "32", "--out", "{tmp}/x.csv"], 3),
        (["calibrate", "--solution", "{tmp}/absent.csv"], 3),
        (["lamination-run", "--target", "0.5", "--grid-n", "32", "--n", "8,4", "--out", "{tmp}/run"], 1),
        (["ribbon", "--theta-waist", "0.8", "--theta-range", "0.1:2:3"], 1),
        (["ribbon", "--theta-waist", "0.8", "--theta-range", "0.1:0.2"], 1),
        (["acrit", "--metric", "spherical"], 1),
        (["nonsense"], 1),
        (["--config", "x"], 1),
    ],
)
def test_exit_codes(capsys, tmp_path, argv, code):
    argv = [a.replace("{tmp}", str(tmp_path)) for a in argv]
    got, _, err = run_cli(capsys, *argv)
    assert got == code
    assert err.startswith("error:")


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("metric = poincare\ngrid_n = 40\ntol_EL = 1e-9\n")
    code, out, _ = run_cli(capsys, "theta-solve", "--config", cfg, "--boundary", "constant:0.3",
                           "--grid-n", 32, "--out", tmp_path / "c.csv")
    assert code == 0
    rep = json.loads(out)
    assert rep["grid_n"] == 32 and rep["metric"] == "poincare" and rep["tol_EL"] == 1e-9
    assert rep["radius"] == pytest.approx(0.99)
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid_n = 64\nwhat = 1\n")
    code, _, err = run_cli(capsys, "theta-solve", "--config", bad, "--boundary", "constant:0", "--out",
                           tmp_path / "d.csv")
    assert code == 1 and "line 2" in err


def test_lamination_run_and_calibrate(capsys, tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        code, _, _ = run_cli(capsys, "lamination-run", "--target", "0.25", "--grid-n", 64, "--n", "4,8",
                             "--out", d)
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert sorted(outs[0]) == ["cross_section.svg", "leaves.json", "solution_n0004.csv", "solution_n0008.csv"]
    doc = json.loads(outs[0]["leaves.json"])
    assert [lf["kind"] for lf in doc["leaves"]] == ["annulus"]
    assert doc["blowup_K"] == [] and doc["target_set"] == "0.25"
    (m,) = doc["minimizers"]
    assert m["surface"] == "Catenoid" and m["leaf"] == 0 and m["distance"] <= 4 * doc["h"]

    rep_path = tmp_path / "report.json"
    sol = tmp_path / "run0" / "solution_n0008.csv"
    code, _, _ = run_cli(capsys, "calibrate", "--solution", sol, "--n-random", 10, "--out", rep_path)
    assert code == 0
    rep = json.loads(rep_path.read_text())
    assert rep["div"]["sup"] > 0 and all(g["passed"] for g in rep["gdt"])
    (c,) = rep["competitors"]
    assert c["a"] == 0.25 and c["matched"] == "Catenoid" and c["is_minimizer"] and c["passed"]
    assert c["n_competitors"] == 3 * 11
    first = rep_path.read_bytes()
    run_cli(capsys, "calibrate", "--solution", sol, "--n-random", 10, "--out", rep_path)
    assert rep_path.read_bytes() == first
    code, _, _ = run_cli(capsys, "calibrate", "--solution", sol, "--checks", "div,bogus")
    assert code == 1
