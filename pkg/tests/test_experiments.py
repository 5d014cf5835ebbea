"""Manufactured data, error norms, configuration files and CSV output."""
import csv
import dataclasses

import numpy as np
import pytest

from conftest import small_problem
from stokes_darcy_dd.assembly import TaylorHoodAssembler
from stokes_darcy_dd.experiments.config import (ConfigError, defaults, parse_config,
                                                parse_config_text, steps_in_T)
from stokes_darcy_dd.experiments.drivers import CSV_COLUMNS, add_orders, write_csv
from stokes_darcy_dd.experiments.manufactured import exact_lambda, manufactured_case1
from stokes_darcy_dd.experiments.norms import (ReferenceSolution, error_norms, fluid_errors,
                                               porous_errors)
from stokes_darcy_dd.experiments.pressure_drop import pressure_drop_case
from stokes_darcy_dd.interface import OuterConfig, newton_solve
from stokes_darcy_dd.mesh import build_rectangle_mesh
from stokes_darcy_dd.timegrid import uniform_grid

E = np.exp(1.0)


# -------------------------------------------------------- manufactured data
def test_fluid_velocity_hand_value():
    exact, _ = manufactured_case1()
    ux, uy = exact.u_f(np.array([1.0]), np.array([1.0]), 0.0)
    assert ux[0] == 0.0
    assert uy[0] == pytest.approx(-np.cos(1.0) * E, rel=1e-15)
    assert uy[0] == pytest.approx(-1.468693939915885, rel=1e-14)


def test_time_factor():
    exact, _ = manufactured_case1()
    a = exact.p_p(np.array([0.3]), np.array([0.6]), 0.0)
    b = exact.p_p(np.array([0.3]), np.array([0.6]), 2.0)
    assert b[0] == pytest.approx(5.0 * a[0], rel=1e-14)


def test_porous_velocity_is_solenoidal():
    exact, _ = manufactured_case1()
    rng = np.random.default_rng(0)
    x, y = rng.uniform(size=(2, 50))
    np.testing.assert_allclose(exact.div_u_p(x, y, 0.7), 0.0, atol=1e-13)
    # finite-difference cross-check of the closed form
    d = 1e-6
    fd = ((exact.u_p(x + d, y, 0.7)[0] - exact.u_p(x - d, y, 0.7)[0])
          + (exact.u_p(x, y + d, 0.7)[1] - exact.u_p(x, y - d, 0.7)[1])) / (2 * d)
    np.testing.assert_allclose(fd, 0.0, atol=1e-7)


def test_normal_velocity_is_continuous_on_the_interface():
    exact, _ = manufactured_case1()
    x = np.linspace(0, 1, 11)
    y = np.ones_like(x)
    for t in (0.0, 0.5):
        np.testing.assert_allclose(exact.u_f(x, y, t)[1], exact.u_p(x, y, t)[1], atol=1e-14)


def test_exact_lambda_is_porous_pressure_trace():
    exact, _ = manufactured_case1()
    grid = uniform_grid(0.2, 2)
    xs = np.array([0.0, 0.5, 1.0])
    lam = exact_lambda(exact, xs, grid)
    assert lam.shape == (2, 3)
    np.testing.assert_allclose(lam[1], exact.p_p(xs, np.ones(3), 0.2))


def test_sources_vanish_in_the_continuity_equation():
    # u_f is not solenoidal here (d/dx of x^3 (y-1)^2 is not cancelled), so
    # the mass source must match div u_f
    exact, data = manufactured_case1()
    x, y = np.random.default_rng(1).uniform(size=(2, 20))
    y = y + 1.0
    d = 1e-6
    div = ((exact.u_f(x + d, y, 0.3)[0] - exact.u_f(x - d, y, 0.3)[0])
           + (exact.u_f(x, y + d, 0.3)[1] - exact.u_f(x, y - d, 0.3)[1])) / (2 * d)
    np.testing.assert_allclose(data.mass_source(x, y, 0.3), div, rtol=1e-6, atol=1e-8)


def test_pressure_drop_data():
    data = pressure_drop_case()
    assert data.fluid_pressure_sides == {"top": 1.0}
    assert data.porous_pressure_sides == {"bottom": 0.0}
    assert data.fluid.r == 1.35 and data.porous.nu_0 == 10.0
    d = pressure_drop_case(discontinuous=True)
    assert (d.fluid.nu_inf, d.fluid.nu_0, d.porous.K) == (0.5, 1.0, 0.001)


# ------------------------------------------------------------------ norms
def _interpolant(asm, exact, t, which):
    if which == "fluid":
        return np.concatenate([asm.interpolate_velocity(exact.u_f, t),
                               asm.interpolate_pressure(exact.p_f, t)])
    return np.concatenate([asm.interpolate_velocity(exact.u_p, t),
                           asm.interpolate_pressure(exact.p_p, t)])


def _asm(n, which):
    if which == "fluid":
        return TaylorHoodAssembler(build_rectangle_mesh((0, 1, 1, 2), n, n, "fluid", "bottom"))
    return TaylorHoodAssembler(build_rectangle_mesh((0, 1, 0, 1), n, n, "porous", "top"))


def test_constant_pressure_offset_is_measured_exactly():
    exact, _ = manufactured_case1()
    asm = _asm(8, "fluid")
    x = _interpolant(asm, exact, 0.1, "fluid")
    base = fluid_errors(asm, x, exact, 0.1)["p_f_L2"]
    x[asm.dofs.n_velocity:] += 0.25
    shifted = fluid_errors(asm, x, exact, 0.1)["p_f_L2"]
    assert abs(shifted - 0.25) <= base + 1e-12


def test_interpolation_orders():
    exact, _ = manufactured_case1()
    errs = []
    for n in (4, 8, 16):
        asm = _asm(n, "fluid")
        errs.append(fluid_errors(asm, _interpolant(asm, exact, 0.0, "fluid"), exact, 0.0))
    l2 = np.log2(errs[1]["u_f_L2"] / errs[2]["u_f_L2"])
    h1 = np.log2(errs[1]["u_f_H1semi"] / errs[2]["u_f_H1semi"])
    p = np.log2(errs[1]["p_f_L2"] / errs[2]["p_f_L2"])
    assert 2.8 < l2 < 3.2 and 1.8 < h1 < 2.2 and 1.8 < p < 2.2


def test_porous_interpolant_orders():
    exact, _ = manufactured_case1()
    e = [porous_errors(a, _interpolant(a, exact, 0.0, "porous"), exact, 0.0)
         for a in (_asm(8, "porous"), _asm(16, "porous"))]
    assert 2.8 < np.log2(e[0]["u_p_L2"] / e[1]["u_p_L2"]) < 3.2
    assert 1.8 < np.log2(e[0]["u_p_Hdiv"] / e[1]["u_p_Hdiv"]) < 2.2
    assert 1.8 < np.log2(e[0]["p_p_L2"] / e[1]["p_p_L2"]) < 2.2
    assert e[0]["u_p_Hdiv"] >= e[0]["u_p_L2"]


def test_reference_solution_reproduces_itself():
    exact, _ = manufactured_case1()
    af, ap = _asm(4, "fluid"), _asm(4, "porous")
    xf, xp = _interpolant(af, exact, 0.0, "fluid"), _interpolant(ap, exact, 0.0, "porous")
    ref = ReferenceSolution(af, xf, ap, xp)
    assert max(fluid_errors(af, xf, ref, 0.0).values()) < 1e-12
    assert max(porous_errors(ap, xp, ref, 0.0).values()) < 1e-12


def test_error_norms_requires_a_breakpoint():
    pb, exact = small_problem(r=2.0)
    res = newton_solve(pb, config=OuterConfig(gmres_tol=1e-9))
    e = error_norms(res.final.stokes, exact, 0.02)
    assert e["u_f_L2"] < 1e-2
    with pytest.raises(ValueError):
        error_norms(res.final.darcy, exact, 0.015)


# ------------------------------------------------------------- configuration
MINIMAL = """
[case]
test_case = 1
"""


def test_minimal_file_gives_first_case_constants(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(MINIMAL)
    cfg = parse_config(path)
    assert cfg.fluid.nu_inf == 0.5 and cfg.porous.nu_inf == 0.5
    assert (cfg.fluid.nu_0, cfg.fluid.K, cfg.kappa, cfg.S_p, cfg.alpha_bjs) == (1.5, 1.0, 1.0, 1.0, 1.0)
    assert (cfg.T, cfg.dt_f, cfg.dt_p) == (0.01, 0.002, 0.001)
    assert cfg.c_bjs == 1.0


def test_second_case_defaults():
    cfg = parse_config_text("[case]\ntest_case = 2\n")
    assert cfg.T == 1.0 and cfg.fluid.r == 1.35 and cfg.fluid.nu_0 == 10.0 and cfg.eta == 0.0


def test_full_file_round_trip():
    text = """
# comment
[case]
test_case = 1
experiment = convergence-space
[mesh]
resolutions = 4, 8
[time]
T = 0.02
dt_f = 0.01   # trailing comment
dt_p = 0.005
[fluid]
r = 1.5
[porous]
r = 1.5
kappa = 0.5
[solver]
precond = on
newton_maxit = 3
gmres_tol = 1e-9
[output]
dir = out
vtk = yes
"""
    cfg = parse_config_text(text)
    assert cfg.resolutions == (4, 8) and cfg.experiment == "convergence-space"
    assert cfg.fluid.r == 1.5 and cfg.kappa == 0.5
    assert cfg.outer.precondition and cfg.outer.newton_maxit == 3 and cfg.outer.gmres_tol == 1e-9
    assert cfg.out_dir == "out" and cfg.vtk
    assert cfg.c_bjs == pytest.approx(2 ** 0.5)


@pytest.mark.parametrize("text,line,match", [
    ("[time]\ndt_f = -0.1\n", 2, "positive"),
    ("[case]\ntest_case = 1\n[fluid]\nnu_infinity = 1\n", 4, "unknown key"),
    ("[bogus]\n", 1, "unknown section"),
    ("x = 1\n", 1, "outside"),
    ("[time]\nT 1\n", 2, "key = value"),
    ("[mesh]\nresolutions = a b\n", 2, "resolutions"),
    ("[output]\nvtk = maybe\n", 2, "true/false"),
])
def test_line_numbered_errors(text, line, match):
    with pytest.raises(ConfigError, match=match) as info:
        parse_config_text(text, "f.cfg")
    assert info.value.line == line
    assert f"f.cfg:{line}:" in str(info.value)


def test_non_dividing_step_is_rejected():
    with pytest.raises(ConfigError, match="does not divide"):
        parse_config_text("[time]\nT = 0.01\ndt_f = 0.003\n")


def test_steps_in_T():
    assert steps_in_T(1.0, 0.125) == 8
    assert steps_in_T(0.01, 0.001) == 10
    with pytest.raises(ConfigError):
        steps_in_T(1.0, 0.3)


def test_domain_consistency_is_checked():
    with pytest.raises(ConfigError, match="on top"):
        parse_config_text("[case]\ntest_case = 2\n[geometry]\nfluid_domain = 0 1 1.5 2\n")


# ---------------------------------------------------------------- CSV output
def test_orders_and_csv(tmp_path):
    rows = [{"grid_type": "a", "h": 0.25, "u_f_L2": 8e-3, "wall_seconds": 1.0},
            {"grid_type": "a", "h": 0.125, "u_f_L2": 1e-3, "wall_seconds": 2.0},
            {"grid_type": "b", "h": 0.125, "u_f_L2": 5e-3}]
    add_orders(rows, ("grid_type",))
    assert rows[1]["order_u_f_L2"] == pytest.approx(3.0)
    assert "order_u_f_L2" not in rows[0] and "order_u_f_L2" not in rows[2]
    path = tmp_path / "sub" / "t.csv"
    write_csv(rows, path)
    with open(path, encoding="utf-8") as fh:
        got = list(csv.DictReader(fh))
    assert tuple(got[0].keys()) == CSV_COLUMNS
    assert got[1]["u_f_L2"] == "1.000000e-03" and got[1]["h"] == "0.125"
    assert got[1]["order_u_f_L2"] == "3.000000e+00"
    assert got[0]["p_f_L2"] == ""


def test_multiplier_grid_option():
    assert parse_config_text("").multiplier_grid == "fluid"
    cfg = parse_config_text("[interface]\nmultiplier_grid = porous\n")
    assert cfg.multiplier_grid == "porous"
    with pytest.raises(ConfigError, match="multiplier_grid"):
        parse_config_text("[interface]\nmultiplier_grid = both\n")
    with pytest.raises(ConfigError, match="preconditioner"):
        parse_config_text("[interface]\nmultiplier_grid = porous\n[solver]\nprecond = on\n")
