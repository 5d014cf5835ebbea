"""The space-time interface operator, its derivative, the preconditioner and
the outer Newton-GMRES loop on small problems."""
import numpy as np
import pytest

from conftest import small_problem
from stokes_darcy_dd.interface import (CoupledProblem, OuterConfig, apply_preconditioner,
                                       apply_Psi_prime, evaluate_Psi, newton_solve)
from stokes_darcy_dd.mesh import build_rectangle_mesh
from stokes_darcy_dd.subdomain import ProblemData
from stokes_darcy_dd.timegrid import PiecewiseConstantTimeField, uniform_grid
from stokes_darcy_dd.viscosity import CrossModelParams


def _field(pb, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return PiecewiseConstantTimeField(pb.grid_f, scale * rng.normal(size=(pb.grid_f.n,
                                                                          pb.n_multiplier)))


def _norm(f):
    return float(np.linalg.norm(f.values))


def _equilibrium(closed, r, c=0.7, dt_p=0.25):
    visc = CrossModelParams(0.5, 1.5, 1.0, r)
    data = ProblemData(fluid=visc, porous=visc, eta=10.0, u_f0=0.0, p_p0=c,
                       porous_pressure_sides={"bottom": c},
                       fluid_pressure_sides={} if closed else {"top": c})
    mf = build_rectangle_mesh((0, 1, 1, 2), 4, 4, "fluid", "bottom")
    mp = build_rectangle_mesh((0, 1, 0, 1), 4, 4, "porous", "top")
    return CoupledProblem(mf, mp, data, uniform_grid(1.0, 4), uniform_grid(1.0, round(1 / dt_p)))


@pytest.mark.parametrize("closed", [True, False])
@pytest.mark.parametrize("r", [2.0, 1.35])
def test_constant_pressure_equilibrium(closed, r):
    pb = _equilibrium(closed, r)
    lam = PiecewiseConstantTimeField.constant(pb.grid_f, np.full(pb.n_multiplier, 0.7))
    base = evaluate_Psi(pb, lam)
    assert _norm(base.residual) <= 1e-12
    for traj in (base.stokes, base.darcy):
        for m in range(traj.grid.n):
            assert np.abs(traj.velocity(m)).max() <= 1e-12


def test_equilibrium_on_nonconforming_grids():
    pb = _equilibrium(False, 1.35, dt_p=0.5)
    lam = PiecewiseConstantTimeField.constant(pb.grid_f, np.full(pb.n_multiplier, 0.7))
    assert _norm(evaluate_Psi(pb, lam).residual) <= 1e-12


def test_affine_identity_for_linear_viscosity():
    pb, _ = small_problem(r=2.0)
    lam = _field(pb, 0)
    base = evaluate_Psi(pb, lam)
    for seed in range(1, 4):
        h = _field(pb, seed)
        jh = apply_Psi_prime(base, h)
        diff = evaluate_Psi(pb, lam + h).residual - base.residual
        assert _norm(diff - jh) <= 1e-8 * _norm(jh)


def test_jacobian_is_linear():
    pb, _ = small_problem(r=1.5)
    base = evaluate_Psi(pb, _field(pb, 0))
    a, b = _field(pb, 1), _field(pb, 2)
    lhs = apply_Psi_prime(base, a * 0.5 + b * 2.0)
    rhs = apply_Psi_prime(base, a) * 0.5 + apply_Psi_prime(base, b) * 2.0
    assert _norm(lhs - rhs) <= 1e-10 * _norm(lhs)


def test_jacobian_eps_ratio_nonlinear():
    pb, _ = small_problem(r=1.5)
    lam = _field(pb, 3, scale=3.0)
    h = _field(pb, 4, scale=3.0)
    base = evaluate_Psi(pb, lam)
    jh = apply_Psi_prime(base, h)
    errs = [_norm(evaluate_Psi(pb, lam + h * e).residual - base.residual - jh * e)
            for e in (1e-2, 5e-3, 2.5e-3)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(3.3 < q < 4.7 for q in ratios), ratios


def test_preconditioner_inverts_stokes_part_modulo_constants():
    pb, _ = small_problem(r=1.5, T=0.03)
    base = evaluate_Psi(pb, pb.zero_field())
    h = _field(pb, 5)
    wf = pb.stokes.solve_linearized(base.stokes, h)
    stokes_only = pb._collect([pb.stokes.flux(x) for x in wf.states],
                              np.zeros((pb.grid_p.n, pb.n_multiplier)))
    back = apply_preconditioner(base, stokes_only)
    d = back.values - h.values
    # the closed fluid box cannot see slab-wise constants
    np.testing.assert_allclose(d - d.mean(axis=1, keepdims=True), 0.0, atol=1e-8 * np.abs(h.values).max())


def test_preconditioner_is_linear():
    pb, _ = small_problem(r=1.5)
    base = evaluate_Psi(pb, pb.zero_field())
    a, b = _field(pb, 6), _field(pb, 7)
    lhs = apply_preconditioner(base, a + b * 3.0)
    rhs = apply_preconditioner(base, a) + apply_preconditioner(base, b) * 3.0
    assert _norm(lhs - rhs) <= 1e-9 * _norm(lhs)


def test_one_newton_step_solves_linear_problem():
    pb, _ = small_problem(r=2.0)
    cfg = OuterConfig(newton_maxit=1, gmres_tol=1e-9, gmres_maxit=200)
    res = newton_solve(pb, config=cfg)
    assert res.iterations[0].gmres_converged
    final = _norm(res.final.residual)
    assert final <= 10 * cfg.gmres_tol * res.initial_residual_norm


def test_newton_converges_quadratically_for_nonlinear_problem():
    pb, _ = small_problem(r=1.5)
    res = newton_solve(pb, config=OuterConfig(newton_maxit=6, newton_tol=1e-10, gmres_tol=1e-11,
                                              gmres_maxit=200))
    assert res.converged
    h = [it.h_norm for it in res.iterations]
    assert len(h) >= 3 and h[2] < 10 * h[1] ** 2 / h[0]


def test_preconditioned_and_plain_newton_agree():
    pb, _ = small_problem(r=1.5)
    cfg = OuterConfig(newton_maxit=4, newton_tol=1e-10, gmres_tol=1e-11, gmres_maxit=200)
    a = newton_solve(pb, config=cfg)
    b = newton_solve(pb, config=OuterConfig(**{**cfg.__dict__, "precondition": True}))
    assert _norm(a.lam - b.lam) <= 1e-7 * _norm(a.lam)


def test_nonconforming_run_conserves_mass():
    pb, _ = small_problem(r=1.5, T=0.04, dt_f=0.02, dt_p=0.01)
    res = newton_solve(pb, config=OuterConfig(newton_maxit=5, gmres_tol=1e-10, gmres_maxit=200))
    defect = np.abs(res.final.residual.values).max()
    assert defect <= 10 * 1e-10 * res.initial_residual_norm


def test_parallel_matches_serial():
    pb1, _ = small_problem(r=1.5)
    pb2, _ = small_problem(r=1.5, parallel=True)
    lam = _field(pb1, 8)
    a = evaluate_Psi(pb1, lam).residual
    b = evaluate_Psi(pb2, lam).residual
    pb2.close()
    np.testing.assert_array_equal(a.values, b.values)


def test_closed_box_with_finer_fluid_grid_is_rejected():
    with pytest.raises(ValueError, match="singular"):
        small_problem(dt_f=0.005, dt_p=0.01)
    small_problem(dt_f=0.01, dt_p=0.005)  # porous finer is fine


def test_mismatched_horizons_are_rejected():
    mf = build_rectangle_mesh((0, 1, 1, 2), 2, 2, "fluid", "bottom")
    mp = build_rectangle_mesh((0, 1, 0, 1), 2, 2, "porous", "top")
    with pytest.raises(ValueError, match="final time"):
        CoupledProblem(mf, mp, ProblemData(), uniform_grid(1.0, 2), uniform_grid(2.0, 2))


def test_lambda_grid_is_checked():
    pb, _ = small_problem()
    with pytest.raises(ValueError):
        evaluate_Psi(pb, PiecewiseConstantTimeField.zeros(uniform_grid(pb.grid_f.T, 7), pb.n_multiplier))


@pytest.mark.parametrize("bad", [dict(newton_tol=0.0), dict(gmres_maxit=0)])
def test_outer_config_validation(bad):
    with pytest.raises(ValueError):
        OuterConfig(**bad)


def test_history_csv(tmp_path):
    pb, _ = small_problem(r=2.0)
    res = newton_solve(pb, config=OuterConfig(gmres_tol=1e-8))
    path = tmp_path / "h.csv"
    res.write_history_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "newton_iteration,gmres_iteration,relative_residual"
    assert len(lines) == 1 + res.iterations[0].gmres_iterations + 1


def _lam_field(pb, seed):
    rng = np.random.default_rng(seed)
    g = pb.grid_lambda
    return PiecewiseConstantTimeField(g, rng.normal(size=(g.n, pb.n_multiplier)))


def test_porous_multiplier_grid_matches_fluid_on_conforming_grids():
    a, _ = small_problem(r=1.5)
    b, _ = small_problem(r=1.5, multiplier_grid="porous")
    lam = _field(a, 11)
    np.testing.assert_allclose(evaluate_Psi(b, lam).residual.values,
                               evaluate_Psi(a, lam).residual.values, rtol=0, atol=1e-13)


def test_porous_multiplier_grid_affine_identity():
    pb, _ = small_problem(r=2.0, T=0.04, dt_f=0.02, dt_p=0.01, multiplier_grid="porous")
    assert pb.grid_lambda is pb.grid_p
    lam = _lam_field(pb, 0)
    base = evaluate_Psi(pb, lam)
    assert base.residual.grid is pb.grid_p
    h = _lam_field(pb, 1)
    diff = evaluate_Psi(pb, lam + h).residual - base.residual
    jh = apply_Psi_prime(base, h)
    assert _norm(diff - jh) <= 1e-9 * _norm(jh)


def test_porous_multiplier_grid_newton_converges():
    pb, _ = small_problem(r=1.5, T=0.04, dt_f=0.02, dt_p=0.01, multiplier_grid="porous")
    res = newton_solve(pb, config=OuterConfig(newton_maxit=5, gmres_tol=1e-10, gmres_maxit=200))
    assert res.converged
    assert res.lam.grid is pb.grid_p


def test_porous_multiplier_grid_has_no_preconditioner():
    pb, _ = small_problem(multiplier_grid="porous")
    base = evaluate_Psi(pb, pb.zero_field())
    with pytest.raises(NotImplementedError):
        apply_preconditioner(base, pb.zero_field())


def test_porous_multiplier_grid_allows_finer_fluid_grid_in_closed_box():
    small_problem(dt_f=0.005, dt_p=0.01, multiplier_grid="porous")


def test_unknown_multiplier_grid_is_rejected():
    with pytest.raises(ValueError):
        small_problem(multiplier_grid="both")
