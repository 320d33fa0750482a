"""End-to-end acceptance checks.

Each test covers one numbered criterion and prints a single PASS/FAIL
line with the measured values (visible under ``pytest -rA``); supporting
value tables are printed above the verdict line where the criterion asks
for logged evidence.
"""

import itertools
import time
import warnings
from dataclasses import fields, replace

import numpy as np
import pytest

from ecopanda.graphnet import (
    complete_graph,
    delta_of_window,
    estimate_joint_spectrum,
    generate_graph_sequence,
    metropolis_weights,
    path_graph,
    static_sequence,
    verify_mixing_matrix,
)
from ecopanda.harness import ExperimentConfig, execute_experiment
from ecopanda.objective import generate_ridge_problem
from ecopanda.solvers import (
    METHODS,
    EcoPandaState,
    PandaState,
    StepParams,
    diging_init,
    diging_step,
    diging_step_agentwise,
    eco_panda_init,
    eco_panda_step,
    eco_panda_step_agentwise,
    panda_init,
    panda_step,
    panda_step_agentwise,
    run_solver,
)
from ecopanda.solvers import StateHistory
from ecopanda.theory import (
    fit_empirical_rate,
    rate_bound,
    small_gain_sequences,
    theorem_constants,
)


def report(num, ok, detail):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """The reference experiment at its published parameters, timed."""
    cfg = replace(ExperimentConfig(), output_dir=str(tmp_path_factory.mktemp("default")))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        start = time.perf_counter()
        result = execute_experiment(cfg)
        elapsed = time.perf_counter() - start
    return result, elapsed


@pytest.fixture(scope="module")
def default_inputs():
    """Problem and graph sequence exactly as the default experiment sees them."""
    cfg = ExperimentConfig()
    obj = generate_ridge_problem(cfg.n, cfg.p, cfg.d, cfg.r, cfg.seed_problem)
    seq = generate_graph_sequence(cfg.n, cfg.pi, cfg.horizon, cfg.seed_graphs)
    return cfg, obj, seq


def test_criterion_1_reference_reproduction(default_run):
    result, elapsed = default_run
    problems = []
    notes = []
    by_method = {t.method: t for t in result.traces}

    for method in METHODS:
        rel = by_method[method].relative_residual
        lam, r2 = fit_empirical_rate(rel)
        piece = f"{method} tail fit lambda={lam:.6f} R^2={r2:.3f}"
        if not (lam < 1.0 and r2 >= 0.9):
            problems.append(piece)
        else:
            notes.append(piece + " ok")

    eco_final = by_method["eco_panda"].relative_residual[-1]
    panda_final = by_method["panda"].relative_residual[-1]
    piece = f"panda final {panda_final:.2e} <= eco_panda final {eco_final:.2e}"
    (notes if panda_final <= eco_final else problems).append(piece)

    piece = f"runtime {elapsed:.1f}s <= 60s"
    (notes if elapsed <= 60.0 else problems).append(piece)

    detail = "; ".join(notes)
    if problems:
        detail = ("; ".join(problems)
                  + ": eco_panda and panda reach the ~1e-14 relative rounding floor "
                    "thousands of iterations before the tail third begins, so the "
                    "fitted tail is flat noise rather than geometric decay; "
                  + "; ".join(notes))
    report(1, not problems, detail)


def test_criterion_2_communication_halving(default_run):
    result, _ = default_run
    by_method = {t.method: t for t in result.traces}
    eco = by_method["eco_panda"].scalars_sent
    diging = by_method["diging"].scalars_sent
    exact = np.array_equal(diging, 2 * eco)
    ratio = diging[1:] / eco[1:]
    report(2, exact, f"scalars_sent(diging) = 2 x scalars_sent(eco_panda) exactly at "
                     f"all {len(eco)} recorded iterations (ratio range "
                     f"[{ratio.min():.3f}, {ratio.max():.3f}])")


def test_criterion_3_constants_sweep():
    mu = 1.0
    violations = []
    ok = True
    count = 0
    for kappa, delta, b in itertools.product((1.1, 2.0, 10.0, 100.0),
                                             (0.0, 0.3, 0.9), (1, 3, 10)):
        count += 1
        L = kappa * mu
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            tc = theorem_constants(mu, L, b, delta)
        finite = all(
            np.isfinite(getattr(tc, f.name))
            for f in fields(tc) if isinstance(getattr(tc, f.name), float))
        ok &= finite and tc.alpha < 1.0
        for frac in (0.1, 0.5, 0.9):
            ok &= 0.0 < rate_bound(tc, frac * tc.c_max) < 1.0
        if not (0.0 < tc.cbar < tc.c_max):
            violations.append(
                f"  kappa={kappa:g} delta={delta:g} B={b}: printed cbar={tc.cbar:.6g} "
                f"c_max={tc.c_max:.6g} lambda_cbar^B={tc.lambda_cbar_b:.6g}; "
                f"crossing-derived cbar={tc.cbar_knee:.6g} "
                f"lambda^B={tc.lambda_knee_b:.6g}")
            # The documented-typo fallback: the branch-crossing companions
            # must land inside the ranges the printed forms miss.
            ok &= 0.0 < tc.cbar_knee < tc.c_max
            ok &= delta < tc.lambda_knee_b < 1.0
            ok &= tc.branch_gap_at_knee <= 1e-9

    if violations:
        print(f"printed cbar outside (0, c_max) in {len(violations)}/{count} sweep cases "
              "(documented formula inconsistency); logged values:")
        for line in violations:
            print(line)
    detail = (f"all constants finite, alpha < 1, and lambda(c) < 1 at "
              f"{{0.1, 0.5, 0.9}} c_max over {count} sweep cases; printed cbar "
              f"missed (0, c_max) in {len(violations)} cases where the "
              f"branch-crossing value is admissible (formula inconsistency "
              f"logged above)")
    report(3, ok, detail)


def test_criterion_4_rate_bound_consistency():
    obj = generate_ridge_problem(10, 3, 5, 1.0, seed=0)
    mu, L = obj.conditioning()
    g = complete_graph(10)
    w = metropolis_weights(g)
    delta = estimate_joint_spectrum([w], 1).delta
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tc = theorem_constants(mu, L, 1, delta, eta=4 * L)
    c = 0.5 * tc.c_max
    bound = rate_bound(tc, c)
    trace, _ = run_solver("eco_panda", obj, static_sequence(g, 4000),
                          StepParams(c=c, eta=4 * L), 4000)
    lam, r2 = fit_empirical_rate(trace.relative_residual)
    ok = lam <= bound + 0.01
    report(4, ok, f"static complete graph on 10 agents (B=1, delta={delta:.6f}): "
                  f"lambda_emp={lam:.6f} (R^2={r2:.4f}) <= rate bound {bound:.6f} + 0.01")


def test_criterion_5_oracle_equivalences():
    problems = []

    # (a) A single agent reduces to plain gradient descent.
    obj = generate_ridge_problem(1, 2, 4, 1.0, seed=3)
    eta = 4 * obj.L
    _, hist = run_solver("eco_panda", obj, static_sequence(complete_graph(1), 100),
                         StepParams(c=0.01, eta=eta), 100, record_states=True)
    x = np.zeros(2)
    worst = 0.0
    for k in range(101):
        worst = max(worst, float(np.linalg.norm(hist.xs[k][0] - x)))
        x = x - (obj.q[0] @ x - obj.htb[0]) / eta
    if worst > 1e-10:
        problems.append(f"single-agent gradient-descent deviation {worst:.2e} > 1e-10")
    a_note = f"single-agent vs gradient descent {worst:.1e}"

    # (b) Per-agent and stacked updates coincide.
    obj = generate_ridge_problem(5, 2, 3, 1.0, seed=6)
    params = StepParams(c=0.02, eta=4 * obj.L, c_panda=0.02, alpha_diging=0.02)
    seq = generate_graph_sequence(5, 0.5, 100, seed=61)
    x0 = np.random.default_rng(6).normal(size=(5, 2))
    worst = 0.0
    for stacked_step, agent_step, state in (
            (eco_panda_step, eco_panda_step_agentwise, eco_panda_init(obj, x0)),
            (panda_step, panda_step_agentwise, panda_init(obj, x0)),
            (diging_step, diging_step_agentwise, diging_init(obj, x0))):
        stacked = agentwise = state
        for k in range(100):
            g = seq.graphs[k]
            w = metropolis_weights(g)
            stacked = stacked_step(stacked, obj, w, params)
            agentwise = agent_step(agentwise, obj, g, w, params)
            for field in ("x", "z", "y", "v"):
                if hasattr(stacked, field):
                    worst = max(worst, float(np.abs(
                        getattr(agentwise, field) - getattr(stacked, field)).max()))
    if worst > 1e-12:
        problems.append(f"per-agent vs stacked deviation {worst:.2e} > 1e-12")
    b_note = f"per-agent vs stacked {worst:.1e}"

    # (c) The inner solve inverts the gradient map.
    obj = generate_ridge_problem(5, 3, 4, 0.5, seed=8)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        y = rng.normal(size=(5, 3))
        worst = max(worst, float(np.abs(obj.gradient(obj.conjugate_argmin(y)) - y).max()))
    if worst > 1e-10:
        problems.append(f"conjugate-gradient inversion error {worst:.2e} > 1e-10")
    c_note = f"inner-solve inversion {worst:.1e}"

    # (d) The consensus optimum with the dual optimum is a fixed point.
    obj = generate_ridge_problem(6, 3, 4, 0.9, seed=11)
    xbar, _ = obj.centralized_solve()
    xstar = obj.stack(xbar)
    ystar = obj.dual_optimum()
    w = metropolis_weights(complete_graph(6))
    params = StepParams(c=0.05, eta=4 * obj.L, c_panda=0.05)
    worst = 0.0
    s = EcoPandaState(x=xstar, z=xstar.copy(), y=ystar)
    s = eco_panda_step(s, obj, w, params)
    worst = max(worst, float(np.linalg.norm(s.x - xstar)),
                float(np.linalg.norm(s.z - xstar)), float(np.linalg.norm(s.y - ystar)))
    s = PandaState(x=xstar, z=xstar.copy(), y=ystar)
    s = panda_step(s, obj, w, params)
    worst = max(worst, float(np.linalg.norm(s.x - xstar)),
                float(np.linalg.norm(s.z - xstar)), float(np.linalg.norm(s.y - ystar)))
    if worst > 1e-10:
        problems.append(f"fixed-point drift {worst:.2e} > 1e-10")
    d_note = f"fixed-point drift {worst:.1e}"

    report(5, not problems,
           "; ".join(problems) if problems else
           f"{a_note}; {b_note}; {c_note}; {d_note}")


def test_criterion_6_structural_invariants(default_inputs):
    cfg, obj, seq = default_inputs
    problems = []

    worst_stoch = 0.0
    for g in seq.graphs:
        rep = verify_mixing_matrix(metropolis_weights(g), g)
        worst_stoch = max(worst_stoch, rep.stochasticity_violation)
        if not rep.passed:
            problems.append(f"mixing matrix violation {rep.stochasticity_violation:.2e}")
            break
    if worst_stoch > 1e-12:
        problems.append(f"stochasticity violation {worst_stoch:.2e} > 1e-12")

    params = StepParams(c=cfg.c_eco, eta=cfg.eta_eco, c_panda=cfg.c_panda)
    worst_mean = 0.0
    for method in ("eco_panda", "panda"):
        _, hist = run_solver(method, obj, seq, params, cfg.iters, record_states=True)
        worst_mean = max(
            worst_mean,
            float(np.abs(hist.zs.mean(axis=1) - hist.xs.mean(axis=1)).max()),
            float(np.abs(hist.ys.mean(axis=1)).max()))
    if worst_mean > 1e-10:
        problems.append(f"mean-tracking drift {worst_mean:.2e} > 1e-10")

    path_delta = delta_of_window(metropolis_weights(path_graph(3)))
    k3_delta = delta_of_window(metropolis_weights(complete_graph(3), lazy=True))
    if abs(path_delta - 0.5) > 1e-12:
        problems.append(f"path-graph delta {path_delta} != 0.5")
    if k3_delta > 1e-12:
        problems.append(f"uniform complete-triangle delta {k3_delta:.2e} > 0")

    report(6, not problems,
           "; ".join(problems) if problems else
           f"stochasticity violation {worst_stoch:.1e} over {seq.horizon} rounds; "
           f"mean-tracking/zero-mean-dual drift {worst_mean:.1e} over full runs; "
           f"path delta = 0.5 and uniform-triangle delta = 0 within 1e-12")


def test_criterion_7_diagnostics(default_inputs):
    _, obj0, _ = default_inputs
    problems = []

    xbar, _ = obj0.centralized_solve()
    xstar = obj0.stack(xbar)
    ystar = obj0.dual_optimum()
    t = 6
    series = small_gain_sequences(
        StateHistory(xs=np.tile(xstar, (t, 1, 1)), zs=np.tile(xstar, (t, 1, 1)),
                     ys=np.tile(ystar, (t, 1, 1))), obj0, ystar)
    worst_opt = max(float(np.abs(col).max()) for col in series.as_columns().values())
    if worst_opt > 1e-10:
        problems.append(f"optimum-state diagnostics {worst_opt:.2e} > 1e-10")

    mu, L = obj0.conditioning()
    g = complete_graph(10)
    delta = estimate_joint_spectrum([metropolis_weights(g)], 1).delta
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tc = theorem_constants(mu, L, 1, delta, eta=4 * L)
    _, hist = run_solver("eco_panda", obj0, static_sequence(g, 4000),
                         StepParams(c=0.5 * tc.c_max, eta=4 * L), 4000,
                         record_states=True)
    series = small_gain_sequences(hist, obj0, ystar)
    lams = {}
    for name, col in series.as_columns().items():
        lam, _ = fit_empirical_rate(col)
        lams[name] = lam
        if not lam < 1.0:
            problems.append(f"{name} tail fit lambda={lam:.6f} >= 1")

    report(7, not problems,
           "; ".join(problems) if problems else
           f"all eight sequences <= {worst_opt:.1e} at the optimum and contract on a "
           f"converging run (lambda in [{min(lams.values()):.6f}, {max(lams.values()):.6f}])")


def test_criterion_8_determinism(tmp_path):
    cfg = replace(ExperimentConfig(), horizon=2000, iters=2000,
                  output_dir=str(tmp_path / "out"))
    names = [f"trace_{m}.csv" for m in cfg.methods]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        execute_experiment(cfg)
        first = {name: (tmp_path / "out" / name).read_bytes() for name in names}
        execute_experiment(cfg)
    same = all((tmp_path / "out" / name).read_bytes() == first[name] for name in names)
    total = sum(len(first[name]) for name in names)
    report(8, same, f"two runs of the same config wrote byte-identical CSVs "
                    f"({len(names)} files, {total} bytes compared)")
