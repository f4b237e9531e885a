"""Scenario pipelines: each writes its artifacts and returns checked invariants."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .algebra import (Observable, SeparableKernel, StateFunctional, compose, make_identity, normalized, op_trace,
                      pair, random_hermitian_blocks, random_observable, validate)
from .classical import (FlowSpec, canonical_from_microcanonical, classical_thermal_functional,
                        equidistribution_test, ergodic_average_check, occupancy_check, resonance_warnings)
from .config import Scenario
from .errors import InfeasibleTarget
from .evolution import decoherence_curve, evolve, gaussian_coherence_state
from .localization import VolumeTrack, identity_flow, localization_verdict, shear_flow, track_volumes
from .pointer import commutator_mean_residual, diagonalize_sections, off_diagonal_residual, pointer_observables
from .spectral import CscoSpec, build_grid
from .thermal import (ThermalParams, build_kms_state, canonical_density, cauchy_riemann_defect,
                      constrained_competitors, cr_halving_ratio, dlogz_dbeta, kms_correlators, log_partition,
                      mean_energy, shannon_entropy, solve_thermal_params, strip_lattice, thermal_functional,
                      verify_kms)
from .wigner import (ClassicalModel, CorrespondenceModel, adapted_grid, classical_mean, correspondence_suite,
                     make_phase_grid, mean_correspondence_gap, moment_check, oscillator_state, pure_state,
                     quantum_thermal_mean, shell_density, weyl_quantize, wigner_transform)


class InvariantViolation(RuntimeError):
    pass


@dataclass
class Checks:
    """Named invariant residuals; each name may be recorded once."""

    items: dict = field(default_factory=dict)
    prefix: str = ""

    def add(self, name, value, ok, tol=None, hard=True, note=None):
        key = self.prefix + name
        if key in self.items:
            raise KeyError(f"invariant {key!r} recorded twice")
        entry = {"value": _plain(value), "ok": bool(ok), "hard": hard}
        if tol is not None:
            entry["tol"] = _plain(tol)
        if note:
            entry["note"] = note
        self.items[key] = entry

    def below(self, name, value, tol, hard=True, note=None):
        self.add(name, value, np.isfinite(value) and value < tol, tol, hard, note)

    def scoped(self, prefix):
        return _Scoped(self, prefix)

    @property
    def failed(self):
        return [k for k, v in self.items.items() if v["hard"] and not v["ok"]]


class _Scoped:
    def __init__(self, parent: Checks, prefix: str):
        self.parent, self.prefix = parent, prefix

    def add(self, name, *a, **kw):
        self.parent.add(self.prefix + name, *a, **kw)

    def below(self, name, *a, **kw):
        self.parent.below(self.prefix + name, *a, **kw)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return v


def grid_of(sc: Scenario):
    return build_grid(sc["grid.scheme"], sc["grid.nodes"], sc["grid.omega_max"])


def csco_of(sc: Scenario) -> CscoSpec:
    return CscoSpec(sc["csco.bound_energy"], sc["csco.degeneracy"], sc["csco.n_momenta"], sc["csco.n_isolating"])


# --- preflight: physics feasibility before any heavy computation -------------------------------

def preflight(sc: Scenario) -> None:
    """Raise :class:`InfeasibleTarget` / ``ValueError`` for impossible physics."""
    grid = grid_of(sc)
    csco_of(sc)
    beta, e = sc["thermal.beta"], sc["thermal.E"]
    if beta is not None and not beta > 0:
        raise InfeasibleTarget(f"thermal.beta = {beta} must be positive")
    if e is not None:
        lo, hi = float(grid.nodes.min()), float(grid.nodes.max())
        if not lo < e < hi:
            raise InfeasibleTarget(f"thermal.E = {e} lies outside the attainable range ({lo:g}, {hi:g})")
    if sc.pipeline in ("maxent", "kms", "full-chain") and beta is None and e is None:
        raise InfeasibleTarget("set thermal.beta or thermal.E")
    if sc.pipeline == "decohere" and sc["evolution.times"] is None:
        raise ValueError("evolution.times is required for the decohere pipeline")
    if sc["canonical.nu"] <= 0 or sc["canonical.E_total"] <= 0:
        raise InfeasibleTarget("canonical.nu and canonical.E_total must be positive")
    if sc["canonical.beta"] <= 0:
        raise InfeasibleTarget("canonical.beta must be positive")
    if sc["wigner.hbar_eff"] <= 0 or min(sc["wigner.hbar_series"]) <= 0 or sc["wigner.epsilon"] <= 0:
        raise InfeasibleTarget("hbar_eff, hbar_series and epsilon must be positive")
    if sc.pipeline in ("ergodic", "full-chain"):
        _flow_spec(sc)


def _thermal_params(sc: Scenario, grid) -> ThermalParams:
    if sc["thermal.E"] is not None:
        return solve_thermal_params(grid, sc["thermal.E"])
    beta = sc["thermal.beta"]
    return ThermalParams(beta, float(np.exp(log_partition(grid, beta))))


def _flow_spec(sc: Scenario) -> FlowSpec:
    return FlowSpec(sc["flow.frequencies"], sc["flow.actions"] or (), sc["flow.initial_angles"],
                    sc["flow.classification"])


# --- pipelines ---------------------------------------------------------------------------------

def run_decohere(sc: Scenario, out: Path, checks) -> list:
    grid = grid_of(sc)
    rho = gaussian_coherence_state(grid, sc["evolution.center"], sc["evolution.sigma"])
    ones = np.ones(grid.size)
    obs = Observable(grid, np.zeros((1, 1)), np.zeros((grid.size, 1, 1)), cc_full=SeparableKernel.outer(ones, ones))
    times = np.asarray(sc["evolution.times"], dtype=float)
    curve = decoherence_curve(rho, obs, times, revival_override=sc["evolution.revival_override"])
    sigma = sc["evolution.sigma"]
    r0 = abs(pair(rho, obs) - curve.limit)
    envelope = r0 * np.exp(-(sigma * times) ** 2)
    resolved = envelope >= 1e-8 * r0
    ratio = curve.residuals[resolved] / envelope[resolved]
    checks.below("envelope_factor_deviation", float(np.max(np.abs(np.log(ratio)))) if ratio.size else 0.0,
                 np.log(2.0), note="max |log(residual / analytic envelope)| where envelope >= 1e-8")
    checks.below("final_residual_ratio", float(curve.residuals[-1] / r0), 1e-3)
    ident = make_identity(grid)
    drift = max(abs(pair(evolve(rho, t), ident) - pair(rho, ident)) for t in times)
    checks.add("normalization_drift", drift, drift == 0.0, 0.0)
    diag_same = all(np.array_equal(evolve(rho, t).cc_diag, rho.cc_diag) for t in times)
    checks.add("diagonal_blocks_invariant", diag_same, diag_same)
    checks.add("revival_horizon", curve.revival_horizon, times[-1] <= curve.revival_horizon or
               sc["evolution.revival_override"])
    a = io.write_csv(out / "decoherence.csv", ["t", "mean", "residual"], curve.rows(), sc.seed)
    b = io.write_profile_csv(rho, out / "profile.csv", sc.seed)
    c = io.dump_json(rho, out / "state.json")
    return [a, b, c]


def run_maxent(sc: Scenario, out: Path, checks) -> list:
    grid = grid_of(sc)
    params = _thermal_params(sc, grid)
    target = sc["thermal.E"] if sc["thermal.E"] is not None else mean_energy(grid, params.beta)
    dens = canonical_density(grid, params.beta)
    checks.below("energy_residual", abs(mean_energy(grid, params.beta) - target), 1e-9 * max(1.0, abs(target)))
    checks.below("dlogZ_dbeta_relative", abs(dlogz_dbeta(grid, params.beta) + target) / abs(target), 1e-6)
    rng = np.random.default_rng(sc.seed)
    s0 = shannon_entropy(grid, dens)
    comp = constrained_competitors(grid, dens, rng, sc["thermal.competitors"])
    best = max(shannon_entropy(grid, c) for c in comp)
    checks.add("entropy_margin", s0 - best, best < s0, note="canonical entropy minus best competitor")
    state = build_kms_state(grid, params)
    rep = validate(state)
    checks.add("kms_state_valid", rep.as_dict(), rep.ok)
    files = [io.write_csv(out / "canonical.csv", ["omega", "density"], zip(grid.nodes, dens), sc.seed),
             io.dump_json({"beta": params.beta, "z": params.z, "gammas": list(params.gammas),
                           "target_energy": target, "entropy": s0, "seed": sc.seed}, out / "thermal.json")]
    return files


def _gaussian_kernel(grid, center, width=1.0):
    g = np.exp(-((grid.nodes - center) ** 2) / (2 * width**2))
    return Observable(grid, np.zeros((1, 1)), np.zeros((grid.size, 1, 1)), cc_full=SeparableKernel.outer(g, g))


def _cr_max(a, b, params, t_max, t_steps, rows):
    t, gam = strip_lattice(params.beta, rows, t_max, t_steps)
    corr = kms_correlators(a, b, params, t, gam)
    return corr, verify_kms(corr, params)


def run_kms(sc: Scenario, out: Path, checks) -> list:
    grid = grid_of(sc)
    params = _thermal_params(sc, grid)
    rng = np.random.default_rng(sc.seed)
    worst = 0.0
    for _ in range(sc["kms.random_pairs"]):
        a, b = random_observable(grid, 1, rng), random_observable(grid, 1, rng)
        ab, ba = op_trace(compose(a, b)), op_trace(compose(b, a))
        worst = max(worst, abs(ab - ba) / max(1.0, abs(ab)))
    checks.below("cyclic_trace_relative", worst, 1e-10)
    a = _gaussian_kernel(grid, 3.0)
    b = _gaussian_kernel(grid, 4.0)
    t_max, t_steps, rows = sc["kms.t_max"], sc["kms.t_steps"], sc["kms.strip_rows"]
    corr, res = _cr_max(a, b, params, t_max, t_steps, rows)
    checks.below("boundary_residual", res["boundary_residual_relative"], 1e-10,
                  note="max_t |G(t) - F(t + i beta)| relative to max |F|, |G|")
    ratio = cr_halving_ratio(a, b, params, t_max, t_steps, rows)["ratio"]
    checks.add("analyticity_residual", res["analyticity_residual"], True, hard=False)
    checks.add("cr_halving_ratio", ratio, abs(ratio - 4.0) <= 0.5, 0.5,
               note="O(h^2) Cauchy-Riemann defect on shared points: ratio 4 under lattice halving")
    f0 = corr.F_values[np.argmin(np.abs(corr.t_grid))]
    w_ba = thermal_functional(compose(b, a), params, include_regular=True)
    checks.below("F0_vs_thermal_functional", abs(f0 - w_ba) / max(abs(w_ba), 1e-300), 1e-10)
    f1 = io.write_csv(out / "correlators.csv", ["t", "Re F", "Im F", "Re G", "Im G"],
                      zip(corr.t_grid, corr.F_values.real, corr.F_values.imag, corr.G_values.real,
                          corr.G_values.imag), sc.seed)
    d = cauchy_riemann_defect(corr)
    tt, gg = np.meshgrid(corr.t_grid[1:-1], corr.gamma_grid[1:-1])
    f2 = io.write_csv(out / "strip.csv", ["t", "gamma", "cr_residual"], zip(tt.ravel(), gg.ravel(), d.ravel()),
                      sc.seed)
    return [f1, f2]


def run_wigner(sc: Scenario, out: Path, checks) -> list:
    h = sc["wigner.hbar_eff"]
    grid = make_phase_grid(sc["wigner.q_extent"], sc["wigner.nq"], sc["wigner.p_extent"], sc["wigner.np"], h)
    checks.add("grid_resolves_hbar", grid.dq * grid.dp, grid.resolves_hbar, h / 4, hard=False)
    x = grid.q_nodes
    rho0 = pure_state(oscillator_state(x, h, 0), grid.dq)
    w0 = wigner_transform(rho0, grid)
    q, p = grid.mesh()
    exact = np.exp(-(q**2 + p**2) / h) / (np.pi * h)
    checks.below("ground_state_pointwise", float(np.max(np.abs(w0.values - exact))), 1e-6)
    checks.below("ground_state_norm", abs(w0.norm - 1.0), 1e-6)
    checks.below("imag_residual", w0.imag_residual, 1e-10)
    w1 = wigner_transform(pure_state(oscillator_state(x, h, 1), grid.dq), grid)
    i0, j0 = np.argmin(np.abs(x)), np.argmin(np.abs(grid.p_nodes))
    on_node = abs(x[i0]) < 1e-12 and abs(grid.p_nodes[j0]) < 1e-12
    checks.add("excited_origin_on_node", bool(on_node), on_node)
    checks.below("excited_origin_value", abs(w1.values[i0, j0] + 1 / (np.pi * h)), 1e-4)
    ident = np.eye(grid.nq) / grid.dq
    checks.below("identity_symbol", float(np.max(np.abs(wigner_transform(ident, grid, "observable") - 1))), 1e-10)
    harm = weyl_quantize(lambda q, p: 0.5 * (q * q + p * p), grid)
    gap = abs(classical_mean(w0, 0.5 * (q**2 + p**2)) - h / 2)
    checks.below("ground_energy_mean", gap, 1e-8)
    qgap = abs(np.einsum("ab,ba->", rho0, harm).real * grid.dq**2 - h / 2)
    checks.below("ground_energy_quantum", qgap, 1e-8)

    st = lambda xx, hh: oscillator_state(xx, hh, 0, 0.3, -0.2)
    models = [
        CorrespondenceModel("q*p", lambda q, p: q + 0 * p, lambda q, p: p + 0 * q,
                            lambda q, p: 0.5 * (q * q + p * p), st),
        CorrespondenceModel("q*q", lambda q, p: q + 0 * p, lambda q, p: q + 0 * p,
                            lambda q, p: 0.5 * (q * q + p * p), st),
        CorrespondenceModel("quartic", lambda q, p: q * q + 0 * p, lambda q, p: p * p + 0 * q,
                            lambda q, p: 0.5 * p * p + 0.25 * q**4, st),
    ]
    series = sorted(sc["wigner.hbar_series"], reverse=True)
    rep = correspondence_suite(models, series)
    slope = rep["q*p"]["product_fit"]["slope"]
    checks.add("product_slope_qp", slope, slope is not None and abs(slope - 1.0) <= 0.1, 0.1)
    checks.add("product_exact_qq", rep["q*q"]["product_fit"]["exact"], rep["q*q"]["product_fit"]["exact"])
    lq = rep["q*p"]["liouville_fit"]
    checks.add("liouville_quadratic_exact", lq["exact"], lq["exact"])
    lf = rep["quartic"]["liouville_fit"]
    checks.add("liouville_quartic_slope", lf["slope"], lf["exact"] or lf["slope"] >= 0.9, 0.9)
    # mean correspondence: exact for quadratic symbol pairs, O(hbar) at worst otherwise (C = 1)
    qf = lambda q, p: q + 0 * p
    pf = lambda q, p: p + 0 * q
    q2 = lambda q, p: q * q + 0 * p
    p2 = lambda q, p: p * p + 0 * q
    pairs = ((qf, pf), (qf, qf), (q2, lambda q, p: 1 + 0 * q))
    quad = max(mean_correspondence_gap(st, a, b, hb) for hb in series for a, b in pairs)
    checks.below("mean_gap_quadratic", quad, 1e-8)
    anh = [mean_correspondence_gap(st, q2, p2, hb) for hb in series]
    worst = max(g / hb for g, hb in zip(anh, series))
    checks.add("mean_gap_anharmonic_over_hbar", worst, worst <= 1.0, 1.0, note="max_h gap(q^2, p^2) / hbar_eff")
    rows = []
    for name, r in rep.items():
        rows += [(name, hb, e, lr) for hb, e, lr in zip(r["hbar"], r["product_error"], r["liouville_residual"])]
    files = [io.write_csv(out / "correspondence.csv", ["model", "hbar", "product_error", "liouville_residual"],
                          rows, sc.seed)]
    files += list(io.write_phase_space(w0.values, grid, out / "wigner_ground", sc.seed).values())

    # mollified shell densities and their moments
    omega, eps = sc["wigner.omega"], sc["wigner.epsilon"]
    ext, n = sc["wigner.shell_extent"], sc["wigner.shell_nodes"]
    pg = make_phase_grid(ext, n, ext, n)
    model = ClassicalModel(lambda q, p: 0.5 * (q * q + p * p))
    mrows, biases = [], []
    for e in (eps, eps / 2, eps / 4):
        vals, _ = shell_density(pg, model, omega, epsilon=e)
        mc = moment_check(vals, pg, model, [0, 1, 2])["H"]
        mrows += [(e, k, mc[k], omega**k) for k in (0, 1, 2)]
        biases.append(abs(mc[2] - omega**2))
        if e == eps:
            checks.add("shell_nonnegative", float(vals.min()), vals.min() >= 0)
            checks.below("shell_norm", abs(mc[0] - 1), 1e-3)
            checks.below("shell_moment1", abs(mc[1] - omega), 2 * eps)
            checks.below("shell_moment2", abs(mc[2] - omega**2), 2 * eps)
            hv = model.hamiltonian(*pg.mesh())
            mass = float(np.sum(vals[np.abs(hv - omega) < 3 * e]) * pg.dq * pg.dp)
            checks.add("shell_mass_3eps", mass, mass > 0.99, 0.99)
    halving = [biases[i + 1] / biases[i] for i in range(2)]
    checks.add("shell_bias_halving", halving, all(r <= 0.5 + 1e-9 for r in halving), 0.5)
    files.append(io.write_csv(out / "moments.csv", ["epsilon", "n", "moment", "target"], mrows, sc.seed))
    return files


def run_ergodic(sc: Scenario, out: Path, checks) -> list:
    spec = _flow_spec(sc)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        resonances = resonance_warnings(spec)
        occ = occupancy_check(spec, sc["ergodic.T"], min(sc["ergodic.samples"], 200_000))
    report = equidistribution_test(spec, sc["ergodic.modes"], sc["ergodic.T"], sc["ergodic.samples"])
    checks.add("weyl_within_bound", report.flags["all_within_bound"], report.flags["all_within_bound"])
    res_mod = [r["weyl_avg"] for r in report.weyl_averages if r["resonant"]]
    checks.add("resonant_modulus_one", res_mod, all(abs(v - 1) < 1e-9 for v in res_mod))
    f = lambda a: np.cos(a[..., 0]) * np.cos(a[..., 1]) if spec.n_dof >= 2 else np.cos(a[..., 0])
    erg = ergodic_average_check(spec, f, sc["ergodic.T"])
    if not resonances:
        checks.below("time_space_gap", erg["gap"], 1e-2)
        ok = erg["slope"] is not None and erg["slope"] <= -0.9
        checks.add("gap_slope", erg["slope"], ok, -0.9)
    else:
        checks.add("time_space_gap", erg["gap"], True, hard=False, note="resonant flow: no decay expected")
    checks.add("torus_occupancy", occ["occupancy"], True, hard=False)
    payload = dict(report.as_dict(), ergodic_average=erg, occupancy=occ, seed=sc.seed,
                   resonant_modes=[list(r) for r in resonances], warnings=[str(w.message) for w in caught])
    return [io.write_csv(out / "weyl.csv", ["mode", "weyl_avg", "bound"], report.rows(), sc.seed),
            io.dump_json(payload, out / "ergodic.json")]


def run_canonical(sc: Scenario, out: Path, checks) -> list:
    nu, e = sc["canonical.nu"], sc["canonical.E_total"]
    fit = canonical_from_microcanonical(nu, e)
    fit2 = canonical_from_microcanonical(2 * nu, e)
    checks.below("beta_relative_error", fit.relative_error, 0.05)
    checks.below("doubling_ratio_error", abs(fit2.beta / fit.beta - 2) / 2, 0.05)
    beta = sc["canonical.beta"]
    pg = make_phase_grid(8.0 / np.sqrt(beta), 241, 8.0 / np.sqrt(beta), 241)
    harm = lambda q, p: 0.5 * (q * q + p * p)
    checks.below("equipartition", abs(classical_thermal_functional(harm, beta, pg, harm) - 1 / beta), 1e-6)
    checks.add("unit_functional", classical_thermal_functional(1.0, beta, pg, harm),
               classical_thermal_functional(1.0, beta, pg, harm) == 1.0, 0.0)
    # quantum vs classical thermal means of q^2 for the harmonic oscillator
    rows, worst = [], 0.0
    for h in sc["canonical.hbar_series"]:
        g = adapted_grid(h, 8.0 / np.sqrt(beta), 6.0 / np.sqrt(beta))
        hk = weyl_quantize(harm, g)
        ok = weyl_quantize(lambda q, p: q * q + 0 * p, g)
        qm = quantum_thermal_mean(hk, ok, beta, g.dq)
        cm = classical_thermal_functional(lambda q, p: q * q + 0 * p, beta, pg, harm)
        rows.append((h, qm, cm, abs(qm - cm)))
        worst = max(worst, abs(qm - cm) / h)
    checks.add("quantum_classical_gap_over_hbar", worst, worst <= 1.0, 1.0,
               note="max_h |quantum - classical| / hbar_eff for <q^2>, C = 1")
    return [io.write_csv(out / "marginal.csv", ["E1", "p"], zip(fit.energies, fit.marginal), sc.seed),
            io.write_csv(out / "thermal_gap.csv", ["hbar", "quantum", "classical", "gap"], rows, sc.seed),
            io.dump_json({"beta": fit.beta, "beta_expected": fit.beta_expected, "seed": sc.seed},
                         out / "canonical.json")]


def run_localize(sc: Scenario, out: Path, checks) -> list:
    seed = sc["localization.seed"] if sc["localization.seed"] is not None else sc.seed
    rng = np.random.default_rng(seed)
    n = sc["localization.ensemble_size"]
    cloud = rng.normal(size=(n, 2)) * [sc["localization.sigma_q"], sc["localization.sigma_p"]]
    flow = shear_flow if sc["localization.flow"] == "shear" else identity_flow
    times = np.linspace(0.0, sc["localization.t_max"], sc["localization.t_steps"])
    band = tuple(sc["localization.band"])
    track = track_volumes(cloud, flow, sc["localization.observed_indices"], times, band=band)
    checks.below("total_volume_drift", track.total_drift, 1e-6)
    r = track.product_ratio
    checks.add("product_ratio_band", [float(r.min()), float(r.max())], track.out_of_band.size == 0, list(band))
    verdict = localization_verdict(track)
    checks.add("shear_not_localizing", verdict["localizes"], not verdict["localizes"])
    tt = np.linspace(0, 5, 11)
    synth = localization_verdict(VolumeTrack(tt, np.ones_like(tt), np.exp(-tt), np.exp(tt)))
    checks.add("synthetic_localizes", synth["localizes"], synth["localizes"])
    return [io.write_csv(out / "volumes.csv", ["t", "v_total", "v_observed", "v_unobserved", "product_ratio"],
                         track.rows(), seed),
            io.dump_json(dict(verdict, seed=seed), out / "verdict.json")]


def run_pointer(sc: Scenario, out: Path, checks) -> list:
    grid = grid_of(sc)
    m = max(2, sc["csco.degeneracy"])
    rng = np.random.default_rng(sc.seed)
    worst_off, worst_unit, worst_comm = 0.0, 0.0, 0.0
    basis = None
    for _ in range(sc["pointer.families"]):
        diag = random_hermitian_blocks(rng, grid.size, m, psd=True)
        rho = normalized(StateFunctional(grid, np.zeros((m, m)), diag))
        basis = diagonalize_sections(rho)
        worst_off = max(worst_off, off_diagonal_residual(rho, basis))
        worst_unit = max(worst_unit, basis.unitarity_residual())
        p = pointer_observables(basis, grid)[0]
        tests = [random_observable(grid, m, rng) for _ in range(sc["pointer.test_observables"])]
        worst_comm = max(worst_comm, commutator_mean_residual(rho, p, tests))
    checks.below("offdiag_residual", worst_off, 1e-10)
    checks.below("unitarity_residual", worst_unit, 1e-10)
    checks.below("commutator_mean_residual", worst_comm, 1e-8)
    return [io.dump_json(basis.report(), out / "pointer_report.json")]


def run_full_chain(sc: Scenario, out: Path, checks) -> list:
    files = []
    stages = [("decohere", run_decohere), ("pointer", run_pointer), ("maxent", run_maxent), ("kms", run_kms),
              ("wigner", run_wigner), ("ergodic", run_ergodic), ("canonical", run_canonical),
              ("localize", run_localize)]
    for name, fn in stages:
        if name == "decohere" and sc["evolution.times"] is None:
            continue
        files += fn(sc, out / name, checks.scoped(name + "."))
    return files


PIPELINE_FUNCS = {
    "decohere": run_decohere,
    "maxent": run_maxent,
    "kms": run_kms,
    "wigner": run_wigner,
    "ergodic": run_ergodic,
    "canonical": run_canonical,
    "localize": run_localize,
    "full-chain": run_full_chain,
}
