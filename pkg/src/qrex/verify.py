"""Cross-module invariant suite behind the `verify` scenario.

Each check runs a self-contained numerical experiment at desk scale and
returns (name, passed, detail).  Failures carry the measured number so a
regression is diagnosable from the report alone.
"""

import numpy as np
from scipy.special import erfc

from .classical import (
    bottleneck_ratio,
    classical_defected_ising_energy,
    classical_gap,
    classical_re_generator,
    glauber_generator,
)
from .hamiltonians import assemble_dense, check_commuting_cut, compress_onto, defected_ising_1d
from .lindblad import (
    Superoperator,
    WeightFunction,
    alpha_coeff,
    build_ckg_generator,
    eigensystem,
    gibbs_state,
    jump_components,
)
from .mixing import SpectralPropagator, chi_square_rate_fit, trace_distance, trace_norm
from .pauli import single_site_paulis
from .replica import (
    SwapMode,
    build_replica_exchange_generator,
    joint_gibbs,
    swap_generator_closed_form,
    swap_generator_generic,
    swap_only_kernel_analysis,
    swap_sector_lower_bounds,
    theta,
)
from .spectral import (
    gap_composition_suite,
    kms_operator_norm,
    spectral_gap,
    symmetrize,
)


def _check(name, passed, detail):
    return {"check": name, "passed": bool(passed), "detail": detail}


def run_verification(seed=42, beta=1.0):
    """Run every invariant check; returns a list of result rows."""
    results = []
    gm = WeightFunction("metropolis", beta)
    gg = WeightFunction("gaussian", beta)
    spec3 = defected_ising_1d(3, 3.0)
    H3 = assemble_dense(spec3)
    es3 = eigensystem(H3)
    sg3 = gibbs_state(es3, beta)

    # hamiltonians
    herm = np.linalg.norm(H3 - H3.conj().T) / np.linalg.norm(H3)
    results.append(_check("hamiltonians.hermiticity", herm <= 1e-12, f"residual {herm:.2e}"))

    cut = check_commuting_cut(spec3)
    h_ab = sum(np.kron(va, vb) for va, vb in cut.interaction)
    bound_ok = np.linalg.norm(h_ab, 2) <= cut.k_count * cut.v_max + 1e-10
    results.append(_check("hamiltonians.commuting_cut", cut.holds and bound_ok,
                          f"holds={cut.holds} K*Vmax={cut.k_count * cut.v_max}"))

    rng = np.random.default_rng(seed)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    H4 = assemble_dense(defected_ising_1d(4, 2.0))
    comp = compress_onto(H4, v, ((0, 1), (2, 3)), 4)
    contractive = np.linalg.norm(comp, 2) <= np.linalg.norm(H4, 2) + 1e-12
    results.append(_check("hamiltonians.compress_contractive", contractive,
                          f"norm {np.linalg.norm(comp, 2):.3f}"))

    # lindblad
    worst_fp = 0.0
    worst_tr = 0.0
    for w in (gm, gg):
        heis, schro = build_ckg_generator(assemble_dense(spec3), single_site_paulis(3), w, es=es3)
        worst_fp = max(worst_fp, trace_norm(schro.apply(sg3.sigma)))
        R = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        rho = R @ R.conj().T
        rho /= np.trace(rho)
        worst_tr = max(worst_tr, abs(np.trace(schro.apply(rho))))
    results.append(_check("lindblad.fixed_point", worst_fp < 1e-10, f"trace norm {worst_fp:.2e}"))
    results.append(_check("lindblad.trace_preservation", worst_tr < 1e-10, f"{worst_tr:.2e}"))

    psd_ok = True
    min_ev = 0.0
    for S in single_site_paulis(3):
        comps = jump_components(S, es3)
        nus = [nu for nu, c in comps.items() if np.linalg.norm(c) > 1e-12]
        A = np.array([[alpha_coeff(a, b, gm) for b in nus] for a in nus])
        ev = np.linalg.eigvalsh(A).min()
        min_ev = min(min_ev, ev)
        psd_ok &= ev >= -1e-10
    results.append(_check("lindblad.alpha_gram_psd", psd_ok, f"min eigenvalue {min_ev:.2e}"))

    heis_m, _ = build_ckg_generator(assemble_dense(spec3), single_site_paulis(3), gm, es=es3)
    Lhat = symmetrize(heis_m, sg3)
    evals = np.linalg.eigvalsh(-Lhat)
    results.append(_check("lindblad.negativity", evals.min() >= -1e-9 * np.abs(evals).max(),
                          f"min {evals.min():.2e}"))
    kernel_count = int(np.sum(evals <= 1e-9 * np.abs(evals).max()))
    results.append(_check("lindblad.kernel_unique", kernel_count == 1, f"dim {kernel_count}"))

    # replica / theta
    grid = np.linspace(-50, 50, 501)
    th = theta(grid)
    theta_ok = np.all(th >= 0) and np.all(th <= 2.0) and np.all(th <= np.exp(-grid / 2) + 1e-12)
    results.append(_check("replica.theta_bounds", theta_ok,
                          f"range [{th.min():.3f}, {th.max():.3f}]"))

    quad_grid = np.linspace(-20, 20, 101)
    diff = max(abs(theta(x) - alpha_coeff(x / beta, x / beta, gm)) for x in quad_grid)
    results.append(_check("replica.theta_quadrature", diff < 1e-8, f"max diff {diff:.2e}"))

    cs_ok = True
    for _ in range(100):
        w1, w2 = rng.uniform(-4, 4, size=2)
        if alpha_coeff(w1, w2, gm) ** 2 > np.sqrt(np.exp(-beta * w1) * np.exp(-beta * w2)) + 1e-10:
            cs_ok = False
    results.append(_check("replica.cauchy_schwarz", cs_ok, "100 random pairs"))

    erfc_ok = True
    ps = np.linspace(0.01, 0.99, 50)
    for pi_ in ps:
        for pj in ps:
            if pi_ + pj > 1.0:
                continue
            r = np.log(pj / pi_)
            lhs = pj * erfc((1 + 2 * r) / (2 * np.sqrt(2))) + pi_ * erfc((1 - 2 * r) / (2 * np.sqrt(2)))
            if lhs < pi_ * pj / (pi_ + pj) - 1e-12:
                erfc_ok = False
    results.append(_check("replica.erfc_mean_bound", erfc_ok, "50x50 grid"))

    swap_closed, _ = swap_generator_closed_form(spec3, beta)
    swap_generic, _ = swap_generator_generic(spec3, beta)
    rel = np.linalg.norm(swap_closed.matrix - swap_generic.matrix, 2) / \
        np.linalg.norm(swap_generic.matrix, 2)
    results.append(_check("replica.closed_vs_generic", rel <= 1e-9, f"rel diff {rel:.2e}"))

    sgj = joint_gibbs(spec3, beta)
    norm = kms_operator_norm(swap_closed, sgj)
    results.append(_check("replica.swap_norm_le_3", norm <= 3.0 + 1e-6, f"norm {norm:.6f}"))

    sector = swap_sector_lower_bounds(spec3, beta, seed=seed)
    sec_ok = all(v >= sector["threshold"] for v in sector["sector_minima"].values())
    results.append(_check("replica.sector_lower_bounds", sec_ok,
                          f"minima {sector['sector_minima']} >= {sector['threshold']:.2e}"))

    kern = swap_only_kernel_analysis(spec3, beta, seed=seed)
    cross_ok = all(vv < 1e-10 for vv in kern["cross_term_residuals"].values())
    results.append(_check("replica.swap_kernel_sector",
                          kern["restricted_kernel_dim"] == 1 and cross_ok,
                          f"dim {kern['restricted_kernel_dim']}, cross {kern['cross_term_residuals']}"))

    heis_re, _ = build_replica_exchange_generator(spec3, beta, gg, gg, SwapMode("local_A"))
    rep_re = spectral_gap(heis_re, sgj)
    results.append(_check("replica.joint_kernel_dim", rep_re.kernel_dim == 1,
                          f"dim {rep_re.kernel_dim}"))

    # spectral
    comp_rep = gap_composition_suite(seed=seed, n_instances=200)
    results.append(_check("spectral.gap_composition", comp_rep["passed"],
                          str({k: v["violations"] for k, v in comp_rep["cases"].items()})))

    rep1 = spectral_gap(heis_m, sg3)
    rep2 = spectral_gap(Superoperator(2.5 * heis_m.matrix, "heisenberg"), sg3)
    scale_ok = abs(rep2.gap - 2.5 * rep1.gap) <= 1e-9 * rep2.gap
    results.append(_check("spectral.gap_rescaling", scale_ok, f"{rep2.gap / rep1.gap:.12f}"))

    direct = np.sort(np.linalg.eigvals(heis_m.matrix).real)
    sym = np.sort(np.linalg.eigvalsh(Lhat))
    spec_ok = np.allclose(direct, sym, atol=1e-7 * max(1.0, np.abs(sym).max()))
    results.append(_check("spectral.symmetrize_consistency", spec_ok,
                          f"max dev {np.abs(direct - sym).max():.2e}"))

    # mixing
    prop = SpectralPropagator(heis_m, sg3)
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[0, 0] = 1.0
    coeffs = prop.coefficients(rho0)
    ts = np.linspace(0.0, 5.0, 11)
    dists = [trace_distance(prop.state_at(coeffs, t), sg3.sigma) for t in ts]
    mono = all(d2 <= d1 + 1e-10 for d1, d2 in zip(dists, dists[1:]))
    results.append(_check("mixing.trace_distance_monotone", mono, "11-point grid"))

    spec2 = defected_ising_1d(3, 1.0)
    H2 = assemble_dense(spec2)
    es2 = eigensystem(H2)
    heis2, _ = build_ckg_generator(H2, single_site_paulis(3), gm, es=es2)
    sg2 = gibbs_state(es2, beta)
    gap2 = spectral_gap(heis2, sg2).gap
    rate = chi_square_rate_fit(heis2, sg2)
    chi_ok = abs(rate / (2 * gap2) - 1.0) <= 0.05
    results.append(_check("mixing.chi2_gap_consistency", chi_ok,
                          f"rate/2gap = {rate / (2 * gap2):.4f}"))

    # classical
    efn = lambda z: classical_defected_ising_energy(z, 3.0)
    chain = glauber_generator(efn, 4, beta)
    flow = chain.stationary[:, None] * chain.generator
    rev = np.abs(flow - flow.T).max()
    results.append(_check("classical.chain_validity", rev < 1e-12, f"reversibility {rev:.2e}"))

    phis = []
    for J in (2.0, 3.0, 4.0):
        cj = glauber_generator(lambda z: classical_defected_ising_energy(z, J), 4, beta)
        phis.append(bottleneck_ratio(cj, mode="exact")[0])
    law_ok = all(p2 / p1 <= np.exp(-beta) + 1e-12 for p1, p2 in zip(phis, phis[1:]))
    results.append(_check("classical.bottleneck_law", law_ok,
                          f"ratios {[f'{p2/p1:.3f}' for p1, p2 in zip(phis, phis[1:])]}"))

    re_gap = classical_gap(classical_re_generator(efn, 4, beta, 0.2))
    single_gap = classical_gap(chain)
    results.append(_check("classical.re_acceleration", re_gap > single_gap,
                          f"re {re_gap:.4f} vs single {single_gap:.4f}"))

    return results
