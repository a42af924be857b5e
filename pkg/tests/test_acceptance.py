"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the terminal summary) and then
asserts the criterion at its stated tolerance.  The Monte Carlo and lattice
criteria are marked slow; deselect them with ``-m "not slow"``.
"""
import json
import time

import numpy as np
import pytest
from conftest import VERDICTS

from sle_gff.cli import main
from sle_gff.dgff import coupling_test, estimate_kappa, level_line_curves
from sle_gff.domains import Neumann, annulus, disc, half_plane, lambda_kappa, strip
from sle_gff.fields import FieldModel
from sle_gff.kernels import InnerBC, KernelHandle, kernel_mu, schwarz_annulus, schwarz_disc
from sle_gff.sle import DrivingModel, Variant
from sle_gff.verify import (
    capacity_check,
    chordal_probe,
    commutation_delta,
    drift_residual,
    hadamard_fd_check,
    martingale_mc,
    singularity_profile,
    strip_probe,
    two_ordering_limit,
    winding_bridge_check,
)


def verdict(n, label, ok, detail):
    VERDICTS[n] = ("PASS" if ok else "FAIL", label, detail)
    print(f"criterion {n} {'PASS' if ok else 'FAIL'} {label}: {detail}")
    assert ok, detail


def _grid400():
    xs, ys = np.linspace(-2, 2, 20), np.linspace(0.1, 2, 20)
    return (xs[:, None] + 1j * ys[None, :]).ravel()


def test_criterion_01_chordal_identity():
    t0 = time.perf_counter()
    z = _grid400()
    d = DrivingModel("chordal")
    res4 = float(np.max(np.abs(drift_residual(FieldModel(d), d, z, 0.0))))
    worst = 0.0
    for kappa in (2.0, 6.0, 8.0):
        dk = DrivingModel("chordal", kappa=kappa)
        r = drift_residual(FieldModel(dk), dk, z, 0.0)
        expected = (4 - kappa) * lambda_kappa(kappa) / np.pi * np.imag(1 / z**2)
        worst = max(worst, float(np.max(np.abs(r - expected))))
    dt = time.perf_counter() - t0
    verdict(1, "chordal identity", res4 < 1e-9 and worst < 1e-6 and dt < 10,
            f"max residual {res4:.1e} (<1e-9), off-4 deviation {worst:.1e} (<1e-6), {dt:.1f}s")


@pytest.mark.slow
def test_criterion_02_hadamard():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10):
        z1 = complex(rng.uniform(-2, 2), rng.uniform(0.3, 2))
        z2 = complex(rng.uniform(-2, 2), rng.uniform(0.3, 2))
        fd, ref = hadamard_fd_check(half_plane(), 0.0, z1, z2, 1e-4)
        worst = max(worst, abs(fd - ref) / abs(ref))
    fd, ref = hadamard_fd_check(strip(Neumann()), 0.0, 1.0 + 1.5j, -0.5 + 1j, 1e-4,
                                lattice_resolution=512)
    strip_rel = abs(fd - ref) / abs(ref)
    dt = time.perf_counter() - t0
    verdict(2, "Hadamard variation", worst < 1e-3 and strip_rel < 0.05 and dt < 120,
            f"half-plane worst rel {worst:.1e} (<1e-3), strip vs 512 lattice {strip_rel:.2%} "
            f"(<5%), {dt:.0f}s")


def test_criterion_03_strip_drift():
    t0 = time.perf_counter()
    ok, slopes = True, []
    for theta in (-0.4, -0.2, 0.0, 0.2, 0.4):
        d = DrivingModel("strip-theta", theta=theta)
        f = FieldModel(d)
        ok &= singularity_profile(f, d, 0.0).bounded
        for shift in (0.1, -0.1):
            prof = singularity_profile(f, d, 0.0, drift=2 * theta + shift)
            slopes.append(prof.slope)
            ok &= prof.slope <= -0.9
    dt = time.perf_counter() - t0
    verdict(3, "strip drift", ok and dt < 60,
            f"bounded at D=2 theta, worst perturbed slope {max(slopes):.3f} (<=-0.9), {dt:.1f}s")


def test_criterion_04_annulus_kernels():
    t0 = time.perf_counter()
    bc_res = 0.0
    for bc in InnerBC:
        for p in (0.5, 1.0, 2.0):
            x = np.exp(0.4j)
            th = np.linspace(0, 2 * np.pi, 40, endpoint=False)
            inner = schwarz_annulus(p, bc, x, np.exp(-p + 1j * th))
            if bc is InnerBC.DIRICHLET_CONST:
                bc_res = max(bc_res, np.max(np.abs(inner.real - 1 / (2 * np.pi))))
            else:
                bc_res = max(bc_res, np.max(np.abs(inner.imag - inner.imag.mean())))
            far = np.exp(1j * (0.4 + np.linspace(0.3, 2 * np.pi - 0.3, 40)))
            bc_res = max(bc_res, np.max(np.abs(schwarz_annulus(p, bc, x, far).real)))
    mu = max(abs(kernel_mu(KernelHandle(annulus(1.0)), 1.0) + 1 / (2 * np.pi)),
             abs(kernel_mu(KernelHandle(annulus(2.0, Neumann())), np.exp(1j)) + 1 / (2 * np.pi)))
    disc_dev = abs(schwarz_annulus(8.0, "dirichlet-const", 1.0, 0.5) - schwarz_disc(1.0, 0.5))
    dt = time.perf_counter() - t0
    ok = bc_res < 1e-10 and mu < 1e-8 and dt < 30
    detail = (f"boundary residual {bc_res:.1e} (<1e-10), constant term dev {mu:.1e} (<1e-8), "
              f"disc limit at p=8 {disc_dev:.1e} (target 1e-8 unattainable, xfail below), "
              f"{dt:.1f}s")
    VERDICTS[4] = ("PASS" if ok else "FAIL", "annulus kernels (disc-limit part XFAIL)", detail)
    assert ok, detail


@pytest.mark.xfail(strict=True, reason=(
    "the exact p=8 annulus kernel differs from the disc kernel by about e^-16 * 1.5/pi "
    "= 5.4e-8 at z=0.5 (first image term), so agreement below 1e-8 cannot hold; "
    "the deviation is checked against that closed form in test_kernels"))
def test_criterion_04_disc_limit():
    dev = abs(schwarz_annulus(8.0, "dirichlet-const", 1.0, 0.5) - schwarz_disc(1.0, 0.5))
    assert dev < 1e-8


def _annulus_cases():
    for p in (1.0, 2.0):
        for b in (1.0, 2.5, 4.5):
            yield DrivingModel(Variant.ANNULUS_NEUMANN_RHO, modulus=p, rho=(1.0,),
                               marked=(np.exp(1j * b),))
            yield DrivingModel(Variant.ANNULUS_DIRICHLET, modulus=p, mu_inner=0.3,
                               marked=(np.exp(1j * b),))
            yield DrivingModel(Variant.ANNULUS_INNER, modulus=p, marked=(np.exp(-p + 1j * b),))


def test_criterion_05_annulus_drifts():
    t0 = time.perf_counter()
    n_ok, n, slopes = 0, 0, []
    for d in _annulus_cases():
        f, mk, t = FieldModel(d), d.marked_lift(), 0.2
        D = float(d.drift(np.array(0.0), mk, t))
        good = singularity_profile(f, d, 0.0, mk, t).bounded
        for fac in (0.9, 1.1):
            prof = singularity_profile(f, d, 0.0, mk, t, drift=fac * D)
            slopes.append(prof.slope)
            good &= prof.divergent
        n_ok += bool(good)
        n += 1
    dt = time.perf_counter() - t0
    verdict(5, "annulus drifts", n_ok == n and dt < 300,
            f"{n_ok}/{n} cases bounded at D and divergent at +/-10% "
            f"(worst slope {max(slopes):.2f}), {dt:.1f}s")


_MC_CASES = [
    ("chordal", dict(), [0.5 + 1j, -1 + 0.7j]),
    ("dipolar", dict(), [0.5 + 1.5j, -1 + 1j]),
    ("radial", dict(), [0.3 + 0.2j, -0.4j]),
    ("annulus-standard", dict(modulus=1.0), [0.7 * np.exp(1j), 0.8 * np.exp(-2j)]),
    ("annulus-dirichlet", dict(modulus=1.0, mu_inner=0.0, marked=(np.exp(2.5j),)),
     [0.7 * np.exp(1j), 0.8 * np.exp(-2j)]),
]


@pytest.mark.slow
def test_criterion_06_martingale_mc():
    t0 = time.perf_counter()
    worst, weakest_control = 0.0, np.inf
    for variant, kw, z in _MC_CASES:
        d = DrivingModel(variant, **kw)
        field = FieldModel(d)
        reps = martingale_mc(field, d, z, pairs=[(0, 1)], n_paths=10_000, seed=1)
        worst = max(worst, max(abs(r.z_score) for r in reps))
        for kappa in (3.0, 5.0):
            ctl = martingale_mc(field, DrivingModel(variant, kappa=kappa, **kw), z, pairs=[(0, 1)],
                                n_paths=10_000, seed=2)
            zmax = max(abs(r.z_score) for r in ctl)
            weakest_control = min(weakest_control, zmax)
    dt = time.perf_counter() - t0
    verdict(6, "martingale MC", worst <= 3 and weakest_control > 5 and dt < 1800,
            f"max |z| {worst:.2f} (<=3) over 5 variants at n=1e4; weakest kappa+/-1 control "
            f"max |z| {weakest_control:.1f} (>5); {dt:.0f}s")


@pytest.mark.slow
def test_criterion_07_winding_bridge():
    d = DrivingModel(Variant.ANNULUS_INNER, modulus=2.0, marked=(np.exp(-2 + 1j),))
    r = winding_bridge_check(d, n_paths=2000, seed=3, lead=0.01)
    verdict(7, "winding bridge", abs(r.z_score) <= 3,
            f"mean {r.estimate:.4f} vs bridge {r.target:.4f}, |z| {abs(r.z_score):.2f} (<=3)")


@pytest.mark.slow
def test_criterion_08_general_kappa():
    mono = 0.0
    for kappa in (2.0, 8.0):
        d = DrivingModel(Variant.DIRICHLET_GENERAL_KAPPA, kappa=kappa, base=Variant.ANNULUS_INNER,
                         modulus=1.0, marked=(np.exp(-1 + 2.0j),))
        mono = max(mono, abs(FieldModel(d).monodromy() - (kappa - 6) * lambda_kappa(kappa)))
    d = DrivingModel(Variant.DIRICHLET_GENERAL_KAPPA, kappa=8.0, base=Variant.ANNULUS_DIRICHLET,
                     modulus=1.0, mu_inner=0.0, marked=(np.exp(2.5j),))
    reps = martingale_mc(FieldModel(d), d, [0.7 * np.exp(1j), 0.8 * np.exp(-2j)], pairs=[(0, 1)],
                         n_paths=10_000, seed=1)
    zmax = max(abs(r.z_score) for r in reps)
    verdict(8, "kappa != 4 Dirichlet", mono < 1e-6 and zmax <= 3,
            f"monodromy deviation {mono:.1e} (<1e-6), wrapped kappa=8 MC max |z| {zmax:.2f} (<=3)")


def test_criterion_09_commutation():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        a, b = np.sort(rng.uniform(-3, 3, 2))
        b = max(b, a + 0.2)
        z = complex(rng.uniform(-3, 3), rng.uniform(0.3, 3))
        worst = max(worst, abs(commutation_delta(chordal_probe(1.0, b, a, z))))
    probe = strip_probe(1.0, -1.0, 1.0, 1j * np.pi / 2)
    delta = commutation_delta(probe)
    rel = abs(two_ordering_limit(probe) - delta) / abs(delta)
    verdict(9, "commutation", worst < 1e-10 and abs(delta) > 1e-3 and rel < 0.05,
            f"chordal max {worst:.1e} (<1e-10), strip |delta| {abs(delta):.2e} (>1e-3), "
            f"two-ordering rel {rel:.1e} (<5%)")


@pytest.mark.slow
def test_criterion_10_capacity():
    rates = {}
    for name, dom, x in [("half-plane", half_plane(), 0.0), ("disc", disc(), 1.0 + 0j),
                         ("strip", strip(), 0.0), ("annulus", annulus(1.0), 1.0 + 0j)]:
        rates[name] = capacity_check(dom, x, [0.04, 0.01])[-1]
    worst = max(abs(r - 2) / 2 for r in rates.values())
    verdict(10, "capacity rate", worst < 0.02,
            ", ".join(f"{k} {v:.4f}" for k, v in rates.items()) + f" (worst {worst:.2%}, <2%)")


@pytest.mark.slow
def test_criterion_11_dgff():
    reps = coupling_test("chordal", resolution=128, n=2000, seed=0)
    zmax = max(abs(r.z_score) for r in reps)
    # a wrong jump height must be visible at the same sample size
    ctl = coupling_test("chordal", resolution=128, n=2000, seed=0, jump_factor=1.5)
    zctl = max(abs(r.z_score) for r in ctl)
    # the level-line statistic converges slowly in the mesh; 256^2 is used for the
    # criterion and the coarser values are recorded to show the bias shrinking
    coarse = {}
    for res in (64, 128):
        coarse[res] = estimate_kappa(level_line_curves(500, res, 2.0, seed=0))[0].estimate
    k = estimate_kappa(level_line_curves(500, resolution=256, half_width=2.0, seed=0))[0]
    verdict(11, "DGFF coupling", zmax <= 3 and zctl > 5 and 3.5 <= k.estimate <= 4.5,
            f"coupling max |z| {zmax:.2f} (<=3) at n=2000 on 128^2, jump x1.5 control "
            f"{zctl:.1f}; level-line kappa {k.estimate:.2f} +/- {k.std_error:.2f} from "
            f"{k.params['n_curves']} interfaces on 256^2 (in [3.5, 4.5]); "
            f"64^2 {coarse[64]:.2f}, 128^2 {coarse[128]:.2f}")


def _cli(tmp_path, name, command, config, seed):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(json.dumps(config))
    code = main([command, "--config", str(cfg), "--out", str(tmp_path / name), "--seed", str(seed)])
    return code, sorted(tmp_path.glob(f"{name}.*[!g]"))


def test_criterion_12_determinism(tmp_path):
    runs = [
        ("verify-martingale", {"n": 2000, "dt": 1e-3}),
        ("simulate", {"variant": "annulus-standard", "modulus": 1.0, "n": 500, "dt": 1e-3,
                      "T": 0.3, "points": [[0.5, 0.2]]}),
        ("dgff-couple", {"resolution": 32, "n_samples": 100, "dt": 5e-3}),
        ("dgff-sample", {"resolution": 32, "n_samples": 3}),
        ("verify-hadamard", {"domain": "half-plane"}),
    ]
    same = True
    for k, (command, config) in enumerate(runs):
        a_code, a = _cli(tmp_path, f"a{k}", command, config, 17)
        b_code, b = _cli(tmp_path, f"b{k}", command, config, 17)
        same &= a_code == b_code and len(a) == len(b) > 0
        same &= all(x.read_bytes() == y.read_bytes() for x, y in zip(a, b))
    verdict(12, "determinism", same,
            f"{len(runs)} commands rerun with the same seed: artifacts byte-identical")
