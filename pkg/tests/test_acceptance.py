"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to ``RESULTS``; conftest prints them in
the terminal summary. Run alone with::

    pytest tests/test_acceptance.py -v
"""

import json
import warnings

import numpy as np
import pytest

from oracles import (
    central_diff,
    central_grad,
    dct_matrix,
    gcv_dense,
    residual_dense,
    risk_on_grid,
    tikhonov_dense,
)
from tikreg.classic import DpConfig, gcv_value, gcv_value_multi, residual_norm_sq, select_dp, select_gcv_multi
from tikreg.cli import main as cli_main
from tikreg.filters import GsvdBasis, apply_filtered_solution, coefficients, tikhonov_filters
from tikreg.gsvd import gsvd
from tikreg.learn import (
    TrainingSet,
    empirical_risk,
    gn_assemble,
    gn_hessian_sq2norm,
    risk_derivative_scalar,
    train_multi,
    train_scalar,
)
from tikreg.measures import huber, pnorm, sq2norm
from tikreg.problems import (
    Problem,
    ProblemSpec,
    first_derivative_matrix,
    generate_dataset,
    relative_error,
    second_derivative_matrix,
)
from tikreg.cli import RunConfig, evaluate, pareto_curve, reconstruct, train_method
from tikreg.structured import solve_multi_tikhonov_general, surrogate_parameters

RESULTS = []
MEASURES = {"huber": huber(1e-4), "2-norm": sq2norm(), "5-norm": pnorm(5)}


def record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# --------------------------------------------------------------------- data


@pytest.fixture(scope="module")
def example1():
    spec = ProblemSpec("deconv1d", (256,), noise_range=(0.2, 0.25), seed=1)
    pb = Problem(spec)
    train = generate_dataset(spec, 1000, "training", pb)
    valid = generate_dataset(spec, 200, "validation", pb)
    return spec, pb, train, valid


@pytest.fixture(scope="module")
def example2():
    spec = ProblemSpec("deblur2d", (16, 16), bc="reflexive", noise_range=(0.1, 0.15), seed=2)
    pb = Problem(spec)
    train = generate_dataset(spec, 200, "training", pb)
    valid = generate_dataset(spec, 100, "validation", pb)
    return spec, pb, train, valid


def _mean_rre(basis, lam, ds, rho):
    co = coefficients(basis, ds.B)
    X = apply_filtered_solution(co, tikhonov_filters(basis, lam), basis)
    return float(np.mean(relative_error(X, ds.X, rho)))


# ---------------------------------------------------------------- criterion 1


def test_c01_gsvd_correctness():
    rng = np.random.default_rng(101)
    worst_rec, worst_cs, count = 0.0, 0.0, 0
    for m, n in [(4, 4), (8, 6), (16, 12), (32, 24), (64, 48)]:
        for Lfun in (first_derivative_matrix, second_derivative_matrix):
            L = Lfun(n)
            for _ in range(100):
                A = rng.standard_normal((m, n))
                f = gsvd(A, L)
                ra = np.linalg.norm(A - f.P * f.c @ f.Zinv) / np.linalg.norm(A)
                rl = np.linalg.norm(L - f.Pbar @ f.S() @ f.Zinv) / np.linalg.norm(L)
                cs = np.max(np.abs(f.c[: f.q] ** 2 + f.s**2 - 1))
                worst_rec = max(worst_rec, ra, rl)
                worst_cs = max(worst_cs, cs)
                count += 1
    record(
        "C1 GSVD correctness",
        worst_rec <= 1e-10 and worst_cs <= 1e-10,
        f"{count} pairs, max reconstruction residual {worst_rec:.2e}, max CS defect {worst_cs:.2e} (tol 1e-10)",
    )


# ---------------------------------------------------------------- criterion 2


def test_c02_filter_direct_equivalence():
    rng = np.random.default_rng(202)
    worst = 0.0
    for k in range(100):
        m, n = 20, 16
        A = rng.standard_normal((m, n))
        L = first_derivative_matrix(n) if k % 2 == 0 else second_derivative_matrix(n)
        b = rng.standard_normal(m)
        lam = 10 ** rng.uniform(-3, 2)
        basis = GsvdBasis(gsvd(A, L))
        x = apply_filtered_solution(coefficients(basis, b), tikhonov_filters(basis, [lam]), basis)
        ref = tikhonov_dense(A, L, b, lam)
        worst = max(worst, np.linalg.norm(x - ref) / np.linalg.norm(ref))

    spec = ProblemSpec("deblur2d", (16, 16), bc="reflexive", noise_range=(0.1, 0.15), seed=22)
    pb = Problem(spec)
    ds = generate_dataset(spec, 4, problem=pb)
    A, Ls = pb.op.linear_operators()
    basis = pb.op.basis()
    worst_cg = 0.0
    for it in ds.items:
        lam = 10 ** rng.uniform(-2, 0, 4)
        xf = apply_filtered_solution(coefficients(basis, it.b), tikhonov_filters(basis, lam), basis)
        xc = solve_multi_tikhonov_general(A, Ls, it.b, lam, tol=1e-12)
        worst_cg = max(worst_cg, np.linalg.norm(xc - xf) / np.linalg.norm(xf))
    record(
        "C2 filter/direct equivalence",
        worst <= 1e-8 and worst_cg <= 1e-7,
        f"GSVD vs normal equations max rel {worst:.2e} (tol 1e-8); CG vs multi-filter 16x16 max rel {worst_cg:.2e} (tol 1e-7)",
    )


# ---------------------------------------------------------------- criterion 3


def test_c03_derivative_fidelity(example2):
    rng = np.random.default_rng(303)
    spec1 = ProblemSpec("deconv1d", (64,), noise_range=(0.1, 0.2), seed=33)
    pb1 = Problem(spec1)
    ds1 = generate_dataset(spec1, 20, problem=pb1)
    ts1 = TrainingSet(ds1.B, ds1.X, pb1.gsvd_basis())
    _, pb2, train2, _ = example2
    ts2 = TrainingSet(train2.B[:20], train2.X[:20], pb2.op.basis())

    worst_s, worst_m = 0.0, 0.0
    for name, rho in MEASURES.items():
        for lam in 10 ** rng.uniform(-2, 1.5, 20):
            fd = central_diff(lambda l: empirical_risk(ts1, [l], rho), lam, 1e-6 * (1 + lam))
            d = risk_derivative_scalar(ts1, lam, rho)
            worst_s = max(worst_s, abs(d - fd) / abs(fd))
        for _ in range(20):
            lam = 10 ** rng.uniform(-2, 0.5, 4)
            g = gn_assemble(ts2, lam, rho).g
            fd = central_grad(lambda l: empirical_risk(ts2, l, rho), lam)
            worst_m = max(worst_m, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    worst_h = 0.0
    for _ in range(20):
        lam = 10 ** rng.uniform(-2, 0.5, 4)
        H = gn_assemble(ts2, lam, sq2norm()).H
        Hc = gn_hessian_sq2norm(ts2, lam)
        worst_h = max(worst_h, np.linalg.norm(H - Hc) / np.linalg.norm(Hc))
    record(
        "C3 derivative fidelity",
        worst_s <= 1e-5 and worst_m <= 1e-5 and worst_h <= 1e-10,
        f"scalar f' vs FD {worst_s:.2e}, multi g vs FD {worst_m:.2e} (tol 1e-5); "
        f"closed-form H vs generic {worst_h:.2e} (tol 1e-10)",
    )


# ---------------------------------------------------------------- criterion 4


def test_c04_optimizer_optimality(example2):
    spec = ProblemSpec("deconv1d", (32,), noise_range=(0.1, 0.2), seed=44)
    pb = Problem(spec)
    ds = generate_dataset(spec, 10, problem=pb)
    ts = TrainingSet(ds.B, ds.X, pb.gsvd_basis())
    f = pb.gsvd_basis().factors
    grid = np.logspace(-6, 3, 10**5)[:, None]
    margins = []
    for name, rho in MEASURES.items():
        res = train_scalar(ts, rho)
        best = risk_on_grid(ts.gamma, f.Z, ts.x_true, f.c, f.s_full, grid, rho.value).min()
        margins.append((res.risk - best) / best)

    _, pb2, train2, _ = example2
    ts2 = TrainingSet(train2.B[:20], train2.X[:20], pb2.op.basis())
    N = 16
    C = np.kron(dct_matrix(N), dct_matrix(N))
    gamma = (ts2.b @ C.T) / pb2.op.c_spectrum.ravel()
    s = np.abs(pb2.op.s_spectra.reshape(4, -1).T)
    axis = np.logspace(-3, 1, 6)
    grid4 = np.array(np.meshgrid(axis, axis, axis, axis, indexing="ij")).reshape(4, -1).T
    for name, rho in MEASURES.items():
        res = train_multi(ts2, rho)
        best = risk_on_grid(gamma, C.T, ts2.x_true, pb2.op.c_spectrum.ravel(), s, grid4, rho.value).min()
        margins.append((res.risk - best) / best)
    worst = max(margins)
    record(
        "C4 optimizer optimality",
        worst <= 1e-12,
        f"max (f_opt - f_grid)/f_grid = {worst:.2e} over 10^5-point scalar and 6^4-point J=4 grids "
        f"for {len(MEASURES)} measures (<= 0 means optimizer beats grid)",
    )


# ---------------------------------------------------------------- criterion 5


def _example1_errors(spec, pb, train, valid, methods, K=None):
    out = {}
    ds = train if K is None else train.head(K)
    for method in methods:
        cfg = RunConfig(problem=spec, method=method, rho=sq2norm()).validated()
        params = train_method(cfg, pb, ds)
        errs, stats = evaluate(reconstruct(params, pb, valid), valid, sq2norm())
        out[method] = stats.mean
    return out


def test_c05_deconv1d_trends(example1):
    spec, pb, train, valid = example1
    e = _example1_errors(spec, pb, train, valid, ("opt-tik-svd", "opt-error-svd", "opt-tik-gsvd", "opt-error-gsvd"))
    ok1 = e["opt-error-gsvd"] <= e["opt-tik-gsvd"] <= 1.1 * e["opt-error-gsvd"]
    ok2 = e["opt-tik-svd"] >= 1.5 * e["opt-error-svd"]
    record(
        "C5 1D deconvolution trends",
        ok1 and ok2,
        "mean RRE " + ", ".join(f"{k} {v:.4e}" for k, v in e.items())
        + f"; Tik-GSVD/err-GSVD = {e['opt-tik-gsvd'] / e['opt-error-gsvd']:.3f} (need in [1, 1.1]), "
        f"Tik-SVD/err-SVD = {e['opt-tik-svd'] / e['opt-error-svd']:.2f} (need >= 1.5)",
    )


# ---------------------------------------------------------------- criterion 6


def test_c06_pareto_trend(example1):
    spec, pb, train, valid = example1
    sizes = (1, 2, 4, 8, 16, 32, 64)
    curves = {}
    for method in ("opt-tik-gsvd", "opt-error-svd"):
        cfg = RunConfig(problem=spec, method=method, rho=sq2norm()).validated()
        curves[method] = {K: m for K, m, _ in pareto_curve(cfg, pb, train, valid, sizes)}
    tik = np.array(list(curves["opt-tik-gsvd"].values()))
    spread = (tik.max() - tik.min()) / tik.min()
    err = curves["opt-error-svd"]
    ratio = err[1] / err[64]
    record(
        "C6 Pareto trend",
        spread < 0.10 and ratio >= 1.5,
        f"opt-Tik-GSVD spread over K=1..64 {spread:.2%} (need < 10%); "
        f"opt-error-SVD K=1/K=64 = {ratio:.2f} (need >= 1.5)",
    )


# ---------------------------------------------------------------- criterion 7


def test_c07_stencil_trends(example2):
    spec, pb, train, valid = example2
    op = pb.op
    lines, ok = [], True
    for mname, rho in MEASURES.items():
        e = {}
        for j, name in enumerate(op.stencils):
            basis = op.basis([j])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lam = train_scalar(TrainingSet(train.B, train.X, basis), rho).lam
            e[name] = _mean_rre(basis, lam, valid, rho)
        basis = op.basis()
        e["multi"] = _mean_rre(basis, train_multi(TrainingSet(train.B, train.X, basis), rho).lam, valid, rho)
        good = e["l4"] <= min(e["l1"], e["l2"], e["l3"]) and e["multi"] <= 1.1 * e["l4"]
        ok &= good
        lines.append(
            f"{mname}: " + " ".join(f"{k}={v:.3e}" for k, v in e.items()) + f" multi/L4={e['multi'] / e['l4']:.3f}"
        )
    record("C7 2D stencil trends", ok, "; ".join(lines))


# ---------------------------------------------------------------- criterion 8


def test_c08_surrogate_transfer(example2):
    spec, pb, train, valid = example2
    rho = sq2norm()
    ts = TrainingSet(train.B, train.X, pb.op.basis())
    lam_hat = surrogate_parameters(pb.op, ts, rho).lam
    lam_orig = train_multi(ts, rho).lam
    A, Ls = pb.op.linear_operators("reflexive")
    vsub = valid.head(50)

    def cg_mean(lam):
        X = np.array([solve_multi_tikhonov_general(A, Ls, b, lam, tol=1e-10) for b in vsub.B])
        return float(np.mean(relative_error(X, vsub.X, rho)))

    e_hat, e_orig = cg_mean(lam_hat), cg_mean(lam_orig)
    record(
        "C8 surrogate transfer",
        e_hat <= 1.2 * e_orig,
        f"validation mean RRE with surrogate lambda {e_hat:.4e}, with original lambda {e_orig:.4e}, "
        f"ratio {e_hat / e_orig:.3f} (need <= 1.2)",
    )


# ---------------------------------------------------------------- criterion 9


def test_c09_classic_rules(example2):
    rng = np.random.default_rng(909)
    worst_dp = 0.0
    for _ in range(20):
        A = rng.standard_normal((40, 30))
        L = first_derivative_matrix(30)
        x = np.cumsum(rng.standard_normal(30)) / 5
        noise = 0.1 * rng.standard_normal(40)
        b = A @ x + noise
        eta = float(noise @ noise)
        f = gsvd(A, L)
        lam = select_dp(f, b, DpConfig(tau=1.0, eta=eta)).lam[0]
        worst_dp = max(worst_dp, abs(residual_norm_sq(f, b, lam) - eta) / eta)

    worst_gcv = 0.0
    for k in range(20):
        A = rng.standard_normal((12, 10))
        L = first_derivative_matrix(10) if k % 2 == 0 else second_derivative_matrix(10)
        b = rng.standard_normal(12)
        f = gsvd(A, L)
        for lam in 10 ** rng.uniform(-3, 2, 5):
            ref = gcv_dense(A, L, b, lam)
            worst_gcv = max(worst_gcv, abs(gcv_value(f, b, lam) - ref) / ref)

    _, pb2, _, valid = example2
    b = valid.items[0].b
    res = select_gcv_multi(pb2.op, b)
    axis = np.logspace(-4, 2, 10)
    grid = np.array(np.meshgrid(axis, axis, axis, axis, indexing="ij")).reshape(4, -1).T
    gmin = min(gcv_value_multi(pb2.op, b, l) for l in grid)
    margin = (res.objective_value - gmin) / gmin
    record(
        "C9 classic-rule sanity",
        worst_dp <= 1e-10 and worst_gcv <= 1e-8 and margin <= 1e-12,
        f"DP residual equation max rel {worst_dp:.2e} (tol 1e-10); GCV vs dense trace 12x10 max rel "
        f"{worst_gcv:.2e} (tol 1e-8); multi-GCV minus 10^4-grid min (rel) {margin:.2e} (need <= 0)",
    )


# --------------------------------------------------------------- criterion 10


def _pipeline(root):
    cfg1 = {
        "version": 1,
        "problem": {"kind": "deconv1d", "shape": [64], "noise_range": [0.2, 0.25], "seed": 10},
        "method": "opt-tik-gsvd",
        "training": {"count": 40},
        "validation": {"count": 10},
    }
    cfg2 = {
        "version": 1,
        "problem": {"kind": "deblur2d", "shape": [8, 8], "bc": "reflexive", "noise_range": [0.1, 0.15], "seed": 10},
        "method": "opt-tik-multi",
        "rho": "pnorm:5",
        "training": {"count": 10},
        "validation": {"count": 4},
    }
    root.mkdir()
    for name, cfg in (("one", cfg1), ("two", cfg2)):
        c = root / f"{name}.json"
        c.write_text(json.dumps(cfg))
        d, o = str(root / f"data_{name}"), root / f"out_{name}"
        steps = [
            ["generate", "--config", str(c), "--out", d],
            ["train", "--config", str(c), "--data", d, "--out", str(o / "params.json")],
            ["reconstruct", "--config", str(c), "--data", d, "--params", str(o / "params.json"), "--out", str(o / "recon.csv")],
            ["evaluate", "--config", str(c), "--data", d, "--recon", str(o / "recon.csv"), "--out", str(o / "eval")],
            ["pareto", "--config", str(c), "--data", d, "--sizes", "1,2,4,8", "--out", str(o / "pareto.csv")],
            ["picard", "--config", str(c), "--data", d, "--params", str(o / "params.json"), "--out", str(o / "picard.csv")],
        ]
        if name == "one":
            steps += [
                ["train", "--config", str(c), "--data", d, "--method", "opt-error-gsvd", "--out", str(o / "filters.json")],
                ["select", "--config", str(c), "--data", d, "--method", "gcv", "--out", str(o / "gcv.json")],
                ["select", "--config", str(c), "--data", d, "--method", "dp", "--out", str(o / "dp.json")],
                ["gsvd-info", "--config", str(c), "--out", str(o / "gsvd.csv")],
            ]
        else:
            steps += [["train", "--config", str(c), "--data", d, "--method", "surrogate-multi", "--out", str(o / "sur.json")]]
        for s in steps:
            assert cli_main(s) == 0, s
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c10_determinism(tmp_path):
    a = _pipeline(tmp_path / "run1")
    b = _pipeline(tmp_path / "run2")
    diff = [str(k) for k in a if a[k] != b.get(k)]
    record(
        "C10 determinism",
        set(a) == set(b) and not diff,
        f"{len(a)} output files compared byte for byte, {len(diff)} differ",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
