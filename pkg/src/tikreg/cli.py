"""Command-line front end: ``tikreg <command> [options]``.

Commands
--------
generate     write seeded training/validation datasets
train        learn regularization parameters (or free filters) from training data
select       per-item classic parameter choice (GCV, DP, MSE oracle)
reconstruct  filtered reconstructions for a dataset
evaluate     per-item relative errors and box-plot statistics
pareto       validation error against training-set size
picard       spectral coefficients and filter factors of one item
gsvd-info    generalized singular values of the configured pair

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .classic import DpConfig, select_dp, select_gcv, select_gcv_multi, select_mse_oracle
from .errors import ConfigError, DataError, NumericalError, ShapeMismatch, SourceError
from .filters import (
    FilterVector,
    apply_filtered_solution,
    coefficients,
    learn_optimal_error_filters,
    tikhonov_filters,
)
from .learn import TrainingSet, train_multi, train_scalar
from .measures import ErrorMeasure, parse_measure, sq2norm
from .problems import (
    Dataset,
    Problem,
    ProblemSpec,
    generate_dataset,
    read_csv,
    relative_error,
    summary_stats,
    write_csv,
)
from .structured import surrogate_parameters

log = logging.getLogger("tikreg")

CONFIG_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

TRAINED = ("opt-tik-svd", "opt-tik-gsvd", "opt-error-svd", "opt-error-gsvd", "opt-tik-multi", "surrogate-multi")
SELECTED = ("gcv", "gcv-multi", "dp", "mse-oracle")
METHODS = TRAINED + SELECTED


def _method_ok(method, spec):
    """Return an error message if `method` cannot run on `spec`, else None."""
    one_param_2d = spec.kind == "deblur2d" and len(spec.stencils) == 1
    if method in ("opt-tik-svd", "opt-error-svd", "opt-error-gsvd"):
        if spec.kind != "deconv1d":
            return f"{method} needs a dense deconv1d problem"
    elif method in ("opt-tik-gsvd", "gcv", "dp", "mse-oracle"):
        if spec.kind != "deconv1d" and not one_param_2d:
            return f"{method} needs deconv1d, or deblur2d with exactly one stencil"
    elif method in ("opt-tik-multi", "gcv-multi"):
        if spec.kind != "deblur2d":
            return f"{method} needs a transform-diagonalizable deblur2d problem"
    elif method == "surrogate-multi":
        if spec.kind != "deblur2d" or spec.bc != "reflexive":
            return "surrogate-multi needs a deblur2d problem with reflexive bc"
    return None


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (schema in the README, section Configuration)."""

    problem: ProblemSpec
    method: str = "opt-tik-gsvd"
    rho: ErrorMeasure = field(default_factory=sq2norm)
    training_count: int = 100
    validation_count: int = 100
    dp: DpConfig = field(default_factory=DpConfig)
    dp_from_levels: bool = True
    pareto_sizes: tuple = (1, 2, 4, 8, 16, 32, 64)

    KEYS = ("version", "problem", "method", "rho", "training", "validation", "dp", "pareto")

    @classmethod
    def from_json(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(d) - set(cls.KEYS)
        if extra:
            raise ConfigError(f"config: unknown keys {sorted(extra)}")
        if d.get("version") != CONFIG_VERSION:
            raise ConfigError(f"config.version must be {CONFIG_VERSION}, got {d.get('version')!r}")
        if "problem" not in d:
            raise ConfigError("config.problem is required")
        problem = ProblemSpec.from_json(d["problem"])
        kw = {"problem": problem}
        if "method" in d:
            kw["method"] = d["method"]
        if "rho" in d:
            r = d["rho"]
            kw["rho"] = parse_measure(r) if isinstance(r, str) else ErrorMeasure.from_json(r)
        for role in ("training", "validation"):
            if role in d:
                sub = d[role]
                if not isinstance(sub, dict) or set(sub) - {"count"}:
                    raise ConfigError(f"config.{role} must be {{\"count\": int}}")
                count = sub.get("count", 100)
                if not isinstance(count, int) or count < 1:
                    raise ConfigError(f"config.{role}.count must be a positive integer")
                kw[f"{role}_count"] = count
        if "dp" in d:
            sub = d["dp"]
            if not isinstance(sub, dict) or set(sub) - {"tau", "eta", "sigma2"}:
                raise ConfigError("config.dp accepts only tau, eta, sigma2")
            kw["dp"] = DpConfig(**sub)
            kw["dp_from_levels"] = sub.get("eta") is None and sub.get("sigma2") is None
        if "pareto" in d:
            sub = d["pareto"]
            if not isinstance(sub, dict) or set(sub) - {"sizes"}:
                raise ConfigError("config.pareto accepts only sizes")
            kw["pareto_sizes"] = _parse_sizes(sub["sizes"])
        return cls(**kw).validated()

    def validated(self):
        if self.method not in METHODS:
            raise ConfigError(f"config.method must be one of {list(METHODS)}, got {self.method!r}")
        msg = _method_ok(self.method, self.problem)
        if msg:
            raise ConfigError(f"config.method: {msg}")
        if self.method.startswith("opt-error") and self.rho.kind != "sq2norm":
            raise ConfigError("config.rho: optimal-error filters are defined for sq2norm only")
        return self


def _parse_sizes(sizes):
    if isinstance(sizes, str):
        try:
            sizes = [int(v) for v in sizes.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"--sizes: {exc}") from exc
    sizes = tuple(int(v) for v in sizes)
    if not sizes or any(v < 1 for v in sizes):
        raise ConfigError("pareto sizes must be positive integers")
    return tuple(sorted(set(sizes)))


def load_config(path, method=None, rho=None, seed=None):
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    cfg = RunConfig.from_json(d)
    if seed is not None:
        cfg = replace(cfg, problem=replace(cfg.problem, seed=int(seed)))
    if rho is not None:
        cfg = replace(cfg, rho=parse_measure(rho))
    if method is not None:
        cfg = replace(cfg, method=method)
    return cfg.validated()


# --------------------------------------------------------------------- helpers


def _dump_json(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def write_table(path, header, rows):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _dataset(path, role):
    """Load `role` from a generate output directory, or a dataset directory itself."""
    if path is None:
        raise ConfigError("--data is required")
    p = Path(path)
    if (p / role / "manifest.json").exists():
        p = p / role
    if not (p / "manifest.json").exists():
        raise SourceError(f"no dataset manifest under {path}")
    return Dataset.read(p)


def _check_spec(cfg, ds):
    if ds.spec.shape != cfg.problem.shape or ds.spec.kind != cfg.problem.kind:
        raise ShapeMismatch(
            f"dataset is {ds.spec.kind}{ds.spec.shape}, config is {cfg.problem.kind}{cfg.problem.shape}"
        )


def basis_for(problem, method):
    """Spectral basis on which `method` trains and reconstructs."""
    if problem.spec.kind == "deconv1d":
        return problem.svd_basis() if method.endswith("-svd") else problem.gsvd_basis()
    return problem.transform_basis()


def train_method(cfg, problem, ds, basis=None):
    """Train ``cfg.method`` on `ds`; returns the params dictionary."""
    method, rho = cfg.method, cfg.rho
    basis = basis or basis_for(problem, method)
    ts = TrainingSet(ds.B, ds.X, basis)
    out = {"method": method, "rho": rho.to_json(), "basis": basis.tag, "K": ts.K}
    if method.startswith("opt-error"):
        fv, diag = learn_optimal_error_filters(ts)
        out["filter"] = fv.to_json()
        out["zero_indices"] = diag["zero_indices"]
        return out
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if method in ("opt-tik-svd", "opt-tik-gsvd"):
            res = train_scalar(ts, rho)
        elif method == "opt-tik-multi":
            res = train_multi(ts, rho)
        elif method == "surrogate-multi":
            res = surrogate_parameters(problem.op, ts, rho)
        else:
            raise ConfigError(f"{method} is a per-item selection rule; use the select command")
    out.update(res.to_json())
    out["warnings"] = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    return out


def select_method(cfg, problem, ds):
    """Per-item classic selection; returns a list of (lambda vector, objective)."""
    method = cfg.method
    basis = basis_for(problem, method)
    rows = []
    for k, item in enumerate(ds.items):
        if method == "gcv":
            res = select_gcv(basis, item.b)
        elif method == "gcv-multi":
            res = select_gcv_multi(basis, item.b)
        elif method == "mse-oracle":
            res = select_mse_oracle(basis, item.b, item.x)
        elif method == "dp":
            dp = cfg.dp
            if cfg.dp_from_levels:
                # expected noise energy from the recorded relative level
                level = item.noise_level
                dp = replace(dp, eta=level / (1.0 + level) * float(item.b @ item.b))
            res = select_dp(basis, item.b, dp)
        else:
            raise ConfigError(f"{method} is a trained method; use the train command")
        rows.append((res.lam, res.objective_value))
        log.info("item %d: lambda=%s", k, res.lam.tolist())
    return rows


def reconstruct(params, problem, ds):
    """Reconstructions (K, n) of the dataset's observations from a params dict."""
    method = params["method"]
    if method not in METHODS:
        raise ConfigError(f"params.method {method!r} unknown")
    basis = basis_for(problem, method)
    co = coefficients(basis, ds.B)
    if "filter" in params:
        fv = FilterVector.from_json(params["filter"])
        if fv.phi.shape != (basis.n,):
            raise ShapeMismatch(f"filter of length {fv.phi.size} for a basis of size {basis.n}")
        return apply_filtered_solution(co, fv, basis)
    if "per_item_lambda" in params:
        lams = [np.asarray(l, dtype=float) for l in params["per_item_lambda"]]
        if len(lams) != len(ds):
            raise ShapeMismatch(f"{len(lams)} selected parameters for {len(ds)} items")
        phi = np.array([tikhonov_filters(basis, l).phi for l in lams])
        return apply_filtered_solution(co, phi, basis)
    lam = np.asarray(params["lambda"], dtype=float)
    return apply_filtered_solution(co, tikhonov_filters(basis, lam), basis)


# -------------------------------------------------------------------- commands


def cmd_generate(args):
    cfg = load_config(args.config, seed=args.seed)
    out = Path(args.out or "data")
    problem = Problem(cfg.problem)
    paths = {}
    for role, count in (("training", cfg.training_count), ("validation", cfg.validation_count)):
        ds = generate_dataset(cfg.problem, count, role, problem)
        # relative to the output dir so reruns elsewhere produce identical bytes
        paths[role] = ds.write(out / role).relative_to(out).as_posix()
        log.info("wrote %d %s items to %s", count, role, out / role)
    _dump_json({"datasets": paths}, None if args.out is None else out / "generate.json")


def cmd_train(args):
    cfg = load_config(args.config, args.method, args.rho, args.seed)
    ds = _dataset(args.data, "training")
    _check_spec(cfg, ds)
    params = train_method(cfg, Problem(cfg.problem), ds)
    _dump_json(params, args.out)


def cmd_select(args):
    cfg = load_config(args.config, args.method, args.rho, args.seed)
    ds = _dataset(args.data, "validation")
    _check_spec(cfg, ds)
    rows = select_method(cfg, Problem(cfg.problem), ds)
    params = {
        "method": cfg.method,
        "per_item_lambda": [[float(v) for v in lam] for lam, _ in rows],
        "objective_value": [float(v) for _, v in rows],
    }
    _dump_json(params, args.out)


def _load_params(path):
    if path is None:
        raise ConfigError("--params is required")
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read params {path}: {exc}") from exc


def cmd_reconstruct(args):
    cfg = load_config(args.config, seed=args.seed)
    ds = _dataset(args.data, "validation")
    _check_spec(cfg, ds)
    X = reconstruct(_load_params(args.params), Problem(cfg.problem), ds)
    out = Path(args.out or "recon.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, X, prefix="x")


def evaluate(X, ds, rho):
    if X.shape != ds.X.shape:
        raise ShapeMismatch(f"reconstructions {X.shape} vs truth {ds.X.shape}")
    errs = relative_error(X, ds.X, rho)
    return errs, summary_stats(errs)


def cmd_evaluate(args):
    cfg = load_config(args.config, rho=args.rho, seed=args.seed)
    ds = _dataset(args.data, "validation")
    if args.recon is None:
        raise ConfigError("--recon is required")
    errs, stats = evaluate(read_csv(args.recon), ds, cfg.rho)
    out = Path(args.out or "evaluation")
    write_table(out / "errors.csv", ["item", "relative_error"], [(k, float(e)) for k, e in enumerate(errs)])
    row = stats.row()
    write_table(out / "stats.csv", list(row), [list(row.values())])
    _dump_json({"rho": cfg.rho.to_json(), "stats": row, "outliers": list(stats.outliers)}, out / "stats.json")


def pareto_curve(cfg, problem, train, valid, sizes):
    """Rows ``(K, mean RRE, std RRE)`` training on nested prefixes of `train`."""
    rows = []
    for K in sizes:
        if K > len(train):
            raise ShapeMismatch(f"pareto size {K} exceeds {len(train)} training items")
        params = train_method(cfg, problem, train.head(K))
        errs, stats = evaluate(reconstruct(params, problem, valid), valid, cfg.rho)
        rows.append((K, stats.mean, stats.std))
        log.info("K=%d mean=%.6e", K, stats.mean)
    return rows


def cmd_pareto(args):
    cfg = load_config(args.config, args.method, args.rho, args.seed)
    if cfg.method not in TRAINED:
        raise ConfigError(f"pareto needs a trained method, got {cfg.method}")
    sizes = _parse_sizes(args.sizes) if args.sizes else cfg.pareto_sizes
    train = _dataset(args.data, "training")
    valid = _dataset(args.data, "validation")
    _check_spec(cfg, train)
    rows = pareto_curve(cfg, Problem(cfg.problem), train, valid, sizes)
    write_table(args.out or "pareto.csv", ["K", "mean_rre", "std_rre"], rows)


def cmd_picard(args):
    cfg = load_config(args.config, args.method, seed=args.seed)
    ds = _dataset(args.data, "validation")
    _check_spec(cfg, ds)
    problem = Problem(cfg.problem)
    basis = basis_for(problem, cfg.method)
    if not 0 <= args.item < len(ds):
        raise ShapeMismatch(f"item {args.item} out of range for {len(ds)} items")
    item = ds.items[args.item]
    if args.params:
        params = _load_params(args.params)
        if "filter" in params:
            phi = np.asarray(params["filter"]["phi"], dtype=float)
        else:
            lam = params.get("lambda") or params["per_item_lambda"][args.item]
            phi = tikhonov_filters(basis, lam).phi
    else:
        phi = tikhonov_filters(basis, select_gcv(basis, item.b).lam).phi
    co = coefficients(basis, item.b)
    rows = [
        (i, float(np.abs(basis.c[i])), float(np.abs(co.proj[i])), float(phi[i]))
        for i in range(basis.n)
    ]
    write_table(args.out or "picard.csv", ["index", "c", "abs_proj", "phi"], rows)


def cmd_gsvd_info(args):
    cfg = load_config(args.config, seed=args.seed)
    if cfg.problem.kind != "deconv1d":
        raise ConfigError("gsvd-info needs a dense deconv1d problem")
    problem = Problem(cfg.problem)
    f = problem.gsvd_basis().factors
    from .gsvd import generalized_singular_values

    t, inf_idx = generalized_singular_values(f)
    s = f.s_full
    rows = [(i, float(f.c[i]), float(s[i]), float(t[i]), int(i in set(inf_idx))) for i in range(f.n)]
    write_table(args.out or "gsvd.csv", ["index", "c", "s", "t", "infinite"], rows)


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "select": cmd_select,
    "reconstruct": cmd_reconstruct,
    "evaluate": cmd_evaluate,
    "pareto": cmd_pareto,
    "picard": cmd_picard,
    "gsvd-info": cmd_gsvd_info,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="tikreg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "write training/validation datasets under --out",
        "train": "train --method on the training split of --data; params JSON to --out",
        "select": "per-item GCV / DP / MSE-oracle on the validation split; params JSON to --out",
        "reconstruct": "reconstruct the validation split with --params; CSV to --out",
        "evaluate": "relative errors of --recon against --data; CSV/JSON under --out",
        "pareto": "validation mean error against training size (--sizes); CSV to --out",
        "picard": "c_i, |p_i^T b|, phi_i for one item; CSV to --out",
        "gsvd-info": "generalized singular values of the configured pair; CSV to --out",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--data", help="dataset directory (generate output or one split)")
        p.add_argument("--params", help="params JSON from train or select")
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--method", choices=METHODS, help="override config.method")
        p.add_argument("--rho", help="override config.rho: sq2norm | pnorm:P | huber[:BETA]")
        p.add_argument("--seed", type=int, help="override config.problem.seed")
        p.add_argument("--sizes", help="comma-separated training sizes for pareto")
        p.add_argument("--recon", help="reconstruction CSV for evaluate")
        p.add_argument("--item", type=int, default=0, help="item index for picard")
        p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
