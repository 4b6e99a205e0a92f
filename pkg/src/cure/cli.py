"""Experiment driver: synth, fit, eval, landscape, sweep.

Configuration is a flat INI file; every command is deterministic given
(config, seed) and stamps its outputs with the config hash and seed.  Data
CSVs keep the bare ``f0,...,f{d-1}[,label]`` format, so run metadata lives in
JSON sidecars instead of header comments.

Exit codes: 0 success, 2 validation error, 3 optimizer budget exceeded,
4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation, landscape, mixture, pgd
from .loss import LossSpec
from .mixture import CsvFormatError, MixtureParams, derive_seed
from .objective import EmpiricalObjective, Gamma

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def _jsonable(obj):
    """Replace non-finite floats with null so emitted JSON stays strict."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    return obj


DEFAULT_CONFIG = """\
[instance]
d = 10
mu = e1:0.5
mu0 = zero
sigma = iso:0.1
noise = two_point
kappa_excess = 1.0

[loss]
a = 2.0
b = 4.0
lambda = 1.0

[objective]
target_shift = 0.0

[pgd]
schedule = practical

[experiment]
n = 2000
seed = 0

[sweep]
n_grid = 2000,8000,32000
d_grid = 10
trials = 20
"""


def _parse_vector(spec: str, d: int) -> np.ndarray:
    spec = spec.strip()
    if spec == "zero":
        return np.zeros(d)
    if spec.startswith("e1:"):
        v = np.zeros(d)
        v[0] = float(spec[3:])
        return v
    vals = np.array([float(s) for s in spec.split(",")], dtype=float)
    if vals.shape != (d,):
        raise ConfigError(f"vector {spec!r} has {vals.size} entries, expected {d}")
    return vals


def _parse_matrix(spec: str, d: int) -> np.ndarray:
    spec = spec.strip()
    if spec.startswith("iso:"):
        return float(spec[4:]) * np.eye(d)
    if spec.startswith("diag:"):
        vals = np.array([float(s) for s in spec[5:].split(",")], dtype=float)
        if vals.shape != (d,):
            raise ConfigError(f"diag matrix {spec!r} needs {d} entries")
        return np.diag(vals)
    vals = np.array([float(s) for s in spec.split(",")], dtype=float)
    if vals.size != d * d:
        raise ConfigError(f"matrix {spec!r} needs {d * d} entries")
    return vals.reshape(d, d)


@dataclass
class ExperimentConfig:
    parser: configparser.ConfigParser
    config_hash: str

    # ------------------------------------------------------------------ #
    def _get(self, section: str, key: str, fallback: str | None = None) -> str:
        try:
            return self.parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is None:
                raise ConfigError(f"missing config key [{section}] {key}") from None
            return fallback

    @property
    def d(self) -> int:
        return int(self._get("instance", "d"))

    def instance_for(self, d: int | None = None) -> MixtureParams:
        d = self.d if d is None else d
        kind = self._get("instance", "noise", "two_point")
        if kind == "two_point":
            noise = mixture.make_two_point_radial(
                d, float(self._get("instance", "kappa_excess", "1.0"))
            )
        elif kind == "gaussian":
            noise = mixture.gaussian_radial(d)
        else:
            raise ConfigError(f"unknown noise kind {kind!r}")
        try:
            return MixtureParams(
                mu0=_parse_vector(self._get("instance", "mu0", "zero"), d),
                mu=_parse_vector(self._get("instance", "mu"), d),
                sigma=_parse_matrix(self._get("instance", "sigma", "iso:1.0"), d),
                noise=noise,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def loss_spec(self) -> LossSpec:
        try:
            return LossSpec(
                a=float(self._get("loss", "a", "2.0")),
                b=float(self._get("loss", "b", "4.0")),
                lam=float(self._get("loss", "lambda", "1.0")),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def target_shift(self) -> float:
        return float(self._get("objective", "target_shift", "0.0"))

    @property
    def schedule(self) -> str:
        s = self._get("pgd", "schedule", "practical")
        if s not in ("practical", "theorem"):
            raise ConfigError(f"pgd schedule must be practical|theorem, got {s!r}")
        return s

    def pgd_overrides(self) -> dict:
        out = {}
        if self.parser.has_section("pgd"):
            for key in ("c_pgd", "delta_pgd", "eps", "eta"):
                if self.parser.has_option("pgd", key):
                    out[key] = self.parser.getfloat("pgd", key)
            if self.parser.has_option("pgd", "max_iters"):
                out["max_iters"] = self.parser.getint("pgd", "max_iters")
        return out

    @property
    def n(self) -> int:
        return int(self._get("experiment", "n", "2000"))

    @property
    def seed(self) -> int:
        return int(self._get("experiment", "seed", "0"))

    def sweep_grid(self) -> tuple[list[int], list[int], int]:
        ns = [int(s) for s in self._get("sweep", "n_grid", "").split(",") if s.strip()]
        ds = [int(s) for s in self._get("sweep", "d_grid", "").split(",") if s.strip()]
        trials = int(self._get("sweep", "trials", "0"))
        if not ns or not ds or trials < 1:
            raise ConfigError("sweep grid must be nonempty with trials >= 1")
        return ns, ds, trials


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        text = DEFAULT_CONFIG
    else:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"config file {path} does not exist")
        text = p.read_text()
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return ExperimentConfig(parser=parser, config_hash=digest)


def build_pgd_config(
    obj: EmpiricalObjective, cfg: ExperimentConfig, seed: int
) -> pgd.PgdConfig:
    over = cfg.pgd_overrides()
    builder = pgd.practical_config if cfg.schedule == "practical" else pgd.default_config
    kwargs = {"seed": seed}
    for key in ("eps", "eta", "c_pgd", "max_iters"):
        if key in over:
            kwargs[key] = over[key]
    if cfg.schedule == "practical" and "delta_pgd" in over:
        kwargs["delta_pgd"] = over["delta_pgd"]
    return builder(obj, **kwargs)


# ---------------------------------------------------------------------- #
# commands


def cmd_synth(cfg: ExperimentConfig, out_dir: Path, seed: int | None, n: int | None) -> int:
    seed = cfg.seed if seed is None else seed
    n = cfg.n if n is None else n
    params = cfg.instance_for()
    ds = mixture.sample(params, n, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    mixture.save_csv(ds, out_dir / "data.csv")
    meta = {
        "config_hash": cfg.config_hash,
        "seed": seed,
        "n": n,
        "d": params.d,
        "params_hash": params.digest(),
    }
    (out_dir / "data.meta.json").write_text(json.dumps(meta, sort_keys=True))
    print(f"wrote {out_dir / 'data.csv'} ({n} rows, d={params.d})")
    return EXIT_OK


def cmd_fit(
    data_path: Path, cfg: ExperimentConfig, out_dir: Path, seed: int | None
) -> int:
    seed = cfg.seed if seed is None else seed
    ds = mixture.load_csv(data_path)
    obj = EmpiricalObjective(ds, cfg.loss_spec(), cfg.target_shift)
    run_cfg = build_pgd_config(obj, cfg, seed)
    gamma, trace = pgd.run_objective(obj, run_cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    grad_norm = float(np.linalg.norm(obj.gradient(gamma)))
    payload = {
        "alpha": gamma.alpha,
        "beta": [float(b) for b in gamma.beta],
        "meta": {
            "config_hash": cfg.config_hash,
            "seed": seed,
            "iters": trace.iter_count,
            "grad_norm": grad_norm,
            "g_thres": trace.derived.g_thres,
            "outcome": trace.outcome,
            "schedule": cfg.schedule,
        },
    }
    (out_dir / "gamma.json").write_text(json.dumps(payload, sort_keys=True))
    pgd.export_trace_csv(trace, out_dir / "trace.csv")
    print(
        f"fit: {trace.outcome} after {trace.iter_count} iterations, "
        f"|grad|={grad_norm:.3e}"
    )
    if trace.outcome != pgd.RETURNED_CANDIDATE:
        return EXIT_BUDGET
    return EXIT_OK


def _load_gamma(path: Path) -> Gamma:
    payload = json.loads(Path(path).read_text())
    return Gamma(alpha=float(payload["alpha"]), beta=np.array(payload["beta"], dtype=float))


def cmd_eval(
    data_path: Path,
    gamma_path: Path | None,
    cfg: ExperimentConfig | None,
    out_path: Path,
    baseline: str | None,
    seed: int,
    n_mc: int,
) -> int:
    ds = mixture.load_csv(data_path)
    if ds.labels is None:
        raise ConfigError("evaluation requested but the data file has no label column")
    if baseline == "kmeans":
        pred = evaluation.kmeans_baseline(ds, seed=seed)
        rate, sign = evaluation.labels_misclass(pred, ds.labels)
        report = evaluation.EvalReport(
            misclass_rate=rate, sign=sign, n=ds.n, method="kmeans"
        )
    else:
        if baseline == "pca":
            g = evaluation.pca_baseline(ds)
            method = "pca"
        else:
            if gamma_path is None:
                raise ConfigError("need --gamma unless a baseline is selected")
            g = _load_gamma(gamma_path)
            method = "cure"
        if g.d != ds.d:
            raise ConfigError(f"gamma has d={g.d} but data has d={ds.d}")
        report = evaluation.empirical_misclass(g, ds)
        report.method = method
        if cfg is not None:
            params = cfg.instance_for(ds.d)
            excess, _ = evaluation.excess_risk_mc(g, params, n_mc=n_mc, seed=seed)
            report.excess_risk = excess
            report.estimation_error = landscape.minimizer_error(g, params)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_json())
    print(report.to_json())
    return EXIT_OK


def cmd_landscape(
    cfg: ExperimentConfig,
    out_dir: Path,
    mode: str,
    trials: int,
    seed: int | None,
    jobs: int,
) -> int:
    seed = cfg.seed if seed is None else seed
    params = cfg.instance_for()
    if not params.noise.is_leptokurtic:
        warnings.warn(
            "landscape experiment with non-leptokurtic noise: the predicted "
            "critical structure is outside the model assumptions"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.jsonl"
    rows: list[dict] = []
    if mode == "oracle":
        rows, summary = _oracle_audit(params, trials, seed)
    else:
        rows, summary = _empirical_audit(cfg, params, trials, seed, jobs)
    with open(report_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(_jsonable(row), sort_keys=True) + "\n")
        fh.write(json.dumps(_jsonable({"summary": summary}), sort_keys=True) + "\n")
    print(json.dumps(_jsonable({"summary": summary}), sort_keys=True))
    return EXIT_OK


def _oracle_audit(params: MixtureParams, n_samples: int, seed: int):
    pq = landscape.whitened_oracle(params)
    white = MixtureParams(
        mu0=np.zeros(params.d),
        mu=pq.mu,
        sigma=np.eye(params.d),
        noise=params.noise,
    )
    predicted = landscape.predicted_critical_sets(white, pq.mz)
    rng = np.random.default_rng(seed)
    points = [("zero", Gamma.from_vector(np.zeros(pq.dim)))]
    points.append(("min_plus", pq.minimizer()))
    points.append(("min_minus", -pq.minimizer()))
    for k in range(n_samples):
        points.append((f"saddle_{k}", predicted.saddle.sample(rng)))
    for k in range(n_samples):
        v = rng.standard_normal(pq.dim)
        v *= 3.0 * rng.random() ** (1.0 / pq.dim) / np.linalg.norm(v)
        points.append((f"random_{k}", Gamma.from_vector(v)))
    rows = []
    counts: dict[str, int] = {}
    worst_anchor_grad = 0.0
    for name, g in points:
        rep = landscape.classify_point(pq, g, predicted=predicted)
        row = rep.to_dict()
        row["point"] = name
        rows.append(row)
        counts[rep.classification] = counts.get(rep.classification, 0) + 1
        if name.startswith(("min_", "saddle_", "zero")):
            worst_anchor_grad = max(worst_anchor_grad, rep.grad_norm)
    summary = {
        "mode": "oracle",
        "counts": counts,
        "worst_predicted_grad_norm": worst_anchor_grad,
        "seed": seed,
    }
    return rows, summary


def _empirical_cell(args: tuple) -> dict:
    config_text, trial, seed = args
    cfg = _config_from_text(config_text)
    params = cfg.instance_for()
    n = 200 * params.d
    cell_seed = derive_seed(seed, trial)
    ds = mixture.sample(params, n, cell_seed)
    obj = EmpiricalObjective(ds, cfg.loss_spec(), cfg.target_shift)
    run_cfg = build_pgd_config(obj, cfg, cell_seed)
    gamma, trace = pgd.run_objective(obj, run_cfg)
    rate_scale = np.sqrt(params.d * np.log(n / params.d) / n)
    rep = landscape.classify_point(
        obj,
        gamma,
        grad_eps=rate_scale,
        eig_eta=0.5 * abs(landscape.predicted_saddle_curvature(params)),
    )
    row = rep.to_dict()
    row.update(
        trial=trial,
        n=n,
        seed=cell_seed,
        outcome=trace.outcome,
        est_error=landscape.minimizer_error(gamma, params),
    )
    return row


def _empirical_audit(cfg, params, trials: int, seed: int, jobs: int):
    args = [(_config_text(cfg), t, seed) for t in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_empirical_cell, args))
    else:
        rows = [_empirical_cell(a) for a in args]
    n_local = sum(1 for r in rows if r["classification"] == landscape.LOCAL_MIN)
    summary = {
        "mode": "empirical",
        "trials": trials,
        "local_min_fraction": n_local / trials,
        "median_est_error": float(np.median([r["est_error"] for r in rows])),
        "seed": seed,
    }
    return rows, summary


def _config_text(cfg: ExperimentConfig) -> str:
    import io

    buf = io.StringIO()
    cfg.parser.write(buf)
    return buf.getvalue()


def _config_from_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    return ExperimentConfig(
        parser=parser, config_hash=hashlib.sha256(text.encode()).hexdigest()[:16]
    )


def _sweep_cell(args: tuple) -> dict:
    config_text, n, d, trial, seed, bayes_rate = args
    cfg = _config_from_text(config_text)
    try:
        params = cfg.instance_for(d)
        cell_seed = derive_seed(seed, n, d, trial)
        ds = mixture.sample(params, n, cell_seed)
        obj = EmpiricalObjective(ds, cfg.loss_spec(), cfg.target_shift)
        run_cfg = build_pgd_config(obj, cfg, cell_seed)
        gamma, trace = pgd.run_objective(obj, run_cfg)
        report = evaluation.empirical_misclass(gamma, ds)
        return {
            "trial": trial,
            "n": n,
            "d": d,
            "method": "cure",
            "misclass": report.misclass_rate,
            "excess": report.misclass_rate - bayes_rate,
            "est_error": landscape.minimizer_error(gamma, params),
            "seed": cell_seed,
            "outcome": trace.outcome,
        }
    except Exception as exc:  # noqa: BLE001 - cell failures must not kill the sweep
        return {
            "trial": trial,
            "n": n,
            "d": d,
            "method": "cure",
            "misclass": float("nan"),
            "excess": float("nan"),
            "est_error": float("nan"),
            "seed": derive_seed(seed, n, d, trial),
            "outcome": f"error: {exc}",
        }


def cmd_sweep(cfg: ExperimentConfig, out_dir: Path, seed: int | None, jobs: int) -> int:
    seed = cfg.seed if seed is None else seed
    ns, ds_grid, trials = cfg.sweep_grid()
    out_dir.mkdir(parents=True, exist_ok=True)
    text = _config_text(cfg)

    bayes_rates = {}
    for d in ds_grid:
        params = cfg.instance_for(d)
        gb = mixture.bayes_classifier(params)
        bayes_rates[d] = evaluation.population_misclass_mc(
            gb, params, n_mc=200_000, seed=derive_seed(seed, d, 0xBA1E)
        ).rate

    cells = [
        (text, n, d, t, seed, bayes_rates[d])
        for d in ds_grid
        for n in ns
        for t in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]

    import csv as _csv

    with open(out_dir / "rates.csv", "w", newline="") as fh:
        writer = _csv.DictWriter(
            fh,
            fieldnames=[
                "trial", "n", "d", "method", "misclass", "excess",
                "est_error", "seed",
            ],
            extrasaction="ignore",
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    summary: dict = {"config_hash": cfg.config_hash, "seed": seed, "cells": {}}
    for d in ds_grid:
        med = {}
        for n in ns:
            errs = [
                r["est_error"]
                for r in rows
                if r["n"] == n and r["d"] == d and np.isfinite(r["est_error"])
            ]
            med[n] = float(np.median(errs)) if errs else float("nan")
        slope = float("nan")
        if len(ns) >= 2 and all(np.isfinite(list(med.values()))):
            slope = float(
                np.polyfit(np.log(list(med.keys())), np.log(list(med.values())), 1)[0]
            )
        summary["cells"][str(d)] = {
            "median_est_error": {str(n): med[n] for n in ns},
            "loglog_slope": slope,
            "bayes_rate_mc": bayes_rates[d],
        }
    (out_dir / "sweep_summary.json").write_text(json.dumps(_jsonable(summary), sort_keys=True))
    print(json.dumps(_jsonable(summary), sort_keys=True))
    failed = [r for r in rows if not np.isfinite(r["est_error"])]
    if failed:
        print(f"{len(failed)} cells failed", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cure", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config path (built-in default if omitted)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    common(p)
    p.add_argument("--n", type=int, default=None)

    p = sub.add_parser("fit", help="fit the affine embedding by perturbed descent")
    common(p)
    p.add_argument("--data", required=True)

    p = sub.add_parser("eval", help="evaluate a fitted embedding or a baseline")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--gamma", default=None)
    p.add_argument("--baseline", choices=["pca", "kmeans"], default=None)
    p.add_argument("--n-mc", type=int, default=200_000)

    p = sub.add_parser("landscape", help="audit the landscape predictions")
    common(p)
    p.add_argument("--mode", choices=["oracle", "empirical"], default="oracle")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("sweep", help="rate-scaling sweep over the (n, d) grid")
    common(p)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = Path(args.out)
        if args.command == "synth":
            return cmd_synth(cfg, out_dir, args.seed, args.n)
        if args.command == "fit":
            return cmd_fit(Path(args.data), cfg, out_dir, args.seed)
        if args.command == "eval":
            seed = cfg.seed if args.seed is None else args.seed
            has_truth = args.config is not None
            return cmd_eval(
                Path(args.data),
                Path(args.gamma) if args.gamma else None,
                cfg if has_truth else None,
                out_dir / "report.json",
                args.baseline,
                seed,
                args.n_mc,
            )
        if args.command == "landscape":
            return cmd_landscape(cfg, out_dir, args.mode, args.trials, args.seed, args.jobs)
        if args.command == "sweep":
            return cmd_sweep(cfg, out_dir, args.seed, args.jobs)
        raise ConfigError(f"unknown command {args.command}")
    except CsvFormatError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FileNotFoundError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
