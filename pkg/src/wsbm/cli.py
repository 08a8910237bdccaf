"""Command-line front end: simulate, preprocess, fit, evaluate.

Exit codes: 0 success, 2 usage/config error, 3 input-validation error,
4 numerical failure.  Every option resolves as flag > config file (JSON
via --config) > environment variable (WSBM_<OPTION>) > built-in
default; unknown config keys are rejected.  All outputs are
byte-deterministic for a fixed seed and fixed inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as wio
from .blocks import NIGPrior
from .errors import ConfigError, InputError, NumericalError
from .finite import run_wsbm
from .gibbs import ChainConfig, chain_seed, make_rng
from .infinite import run_wsibm
from .metrics import ari, nmi
from .preprocess import PreprocessConfig, build_weight_matrix
from .simulate import PRESETS, SimulationSpec, preset_spec, simulate_network
from .summarize import (
    CommunityAssignment,
    accumulate_ppm,
    canonical_relabel,
    estimate_z_ppm,
    map_scores,
    merge_ppm,
    summarize_blocks,
)

ENV_PREFIX = "WSBM_"


def _csv_floats(text: str):
    return tuple(float(x) for x in text.split(","))


# option name -> (type caster, built-in default); shared across subcommands
_OPTION_TYPES = {
    "model": (str, "wsibm"),
    "k": (int, None),
    "kmax": (int, 20),
    "alpha": (float, None),
    "eta_scheme": (str, "flat"),
    "iterations": (int, None),
    "burn_in": (int, None),
    "chains": (int, 1),
    "seed": (int, 0),
    "mu0": (float, 0.0),
    "n0": (float, 1.0),
    "nu0": (float, 10.0),
    "ss0": (float, 0.1),
    "min_nonzero": (int, 1),
    "corr": (str, "kendall"),
    "clamp": (float, 0.999),
    "preset": (str, None),
    "n": (int, None),
    "proportions": (_csv_floats, None),
    "mu_diag": (_csv_floats, None),
    "mu_offdiag": (float, 0.0),
    "sigma2_rate": (float, 0.1),
    "permute_means": (lambda s: str(s).lower() in ("1", "true", "yes"), False),
    "workers": (int, None),
    "level": (float, 0.95),
}


def _resolve(args: argparse.Namespace, keys: list[str]) -> dict:
    """Apply the flag > config > env > default precedence for `keys`."""
    config = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(config, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(config) - set(keys))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key in keys:
        caster, default = _OPTION_TYPES[key]
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            out[key] = flag_val
            continue
        if key in config:
            try:
                out[key] = caster(config[key]) if config[key] is not None else None
            except (TypeError, ValueError):
                raise ConfigError(f"config key {key!r} has invalid value {config[key]!r}") from None
            continue
        env_val = os.environ.get(ENV_PREFIX + key.upper())
        if env_val is not None:
            try:
                out[key] = caster(env_val)
            except (TypeError, ValueError):
                raise ConfigError(f"environment override {ENV_PREFIX + key.upper()} is invalid") from None
            continue
        out[key] = default
    return out


def _as_config_error(fn, *args, **kwargs):
    """Domain violations while building run configs are config errors."""
    try:
        return fn(*args, **kwargs)
    except InputError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args) -> int:
    keys = ["preset", "n", "k", "proportions", "mu_diag", "mu_offdiag", "sigma2_rate", "permute_means", "seed"]
    opt = _resolve(args, keys)
    if opt["preset"] is not None:
        if opt["preset"] not in PRESETS:
            raise ConfigError(f"unknown preset {opt['preset']!r}; choose from {sorted(PRESETS)}")
        spec = preset_spec(opt["preset"], seed=opt["seed"], permute_means=opt["permute_means"])
    else:
        if opt["n"] is None or opt["k"] is None:
            raise ConfigError("simulate needs either --preset or both --n and --k")
        k = opt["k"]
        proportions = opt["proportions"] or tuple([1.0 / k] * k)
        mu_diag = opt["mu_diag"]
        if mu_diag is None:
            raise ConfigError("simulate needs --mu-diag (comma-separated, one value per community)")
        if len(mu_diag) == 1 and k > 1:
            mu_diag = mu_diag * k
        spec = _as_config_error(
            SimulationSpec,
            n=opt["n"],
            k_true=k,
            proportions=proportions,
            mu_diag=mu_diag,
            mu_offdiag=opt["mu_offdiag"],
            sigma2_rate=opt["sigma2_rate"],
            permute_means=opt["permute_means"],
            seed=opt["seed"],
        )
    net = simulate_network(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    node_ids = [f"n{j + 1}" for j in range(spec.n)]
    from .preprocess import WeightMatrix

    wio.write_weights_csv(out_dir / "weights.csv", WeightMatrix(net.W, node_ids))
    wio.write_labels_csv(out_dir / "z_true.csv", node_ids, net.z_true)
    wio.write_json(
        out_dir / "theta_true.json",
        {
            "format_version": 1,
            "n": spec.n,
            "k_true": spec.k_true,
            "proportions": list(spec.proportions),
            "community_sizes": net.z_true.counts.tolist(),
            "mu": net.theta_true.mu.tolist(),
            "sigma2": net.theta_true.sigma2.tolist(),
            "seed": spec.seed,
        },
    )
    print(f"wrote weights.csv, z_true.csv, theta_true.json to {out_dir}")
    return 0


def cmd_preprocess(args) -> int:
    opt = _resolve(args, ["min_nonzero", "corr", "clamp"])
    config = _as_config_error(
        PreprocessConfig, min_nonzero=opt["min_nonzero"], method=opt["corr"], clamp=opt["clamp"]
    )
    abundance = wio.read_abundance_csv(args.abundance)
    wm, provenance = build_weight_matrix(abundance, config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wio.write_weights_csv(out_dir / "weights.csv", wm)
    wio.write_json(out_dir / "provenance.json", provenance)
    print(f"{abundance.n_taxa} taxa in, {wm.n} taxa out; wrote weights.csv, provenance.json to {out_dir}")
    return 0


def _fit_chain_task(payload):
    """Run one chain in a worker process and persist its trace."""
    (W, model, k, kmax, alpha, eta, prior_tuple, iterations, burn_in, seed, path) = payload
    prior = NIGPrior(*prior_tuple)
    if model == "wsibm":
        config = ChainConfig(iterations=iterations, burn_in=burn_in, seed=seed)
        trace = run_wsibm(W, config, prior=prior, alpha=alpha, k_max=kmax)
    else:
        config = ChainConfig(iterations=iterations, burn_in=burn_in, seed=seed, k=k)
        trace = run_wsbm(W, config, prior=prior, eta=np.asarray(eta))
    wio.write_trace_jsonl(path, trace)
    return {
        "path": str(path),
        "z": trace.z_draws,
        "weights": trace.weight_draws,
        "loglik": trace.loglik_draws,
        "k_draws": trace.k_draws,
    }


def cmd_fit(args) -> int:
    keys = [
        "model", "k", "kmax", "alpha", "eta_scheme", "iterations", "burn_in",
        "chains", "seed", "mu0", "n0", "nu0", "ss0", "workers", "level",
    ]
    opt = _resolve(args, keys)
    model = opt["model"]
    if model not in ("wsbm", "wsibm"):
        raise ConfigError("--model must be wsbm or wsibm")
    iterations = opt["iterations"] if opt["iterations"] is not None else 10_000
    burn_in = opt["burn_in"] if opt["burn_in"] is not None else iterations // 2
    _as_config_error(ChainConfig, iterations=iterations, burn_in=burn_in, seed=opt["seed"])
    prior = _as_config_error(NIGPrior, opt["mu0"], opt["n0"], opt["nu0"], opt["ss0"])
    if opt["chains"] < 1:
        raise ConfigError("--chains must be >= 1")

    if model == "wsbm":
        if opt["k"] is None:
            raise ConfigError("--model wsbm requires --k")
        k = opt["k"]
        if opt["eta_scheme"] == "flat":
            eta = np.ones(k)
        elif opt["eta_scheme"] == "scaled-true":
            eta = np.full(k, 100.0 * k)
        elif opt["eta_scheme"] == "scaled-random":
            k_ran = int(make_rng(chain_seed(opt["seed"], 991)).integers(1, opt["kmax"] + 1))
            eta = np.full(k, 100.0 * k_ran)
        else:
            raise ConfigError("--eta-scheme must be flat, scaled-true or scaled-random")
        alpha = None
    else:
        k = None
        eta = None
        alpha = opt["alpha"] if opt["alpha"] is not None else 1.0
        if alpha <= 0:
            raise ConfigError("--alpha must be positive")
        if opt["kmax"] < 2:
            raise ConfigError("--kmax must be >= 2")

    wm = wio.read_weights_csv(args.weights)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    prior_tuple = (prior.mu0, prior.n0, prior.nu0, prior.ss0)
    tasks = []
    for i in range(opt["chains"]):
        path = out_dir / f"trace_chain{i:03d}.jsonl"
        tasks.append(
            (
                wm.values, model, k, opt["kmax"], alpha,
                None if eta is None else tuple(eta), prior_tuple,
                iterations, burn_in, chain_seed(opt["seed"], i), path,
            )
        )
    if opt["chains"] == 1 or opt["workers"] == 1:
        results = [_fit_chain_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=opt["workers"]) as pool:
            results = list(pool.map(_fit_chain_task, tasks))

    ppm = accumulate_ppm(results[0]["z"])
    for res in results[1:]:
        ppm = merge_ppm(ppm, accumulate_ppm(res["z"]))
    z_union = np.concatenate([res["z"] for res in results], axis=0)
    if model == "wsibm":
        z_hat = estimate_z_ppm(z_union, ppm)
    else:
        scores = np.concatenate(
            [map_scores(res["z"], res["weights"], res["loglik"]) for res in results]
        )
        z_hat = CommunityAssignment(z_union[int(np.argmax(scores))])
    z_hat = canonical_relabel(z_hat)

    wio.write_matrix_csv(out_dir / "ppm.csv", wm.taxon_ids, ppm.probs)
    wio.write_labels_csv(out_dir / "z_hat.csv", wm.taxon_ids, z_hat)
    summary = summarize_blocks(
        (wio.read_trace_jsonl(res["path"]) for res in results),
        z_hat,
        wm.values,
        level=opt["level"],
        ppm=ppm,
    )
    doc = summary.to_dict(node_ids=wm.taxon_ids)
    doc["model"] = model
    doc["chains"] = opt["chains"]
    doc["seed"] = opt["seed"]
    wio.write_json(out_dir / "summary.json", doc)
    print(
        f"fit {model} on {wm.n} nodes with {opt['chains']} chain(s): "
        f"k_hat={summary.k_hat}; wrote traces, ppm.csv, z_hat.csv, summary.json to {out_dir}"
    )
    return 0


def cmd_evaluate(args) -> int:
    _, z_true = wio.read_labels_csv(args.true_labels)
    _, z_est = wio.read_labels_csv(args.est_labels)
    if z_true.size != z_est.size:
        raise InputError(
            f"label files differ in length ({z_true.size} vs {z_est.size})"
        )
    a = ari(z_true, z_est)
    m = nmi(z_true, z_est)
    print(f"ARI {wio.fmt(a)}")
    print(f"NMI {wio.fmt(m)}")
    if args.out:
        wio.write_json(args.out, {"format_version": 1, "ari": a, "nmi": m})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsbm",
        description="Bayesian weighted stochastic block models: simulate, preprocess, fit, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--seed", type=int)

    p_sim = sub.add_parser("simulate", help="generate a planted-partition network")
    add_common(p_sim)
    p_sim.add_argument("--preset", choices=sorted(PRESETS))
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--k", type=int)
    p_sim.add_argument("--proportions", type=_csv_floats, metavar="W1,W2,...")
    p_sim.add_argument("--mu-diag", type=_csv_floats, metavar="M1,M2,...")
    p_sim.add_argument("--mu-offdiag", type=float)
    p_sim.add_argument("--sigma2-rate", type=float)
    p_sim.add_argument("--permute-means", action=argparse.BooleanOptionalAction, default=None)
    p_sim.add_argument("--out-dir", default=".")
    p_sim.set_defaults(func=cmd_simulate)

    p_pre = sub.add_parser("preprocess", help="abundance CSV -> weight matrix CSV")
    add_common(p_pre)
    p_pre.add_argument("--abundance", required=True, help="CSV: taxon header, sample rows")
    p_pre.add_argument("--min-nonzero", type=int)
    p_pre.add_argument("--corr", choices=("kendall", "spearman", "pearson"))
    p_pre.add_argument("--clamp", type=float)
    p_pre.add_argument("--out-dir", default=".")
    p_pre.set_defaults(func=cmd_preprocess)

    p_fit = sub.add_parser("fit", help="run Gibbs chains on a weight matrix")
    add_common(p_fit)
    p_fit.add_argument("--weights", required=True, help="weight matrix CSV")
    p_fit.add_argument("--model", choices=("wsbm", "wsibm"))
    p_fit.add_argument("--k", type=int, help="number of communities (wsbm)")
    p_fit.add_argument("--kmax", type=int, help="truncation level (wsibm)")
    p_fit.add_argument("--alpha", type=float, help="concentration parameter (wsibm)")
    p_fit.add_argument("--eta-scheme", choices=("flat", "scaled-true", "scaled-random"))
    p_fit.add_argument("--iterations", type=int)
    p_fit.add_argument("--burn-in", type=int)
    p_fit.add_argument("--chains", type=int)
    p_fit.add_argument("--workers", type=int)
    p_fit.add_argument("--level", type=float, help="credible-interval level")
    p_fit.add_argument("--mu0", type=float)
    p_fit.add_argument("--n0", type=float)
    p_fit.add_argument("--nu0", type=float)
    p_fit.add_argument("--ss0", type=float)
    p_fit.add_argument("--out-dir", default=".")
    p_fit.set_defaults(func=cmd_fit)

    p_eval = sub.add_parser("evaluate", help="ARI/NMI between two label CSVs")
    p_eval.add_argument("--true-labels", required=True)
    p_eval.add_argument("--est-labels", required=True)
    p_eval.add_argument("--out", help="optional metrics JSON path")
    p_eval.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
