"""Command-line pipelines: generate, fit, spectrum, modes, forecast, benchmark.

Parameter precedence is flags > JSON config file (``--config``) > built-in
defaults; unknown config keys are rejected before any computation starts.
Exit codes: 0 ok, 2 usage error, 3 data error, 4 numeric failure.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import dynamics
from .data import (
    LaggedPairs,
    TrajectoryDataset,
    all_centers,
    build_pairs,
    load_trajectory,
    sample_centers,
    save_trajectory_bin,
    save_trajectory_csv,
)
from .errors import DataError, InputError, KoopmanError, NumericError
from .estimators import (
    DEFAULT_N_MAX_EXACT,
    EXACT_KRR,
    EXACT_PCR,
    EXACT_RRR,
    KINDS,
    NYS_KRR,
    NYS_PCR,
    NYS_RRR,
    effective_rank,
    empirical_risk,
    fit_exact_krr,
    fit_exact_pcr,
    fit_exact_rrr,
    fit_nys_krr,
    fit_nys_pcr,
    fit_nys_rrr,
)
from .kernels import KernelSpec
from .metrics import BenchmarkRecord, nrmse, time_fit, write_records
from .serialize import load_model, save_model
from .spectral import (
    decompose,
    forecast,
    identity_observable,
    kmd_forecast,
    modes,
    rollout_forecast,
    spectrum_records,
)

_NEEDS_LAM = (NYS_KRR, NYS_RRR, EXACT_KRR, EXACT_RRR)
_NEEDS_R = (NYS_PCR, NYS_RRR, EXACT_PCR, EXACT_RRR)
_NYS = (NYS_KRR, NYS_PCR, NYS_RRR)


def _merge(args, defaults):
    """flags > config file > defaults; unknown config keys are errors."""
    cfg = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as err:
            raise DataError(f"cannot read config {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise InputError(f"config {path} is not valid JSON: {err}") from err
        if not isinstance(file_cfg, dict):
            raise InputError("config file must hold a JSON object")
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _kernel_from(cfg) -> KernelSpec:
    return KernelSpec(
        family=cfg["kernel"],
        bandwidth=float(cfg["sigma"]),
        degree=int(cfg["degree"]),
        offset=float(cfg["offset"]),
    )


def _parse_vector(text):
    return np.array([float(v) for v in str(text).split(",")])


def _parse_matrix(text):
    mat = json.loads(text) if isinstance(text, str) else text
    return np.asarray(mat, dtype=np.float64)


# ---------------------------------------------------------------------------
# generate

_GEN_DEFAULTS = {
    "system": "lorenz63",
    "steps": 10000,
    "dt": 0.01,
    "seed": 0,
    "out": None,
    "format": None,
    "a": 0.9,
    "std": 1.0,
    "lorenz_sigma": 10.0,
    "lorenz_rho": 28.0,
    "lorenz_beta": 8.0 / 3.0,
    "transition": None,
    "noise_cov": None,
    "x0": None,
    "subsample": 1,
    "standardize": False,
    "header": False,
}


def cmd_generate(args) -> int:
    cfg = _merge(args, _GEN_DEFAULTS)
    if not cfg["out"]:
        raise InputError("generate requires --out")
    if int(cfg["subsample"]) < 1:
        raise InputError("--subsample must be >= 1")
    name = cfg["system"]
    if name == "lorenz63":
        system = dynamics.Lorenz63(
            sigma=float(cfg["lorenz_sigma"]),
            rho=float(cfg["lorenz_rho"]),
            beta=float(cfg["lorenz_beta"]),
            dt=float(cfg["dt"]),
        )
    elif name == "ar1":
        system = dynamics.AR1(a=float(cfg["a"]), noise_std=float(cfg["std"]))
    elif name == "lingauss":
        if cfg["transition"] is None:
            raise InputError("lingauss requires --transition")
        noise = _parse_matrix(cfg["noise_cov"]) if cfg["noise_cov"] else None
        system = dynamics.LinearGaussian(
            transition=_parse_matrix(cfg["transition"]), noise_cov=noise
        )
    else:
        raise InputError(f"unknown system {name!r}")
    x0 = _parse_vector(cfg["x0"]) if cfg["x0"] is not None else None
    sub = int(cfg["subsample"])
    traj = dynamics.simulate(
        system, x0=x0, steps=int(cfg["steps"]) * sub, seed=int(cfg["seed"])
    )
    states = traj.states[::sub]
    if cfg["standardize"]:
        mean = states.mean(axis=0)
        sd = states.std(axis=0)
        if np.any(sd == 0):
            raise NumericError("cannot standardize a constant coordinate")
        states = (states - mean) / sd
    out_traj = TrajectoryDataset(
        states=states, dt=(traj.dt or 1.0) * sub, source=traj.source
    )
    fmt = cfg["format"] or ("bin" if str(cfg["out"]).endswith(".bin") else "csv")
    if fmt == "bin":
        save_trajectory_bin(cfg["out"], out_traj)
    elif fmt == "csv":
        save_trajectory_csv(cfg["out"], out_traj, header=bool(cfg["header"]))
    else:
        raise InputError(f"unknown format {fmt!r}")
    print(json.dumps({"written": str(cfg["out"]), "shape": list(out_traj.states.shape)}))
    return 0


# ---------------------------------------------------------------------------
# fit

_FIT_DEFAULTS = {
    "data": None,
    "estimator": None,
    "kernel": "rbf",
    "sigma": 1.0,
    "degree": 2,
    "offset": 1.0,
    "lag": 1,
    "m": None,
    "r": None,
    "lam": None,
    "seed": 0,
    "independent_centers": False,
    "n": None,
    "n_max_exact": DEFAULT_N_MAX_EXACT,
    "out": None,
    "dump_w": False,
}


def _validate_fit_params(cfg):
    kind = cfg["estimator"]
    if kind not in KINDS:
        raise InputError(f"unknown estimator {kind!r}; choose from {', '.join(KINDS)}")
    if kind in _NEEDS_LAM and cfg["lam"] is None:
        raise InputError(f"{kind} requires --lam")
    if kind not in _NEEDS_LAM and cfg["lam"] is not None:
        raise InputError(f"{kind} does not take --lam")
    if kind in _NEEDS_R and cfg["r"] is None:
        raise InputError(f"{kind} requires --r")
    if kind not in _NEEDS_R and cfg["r"] is not None:
        raise InputError(f"{kind} does not take --r")
    if kind in _NYS and cfg["m"] is None:
        raise InputError(f"{kind} requires --m")
    if kind not in _NYS and cfg["m"] is not None:
        raise InputError(f"{kind} does not take --m (all points are centers)")


def _fit_once(pairs, kind, kernel, cfg, seed):
    if kind in _NYS:
        centers = sample_centers(
            pairs,
            kernel,
            m=int(cfg["m"]),
            seed=seed,
            shared=not cfg["independent_centers"],
        )
        if kind == NYS_KRR:
            return fit_nys_krr(pairs, centers, float(cfg["lam"]))
        if kind == NYS_PCR:
            return fit_nys_pcr(pairs, centers, int(cfg["r"]))
        return fit_nys_rrr(pairs, centers, float(cfg["lam"]), int(cfg["r"]))
    n_max = int(cfg["n_max_exact"])
    if kind == EXACT_KRR:
        return fit_exact_krr(pairs, kernel, float(cfg["lam"]), n_max=n_max)
    if kind == EXACT_PCR:
        return fit_exact_pcr(pairs, kernel, int(cfg["r"]), n_max=n_max)
    return fit_exact_rrr(pairs, kernel, float(cfg["lam"]), int(cfg["r"]), n_max=n_max)


def cmd_fit(args) -> int:
    cfg = _merge(args, _FIT_DEFAULTS)
    if not cfg["data"] or not cfg["out"] or not cfg["estimator"]:
        raise InputError("fit requires --data, --estimator and --out")
    _validate_fit_params(cfg)
    kernel = _kernel_from(cfg)
    traj = load_trajectory(cfg["data"])
    pairs = build_pairs(traj, int(cfg["lag"]))
    if cfg["n"] is not None:
        n = int(cfg["n"])
        if n < 1 or n > pairs.n:
            raise InputError(f"--n must be in [1, {pairs.n}]")
        pairs = LaggedPairs(X=pairs.X[:n], Y=pairs.Y[:n], lag=pairs.lag)
    t0 = time.perf_counter()
    est = _fit_once(pairs, cfg["estimator"], kernel, cfg, int(cfg["seed"]))
    fit_seconds = time.perf_counter() - t0
    save_model(cfg["out"], est)
    report = {
        "train_risk": empirical_risk(est),
        "fit_seconds": fit_seconds,
        "effective_rank": effective_rank(est),
    }
    if cfg["dump_w"]:
        report["w"] = est.w.tolist()
    print(json.dumps(report))
    return 0


# ---------------------------------------------------------------------------
# spectrum / modes / forecast

_SPECTRUM_DEFAULTS = {"model": None, "out": None, "lag": 1, "dt": 1.0}


def cmd_spectrum(args) -> int:
    cfg = _merge(args, _SPECTRUM_DEFAULTS)
    if not cfg["model"]:
        raise InputError("spectrum requires --model")
    est = load_model(cfg["model"])
    dec = decompose(est)
    records = spectrum_records(dec, lag_time=int(cfg["lag"]) * float(cfg["dt"]))
    text = json.dumps(records, indent=2)
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


_MODES_DEFAULTS = {"model": None, "out": None, "observable": None}


def cmd_modes(args) -> int:
    cfg = _merge(args, _MODES_DEFAULTS)
    if not cfg["model"] or not cfg["out"]:
        raise InputError("modes requires --model and --out")
    est = load_model(cfg["model"])
    dec = decompose(est)
    if cfg["observable"]:
        g_m = np.loadtxt(cfg["observable"], delimiter=",", ndmin=2)
        if g_m.shape[0] != est.m:
            raise DataError(
                f"observable file has {g_m.shape[0]} rows, model has m={est.m}"
            )
    else:
        g_m = identity_observable(est)
    mode_set = modes(dec, g_m)
    d_g = mode_set.values.shape[1]
    header = ["eigenvalue_re", "eigenvalue_im"]
    for j in range(d_g):
        header += [f"mode{j}_re", f"mode{j}_im"]
    rows = []
    for i, lam in enumerate(dec.eigenvalues):
        row = [lam.real, lam.imag]
        for j in range(d_g):
            row += [mode_set.values[i, j].real, mode_set.values[i, j].imag]
        rows.append(row)
    np.savetxt(
        cfg["out"], np.array(rows), delimiter=",", header=",".join(header), comments=""
    )
    print(json.dumps({"written": str(cfg["out"]), "eigenpairs": dec.r, "d_g": d_g}))
    return 0


_FORECAST_DEFAULTS = {
    "model": None,
    "data": None,
    "out": None,
    "mode": "onestep",
    "horizon": 1,
}


def cmd_forecast(args) -> int:
    cfg = _merge(args, _FORECAST_DEFAULTS)
    if not cfg["model"] or not cfg["data"] or not cfg["out"]:
        raise InputError("forecast requires --model, --data and --out")
    horizon = int(cfg["horizon"])
    if horizon < 1:
        raise InputError("--horizon must be >= 1")
    est = load_model(cfg["model"])
    queries = load_trajectory(cfg["data"]).states
    if queries.shape[1] != est.dim:
        raise InputError(
            f"query dimension {queries.shape[1]} != model dimension {est.dim}"
        )
    if cfg["mode"] == "onestep":
        pred = rollout_forecast(est, queries, horizon)
    elif cfg["mode"] == "kmd":
        dec = decompose(est)
        mode_set = modes(dec, identity_observable(est))
        pred_c = kmd_forecast(dec, mode_set, queries, horizon)
        resid = float(np.max(np.abs(pred_c.imag))) if pred_c.size else 0.0
        scale = float(np.max(np.abs(pred_c))) if pred_c.size else 0.0
        if scale > 0 and resid > 1e-8 * scale:
            print(
                f"warning: imaginary residue {resid:.3e} exceeds 1e-8 of magnitude",
                file=sys.stderr,
            )
        pred = pred_c.real
    else:
        raise InputError("--mode must be onestep or kmd")
    np.savetxt(cfg["out"], pred, delimiter=",", fmt="%.17g")
    print(json.dumps({"written": str(cfg["out"]), "shape": list(pred.shape)}))
    return 0


# ---------------------------------------------------------------------------
# benchmark

_BENCH_DEFAULTS = {
    "data": None,
    "system": None,
    "estimators": "nys-pcr",
    "n_list": "1000",
    "kernel": "rbf",
    "sigma": 1.0,
    "degree": 2,
    "offset": 1.0,
    "lag": 1,
    "m": 250,
    "r": None,
    "lam": None,
    "seeds": 5,
    "test_len": 1000,
    "horizon": 1,
    "time_repeats": 3,
    "mode": "sweep",
    "m_coef": 2.0,
    "lam_coef": 1e-3,
    "out": None,
    "a": 0.9,
    "std": 1.0,
    "dt": 0.01,
    "subsample": 1,
}


def _bench_source(cfg, max_n, seed):
    """Training pairs pool and a fixed held-out block for one seed."""
    lag = int(cfg["lag"])
    test_len = int(cfg["test_len"])
    need = max_n + test_len + lag
    if cfg["data"]:
        traj = load_trajectory(cfg["data"])
    elif cfg["system"] == "lorenz63":
        sub = int(cfg["subsample"])
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-10.0, 10.0, size=3)
        traj = dynamics.simulate(
            dynamics.Lorenz63(dt=float(cfg["dt"])), x0=x0, steps=need * sub, seed=seed
        )
        traj = TrajectoryDataset(states=traj.states[::sub], dt=float(cfg["dt"]) * sub)
    elif cfg["system"] == "ar1":
        traj = dynamics.simulate(
            dynamics.AR1(a=float(cfg["a"]), noise_std=float(cfg["std"])),
            steps=need,
            seed=seed,
        )
    else:
        raise InputError("benchmark requires --data or --system {lorenz63, ar1}")
    pairs = build_pairs(traj, lag)
    if pairs.n < max_n + test_len:
        raise DataError(
            f"need {max_n + test_len} pairs (max n + test length), have {pairs.n}"
        )
    train_pool = LaggedPairs(X=pairs.X[:max_n], Y=pairs.Y[:max_n], lag=lag)
    test = LaggedPairs(X=pairs.X[-test_len:], Y=pairs.Y[-test_len:], lag=lag)
    return train_pool, test


def _bench_cell(cfg, kernel, kind, train, test, m, r, lam, seed):
    # centers are data preparation, built once per cell; the timed closure
    # measures the estimator computation (the O(m^2 n) vs O(n^3) part)
    if kind in _NYS:
        centers = sample_centers(train, kernel, m=m, seed=seed, shared=True)
    else:
        centers = all_centers(train, kernel)

    holder = {}

    def fit():
        if kind in (NYS_KRR, EXACT_KRR):
            holder["est"] = fit_nys_krr(train, centers, lam, kind=kind)
        elif kind in (NYS_PCR, EXACT_PCR):
            holder["est"] = fit_nys_pcr(train, centers, r, kind=kind)
        else:
            holder["est"] = fit_nys_rrr(train, centers, lam, r, kind=kind)
        return holder["est"]

    repeats = int(cfg["time_repeats"])
    if repeats >= 1:
        fit_time = time_fit(fit, repeats=repeats)
    else:
        t0 = time.perf_counter()
        fit()
        fit_time = time.perf_counter() - t0
    est = holder["est"]
    g_m = identity_observable(est)
    horizon = int(cfg["horizon"])
    t0 = time.perf_counter()
    pred = rollout_forecast(est, test.X, horizon) if horizon > 1 else forecast(
        est, g_m, test.X
    )
    predict_time = time.perf_counter() - t0
    truth = test.Y
    metrics = {
        "nrmse": nrmse(pred, truth),
        "test_risk": empirical_risk(est, test.X, test.Y),
    }
    return BenchmarkRecord(
        estimator=kind,
        n=train.n,
        m=est.m,
        r=r,
        lam=lam,
        kernel=kernel.describe(),
        seed=seed,
        fit_time=fit_time,
        predict_time=predict_time,
        train_risk=empirical_risk(est),
        test_metrics=metrics,
    )


def cmd_benchmark(args) -> int:
    cfg = _merge(args, _BENCH_DEFAULTS)
    if not cfg["out"]:
        raise InputError("benchmark requires --out")
    if cfg["mode"] not in ("sweep", "rates"):
        raise InputError("--mode must be sweep or rates")
    kernel = _kernel_from(cfg)
    n_list = [int(v) for v in str(cfg["n_list"]).split(",")]
    if not n_list or any(n < 1 for n in n_list):
        raise InputError("--n-list must hold positive integers")
    kinds = [k.strip() for k in str(cfg["estimators"]).split(",")]
    for kind in kinds:
        if kind not in KINDS:
            raise InputError(f"unknown estimator {kind!r}")
        if cfg["mode"] == "sweep" and kind in _NEEDS_LAM and cfg["lam"] is None:
            raise InputError(f"{kind} requires --lam")
        if kind in _NEEDS_R and cfg["r"] is None:
            raise InputError(f"{kind} requires --r")
    max_n = max(n_list)
    seeds = range(int(cfg["seeds"]))
    records = []
    for seed in seeds:
        train_pool, test = _bench_source(cfg, max_n, seed)
        for n in n_list:
            train = LaggedPairs(
                X=train_pool.X[:n], Y=train_pool.Y[:n], lag=train_pool.lag
            )
            if cfg["mode"] == "rates":
                m = int(np.ceil(float(cfg["m_coef"]) * np.sqrt(n)))
                lam = float(cfg["lam_coef"]) / np.sqrt(n)
                for kind in kinds:
                    r = int(cfg["r"]) if kind in _NEEDS_R else None
                    records.append(
                        _bench_cell(cfg, kernel, kind, train, test, m, r, lam, seed)
                    )
            else:
                for kind in kinds:
                    lam = float(cfg["lam"]) if kind in _NEEDS_LAM else None
                    r = int(cfg["r"]) if kind in _NEEDS_R else None
                    m = int(cfg["m"]) if kind in _NYS else None
                    records.append(
                        _bench_cell(cfg, kernel, kind, train, test, m, r, lam, seed)
                    )
    write_records(cfg["out"], records)
    print(json.dumps({"written": str(cfg["out"]), "records": len(records)}))
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_common(p):
    p.add_argument("--config", help="JSON config file; flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nyskoop",
        description="Sketched kernel estimators of the Koopman operator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a synthetic system to a file")
    _add_common(p)
    p.add_argument("--system", choices=["lorenz63", "ar1", "lingauss"])
    p.add_argument("--steps", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "bin"])
    p.add_argument("--a", type=float, help="AR(1) coefficient")
    p.add_argument("--std", type=float, help="AR(1) noise std")
    p.add_argument("--lorenz-sigma", dest="lorenz_sigma", type=float)
    p.add_argument("--lorenz-rho", dest="lorenz_rho", type=float)
    p.add_argument("--lorenz-beta", dest="lorenz_beta", type=float)
    p.add_argument("--transition", help="JSON matrix for lingauss")
    p.add_argument("--noise-cov", dest="noise_cov", help="JSON matrix")
    p.add_argument("--x0", help="comma-separated initial state")
    p.add_argument("--subsample", type=int, help="keep every k-th state")
    p.add_argument("--standardize", action="store_true", default=None)
    p.add_argument("--header", action="store_true", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit an estimator on a trajectory file")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--estimator", choices=list(KINDS))
    p.add_argument("--kernel", choices=["rbf", "linear", "poly"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--offset", type=float)
    p.add_argument("--lag", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--independent-centers",
        dest="independent_centers",
        action="store_true",
        default=None,
    )
    p.add_argument("--n", type=int, help="fit on the first n pairs only")
    p.add_argument("--n-max-exact", dest="n_max_exact", type=int)
    p.add_argument("--out")
    p.add_argument("--dump-w", dest="dump_w", action="store_true", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("spectrum", help="eigenvalues and implied timescales")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--lag", type=int)
    p.add_argument("--dt", type=float)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("modes", help="Koopman modes of an observable")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--out")
    p.add_argument("--observable", help="CSV of observable values at the centers")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("forecast", help="multi-step forecasts from a model file")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--data", help="query states (CSV or KOOPTRAJ)")
    p.add_argument("--out")
    p.add_argument("--mode", choices=["onestep", "kmd"])
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("benchmark", help="accuracy/runtime sweeps to JSON lines")
    _add_common(p)
    p.add_argument("--data")
    p.add_argument("--system", choices=["lorenz63", "ar1"])
    p.add_argument("--estimators", help="comma-separated estimator kinds")
    p.add_argument("--n-list", dest="n_list", help="comma-separated training sizes")
    p.add_argument("--kernel", choices=["rbf", "linear", "poly"])
    p.add_argument("--sigma", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--offset", type=float)
    p.add_argument("--lag", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--lam", type=float)
    p.add_argument("--seeds", type=int, help="number of replicate seeds")
    p.add_argument("--test-len", dest="test_len", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--time-repeats", dest="time_repeats", type=int)
    p.add_argument("--mode", choices=["sweep", "rates"])
    p.add_argument("--m-coef", dest="m_coef", type=float, help="rates: m = ceil(c sqrt(n))")
    p.add_argument("--lam-coef", dest="lam_coef", type=float, help="rates: lam = c / sqrt(n)")
    p.add_argument("--a", type=float)
    p.add_argument("--std", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--subsample", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    except KoopmanError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
