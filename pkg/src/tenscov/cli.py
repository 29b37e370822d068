"""Command-line experiment driver.

Every subcommand runs one scenario and writes CSV files to ``--out``.  A
CSV starts with a header row and ends with ``# key=value`` lines recording
the config hash, library version, scenario and seed; wall-clock timings go
to a separate ``*_timing.csv`` so that the main tables are byte-identical
across reruns.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParameterError, SizeError, TenscovError

SCENARIOS = (
    "TuckerConvergence",
    "SincConvergence",
    "SpectralDensityConvergence",
    "MultigridConvergence",
    "OriginError",
    "TraceScaling",
    "Kriging",
    "Likelihood",
)

# dense oracles above this many grid points are skipped
ORACLE_LIMIT = 4096


@dataclass
class ExperimentConfig:
    scenario: str
    kernel: dict = field(default_factory=lambda: {"family": "PSlater", "p": 1.0, "ell": 1.0})
    grid: dict = field(default_factory=lambda: {"dim": 3, "half_widths": 1.0, "points_per_axis": 33})
    ranks: list = field(default_factory=lambda: list(range(1, 11)))
    Ms: list = field(default_factory=lambda: [8, 16, 32, 64])
    grid_sizes: list = field(default_factory=list)
    C0: float = 1.0
    sinc_scheme: str = "de"
    tol: float = 1e-8
    seed: int = 0
    max_als_sweeps: int = 20
    sensors: list | int = 2
    noise_variance: float = 0.0
    measurement_rank: int = 1
    trace_dims: list = field(default_factory=lambda: [10, 100, 1000])
    trace_sizes: list = field(default_factory=lambda: [100])
    trace_rank: int = 10
    output: str = "out"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ParameterError("seed must be an integer in [0, 2**64)")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "scenario" not in data:
            raise ParameterError("config needs a 'scenario'")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ParameterError(str(exc)) from None

    def hash(self):
        d = asdict(self)
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def kernel_spec(self):
        from .kernels import KernelSpec

        k = dict(self.kernel)
        k.setdefault("dim", self.grid.get("dim", 3))
        return KernelSpec.from_dict(k)

    def tensor_grid(self, n=None):
        from .grid import TensorGrid

        g = dict(self.grid)
        if n is not None:
            g["points_per_axis"] = n
        return TensorGrid.from_dict(g)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, cfg: ExperimentConfig):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        fh.write(f"# config_sha256={cfg.hash()}\n")
        fh.write(f"# version={__version__}\n")
        fh.write(f"# scenario={cfg.scenario}\n")
        fh.write(f"# seed={cfg.seed}\n")
    return path


# ----------------------------------------------------------------------------
# scenarios


def _tucker_rows(cfg, origin=False):
    from .decomp import TuckerConfig, hosvd, tucker_als, tucker_error
    from .grid import collocate
    from .kernels import eval_radial
    from .kroncov import tucker_diag_trace

    spec = cfg.kernel_spec()
    sizes = cfg.grid_sizes or [cfg.tensor_grid().points_per_axis[0]]
    rows = []
    for n in sizes:
        grid = cfg.tensor_grid(n)
        x = collocate(spec, grid)
        for r in cfg.ranks:
            tc = TuckerConfig(ranks=int(r), max_als_sweeps=cfg.max_als_sweeps)
            t = tucker_als(x, hosvd(x, tc), tc)
            if origin:
                value, _ = tucker_diag_trace(t)
                rows.append((n, r, abs(value - float(eval_radial(spec, 0.0)))))
            else:
                rows.append((n, r, tucker_error(x, t)))
    return rows


def run_tucker_convergence(cfg):
    return {"tucker_convergence.csv": (("n", "rank", "e_fn"), _tucker_rows(cfg))}


def run_origin_error(cfg):
    return {"origin_error.csv": (("n", "rank", "abs_error"), _tucker_rows(cfg, origin=True))}


def run_sinc_convergence(cfg):
    from .sinc import sinc_errors

    spec = cfg.kernel_spec()
    rows = sinc_errors(spec, cfg.tensor_grid(), cfg.Ms, C0=cfg.C0, scheme=cfg.sinc_scheme)
    return {"sinc_convergence.csv": (("M", "rank", "max_error", "fro_error"), rows)}


def run_spectral_convergence(cfg):
    from .kernels import Family

    spec = cfg.kernel_spec()
    if spec.family is not Family.SPECTRAL:
        raise ParameterError("SpectralDensityConvergence needs a MaternSpectralDensity kernel")
    return {"spectral_convergence.csv": run_sinc_convergence(cfg)["sinc_convergence.csv"]}


def run_multigrid(cfg):
    from .decomp import TuckerConfig, hosvd, multigrid_tucker, tucker_als, tucker_error
    from .grid import collocate

    spec = cfg.kernel_spec()
    sizes = cfg.grid_sizes or [33, 65, 129]
    grids = [cfg.tensor_grid(n) for n in sizes]
    rows = []
    for r in cfg.ranks:
        tc = TuckerConfig(ranks=int(r), max_als_sweeps=cfg.max_als_sweeps)
        trace = []
        multigrid_tucker(spec, grids, tc, trace=trace)
        x = collocate(spec, grids[-1])
        direct = tucker_error(x, tucker_als(x, hosvd(x, tc), tc))
        for level, n, err in trace:
            rows.append((r, level, n, err, direct if level == len(grids) - 1 else ""))
    return {"multigrid_convergence.csv": (("rank", "level", "n", "e_fn", "direct_e_fn"), rows)}


def _random_toeplitz_cov(rng, d, n, R):
    from .kroncov import KroneckerCovariance, ToeplitzSym

    # one shared first column per term keeps the d = 1000 case light;
    # traces are kept near one so the direct product stays finite
    terms, weights = [], []
    for _ in range(R):
        col = np.exp(-np.arange(n) * rng.uniform(0.1, 1.0))
        col /= n * col[0] * rng.uniform(0.99, 1.01)
        t = ToeplitzSym(col)
        terms.append([t] * d)
        weights.append(rng.uniform(0.5, 1.5))
    return KroneckerCovariance(weights, terms)


def run_trace_scaling(cfg):
    from .kroncov import log_trace, trace

    rng = np.random.default_rng(cfg.seed)
    rows, timing = [], []
    for d in cfg.trace_dims:
        for n in cfg.trace_sizes:
            c = _random_toeplitz_cov(rng, int(d), int(n), cfg.trace_rank)
            t0 = time.perf_counter()
            tr = trace(c)
            lt = log_trace(c)
            dt = time.perf_counter() - t0
            rows.append((d, n, cfg.trace_rank, tr, lt, abs(math.log(tr) - lt) if tr > 0 else ""))
            timing.append((d, n, cfg.trace_rank, dt))
    return {"trace_scaling.csv": (("d", "n", "rank", "trace", "log_trace", "log_gap"), rows),
            "trace_scaling_timing.csv": (("d", "n", "rank", "seconds"), timing)}


def _kriging_setup(cfg):
    from .formats import CpTensor
    from .grid import SensorSet
    from .kroncov import covariance_from_kernel
    from .sinc import SincRule

    spec = cfg.kernel_spec()
    grid = cfg.tensor_grid()
    c = covariance_from_kernel(spec, grid, SincRule(max(cfg.Ms)), tol=cfg.tol)
    sensors = SensorSet.strided(grid.shape, cfg.sensors, cfg.noise_variance)
    rng = np.random.default_rng(cfg.seed)
    z = CpTensor(rng.uniform(0.5, 1.5, cfg.measurement_rank),
                 [rng.standard_normal((m, cfg.measurement_rank)) for m in sensors.shape])
    return spec, grid, c, sensors, z


def run_kriging(cfg):
    from .formats import CpTensor, add, norm, reconstruct, scalar_mul
    from .grid import restrict
    from .kroncov import diag
    from .statops import KrigingProblem, conditional_cov, design_criteria, krige

    _, grid, c, sensors, z = _kriging_setup(cfg)
    p = KrigingProblem(c, sensors, z)
    s = krige(p, cfg.tol)
    at_sensors = restrict(s, sensors)
    resid = norm(add(at_sensors, scalar_mul(z, -1.0))) / norm(z)
    cc = conditional_cov(p, cfg.tol)
    zdir = CpTensor.from_vectors([np.ones(n) / math.sqrt(n) for n in grid.shape])
    phi_a, phi_c = design_criteria(cc, zdir)
    rows = [("covariance_rank", c.rank), ("estimate_rank", s.rank), ("conditional_rank", cc.rank),
            ("sensor_residual", resid), ("phi_A", phi_a), ("phi_C", phi_c)]
    if grid.size <= ORACLE_LIMIT:
        C = c.dense()
        ix = np.ravel_multi_index(np.meshgrid(*sensors.indices, indexing="ij"), grid.shape).ravel()
        cyy = C[np.ix_(ix, ix)] + sensors.noise_variance * np.eye(ix.size)
        csy = C[:, ix]
        sd = csy @ np.linalg.solve(cyy, reconstruct(z).ravel())
        cd = C - csy @ np.linalg.solve(cyy, csy.T)
        rows.append(("oracle_estimate_error", np.linalg.norm(reconstruct(s).ravel() - sd) / np.linalg.norm(sd)))
        rows.append(("oracle_conditional_error", np.linalg.norm(cc.dense() - cd) / np.linalg.norm(cd)))
        rows.append(("oracle_variance_error",
                     np.max(np.abs(reconstruct(diag(cc)).ravel() - np.diag(cd))) / np.max(np.diag(cd))))
    else:
        rows.append(("SKIPPED-oracle", f"grid size {grid.size} above {ORACLE_LIMIT}"))
    return {"kriging.csv": (("quantity", "value"), rows)}


def run_likelihood(cfg):
    from .formats import CpTensor, reconstruct
    from .kernels import eval_kernel
    from .statops import Rank1Kron, dense_loglikelihood, logdet_rank1, loglikelihood_rank1

    spec = cfg.kernel_spec()
    grid = cfg.tensor_grid()
    # separable model: one 1D covariance per axis built from the kernel
    from .kernels import KernelSpec

    factors = []
    for l in range(grid.dim):
        x = grid.nodes(l)
        one = KernelSpec.from_dict({**spec.to_dict(), "dim": 1,
                                    "ell": spec.ell_per_axis[l] if spec.uses_length_scale else 1.0})
        factors.append(eval_kernel(one, np.abs(x[:, None] - x[None, :])))
    c = Rank1Kron(factors)
    rng = np.random.default_rng(cfg.seed)
    z = CpTensor(rng.uniform(0.5, 1.5, cfg.measurement_rank),
                 [rng.standard_normal((n, cfg.measurement_rank)) for n in grid.shape])
    ll = loglikelihood_rank1(c, z)
    rows = [("loglik", ll), ("logdet", logdet_rank1(c))]
    if grid.size <= ORACLE_LIMIT:
        dense = dense_loglikelihood(c.dense(), reconstruct(z).ravel())
        rows.append(("oracle_loglik", dense))
        rows.append(("oracle_abs_error", abs(ll - dense)))
    else:
        rows.append(("SKIPPED-oracle", f"grid size {grid.size} above {ORACLE_LIMIT}"))
    return {"likelihood.csv": (("quantity", "value"), rows)}


RUNNERS = {
    "TuckerConvergence": run_tucker_convergence,
    "SincConvergence": run_sinc_convergence,
    "SpectralDensityConvergence": run_spectral_convergence,
    "MultigridConvergence": run_multigrid,
    "OriginError": run_origin_error,
    "TraceScaling": run_trace_scaling,
    "Kriging": run_kriging,
    "Likelihood": run_likelihood,
}

SUBCOMMAND_SCENARIO = {
    "approximate": "TuckerConvergence",
    "decompose": "OriginError",
    "sinc": "SincConvergence",
    "krige": "Kriging",
    "loglik": "Likelihood",
    "bench": "TraceScaling",
}

SUBCOMMAND_DEFAULTS = {
    "Kriging": {"kernel": {"family": "Matern", "nu": 0.5, "ell": 0.5},
                "grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 8}, "Ms": [32]},
    "Likelihood": {"kernel": {"family": "Matern", "nu": 1.5, "ell": 0.5},
                   "grid": {"dim": 2, "half_widths": 1.0, "points_per_axis": 8}},
    "SincConvergence": {"kernel": {"family": "Newton"}},
    "TuckerConvergence": {"grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 65}},
    "OriginError": {"grid": {"dim": 3, "half_widths": 1.0, "points_per_axis": 129}},
}


def run(cfg: ExperimentConfig, out_dir) -> list:
    """Run one scenario and write its CSV files; returns the written paths."""
    tables = RUNNERS[cfg.scenario](cfg)
    paths = []
    for name, (header, rows) in tables.items():
        paths.append(write_csv(Path(out_dir) / name, header, rows, cfg))
    return paths


def _load_config(args, scenario):
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read config: {exc}") from None
        if not isinstance(data, dict):
            raise ParameterError("config must be a JSON object")
    if scenario is not None:
        if "scenario" in data and data["scenario"] != scenario:
            raise ParameterError(f"config scenario {data['scenario']!r} does not match this subcommand")
        base = dict(SUBCOMMAND_DEFAULTS.get(scenario, {}))
        base.update(data)
        data = base
        data["scenario"] = scenario
    elif "scenario" not in data:
        raise ParameterError("'run' needs a config with a scenario")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.tol is not None:
        data["tol"] = args.tol
    if args.out is not None:
        data["output"] = args.out
    return ExperimentConfig.from_dict(data)


def build_parser():
    parser = argparse.ArgumentParser(prog="tenscov", description="Rank-structured covariance experiments")
    parser.add_argument("--version", action="version", version=f"tenscov {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "approximate": "Tucker approximation error versus rank",
        "decompose": "Tucker error at the origin versus rank",
        "sinc": "sinc-quadrature convergence in M",
        "krige": "kriging, conditional covariance and design criteria",
        "loglik": "rank-1 Kronecker log-likelihood",
        "bench": "trace of Kronecker covariances in high dimension",
        "run": "run the scenario named in --config",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--tol", type=float, help="truncation / solver tolerance")
        p.add_argument("--threads", type=int, help="thread limit for BLAS and FFT")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    threads = args.threads
    if threads is None and os.environ.get("TENSCOV_THREADS"):
        try:
            threads = int(os.environ["TENSCOV_THREADS"])
        except ValueError:
            print("error: TENSCOV_THREADS must be an integer", file=sys.stderr)
            return 2
    try:
        cfg = _load_config(args, SUBCOMMAND_SCENARIO.get(args.command))
        if threads is not None and threads < 1:
            raise ParameterError("--threads must be positive")
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=threads):
            paths = run(cfg, cfg.output)
    except TenscovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return SizeError.exit_code
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
