"""Experiment catalog, reproducible runs and CSV artifacts.

A run is described by an :class:`ExperimentConfig` (usually parsed from a
flat ``key = value`` file). :func:`resolve_experiment` fills in catalog
defaults, :func:`run` simulates every requested method and writes

* ``<name>_<method>_decay.csv``: ``step,time,kl,tv_bound,var_x_min,var_x_max``
  (plus ``dropped`` for histogram-KL experiments),
* ``<name>_<method>_samples.csv``: ``particle,x1..xd`` terminal positions,
* ``<name>_<method>_scatter.csv``: first and last coordinates (d > 2 only),
* ``manifest.json``: resolved parameters and output list; it can be passed
  back to :func:`run` to replay the experiment bit-exactly.
"""

import configparser
import csv
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .backend import BACKEND, kernels
from .dynamics import DynamicsParams, a_star, gamma_star
from .errors import CatalogError, DivergenceError, DomainError, NoFixedPointError, SchemaError
from .gaussian_theory import continuous_eigenvalues, discrete_map, fixed_point_covariance
from .metrics import gaussian_kl, histogram_kl, tv_upper_bound
from .potentials import (BimodalTarget, MixtureTarget, QuadCosTarget, QuadraticTarget,
                         make_logistic_target, synthesize_logistic_data)
from .sampler import SimConfig, simulate

METHOD_NAMES = {"ol": "overdamped", "ul": "underdamped", "gaul": "gaul"}
DECAY_HEADER = ["step", "time", "kl", "tv_bound", "var_x_min", "var_x_max"]
THEORY_HEADER = ["mode", "s", "re_lam0", "re_lamp", "im_lamp", "y11", "y12", "y22",
                 "cont_rate", "disc_rate"]
STREAM_SETUP = 2


def fmt(v):
    """Seventeen significant digits, enough for an exact float round-trip."""
    return format(float(v), ".17g")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    h: float
    steps: int
    m_full: int
    a: float = 1.0
    strong_convexity: float = None
    init_cov: str = "1"
    hist_n: int = 50


CATALOG = {e.name: e for e in (
    CatalogEntry("gauss1d-small", "gaussian", 1e-4, 400, 100_000),
    CatalogEntry("gauss1d-large", "gaussian", 1e-2, 600, 100_000),
    CatalogEntry("gauss20d", "gaussian", 5e-3, 4000, 100_000, a=float("nan")),
    CatalogEntry("mixture-logconcave", "histogram", 2e-4, 2000, 500_000,
                 a=2.0 / (1.0 - math.sqrt(0.5)), strong_convexity=0.5),
    CatalogEntry("mixture-nonlogconcave", "histogram", 1e-3, 2000, 500_000,
                 strong_convexity=0.5),
    CatalogEntry("quadcos", "histogram", 1e-2, 1000, 500_000, strong_convexity=1.0 / 25.0),
    CatalogEntry("bimodal", "histogram", 1e-3, 500, 1_000_000, strong_convexity=0.5),
    CatalogEntry("bayes-logistic", "histogram", 1e-3, 400, 1_000_000, init_cov="1/L"),
    CatalogEntry("theory-report", "theory", 5e-3, 0, 0, a=float("nan")),
)}


@dataclass(frozen=True)
class ExperimentConfig:
    """User-facing run description; ``None`` fields take catalog defaults."""

    name: str
    method: str = "all"
    m: int = None
    steps: int = None
    h: float = None
    seed: int = 0
    record_every: int = None
    a: float = None
    gamma: float = None
    gamma_ul: float = None
    hist_n: int = None
    hist_bounds: tuple = None
    setup_seed: int = 2024
    full: bool = False
    output: str = "results"

    def __post_init__(self):
        if self.name not in CATALOG:
            raise CatalogError(f"unknown experiment {self.name!r}; known: {sorted(CATALOG)}")
        if self.method not in ("all",) + tuple(METHOD_NAMES):
            raise CatalogError(f"unknown method {self.method!r}")
        for key in ("m", "steps", "record_every", "hist_n"):
            v = getattr(self, key)
            if v is not None and (int(v) != v or v < (0 if key == "steps" else 1)):
                raise CatalogError(f"{key} must be a positive integer")
        for key in ("h", "a", "gamma", "gamma_ul"):
            v = getattr(self, key)
            if v is not None and not (math.isfinite(v) and v >= 0 and (key != "h" or v > 0)):
                raise CatalogError(f"{key} must be a non-negative finite number")
        if not 0 <= self.seed < 2 ** 64:
            raise CatalogError("seed must be an unsigned 64-bit integer")


@dataclass(eq=False)
class ResolvedExperiment:
    config: ExperimentConfig
    entry: CatalogEntry
    target: object
    sims: dict
    info: dict = field(default_factory=dict)


def _rotation(seed):
    """Orthogonal 2x2 factor of a seeded Gaussian matrix, R with positive diagonal."""
    g = kernels.normals(seed, STREAM_SETUP, 1, 2, 2)
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def _build_target(name, setup_seed):
    info = {}
    if name == "gauss1d-small":
        target = QuadraticTarget([100.0])
    elif name == "gauss1d-large":
        target = QuadraticTarget([0.01])
    elif name in ("gauss20d", "theory-report"):
        variances = 0.05 + 5.0 * np.arange(20)
        target = QuadraticTarget(1.0 / variances)
        info["variances"] = variances.tolist()
    elif name == "mixture-logconcave":
        target = MixtureTarget([0.5, 0.5])
    elif name == "mixture-nonlogconcave":
        target = MixtureTarget([3.0, 3.0])
    elif name == "quadcos":
        p = _rotation(setup_seed)
        b_inv = p @ np.diag([1.0, 1.0 / 25.0]) @ p.T
        target = QuadCosTarget(0.5 * (b_inv + b_inv.T), math.sqrt(0.95) * np.ones(2))
        info["rotation"] = p.tolist()
    elif name == "bimodal":
        target = BimodalTarget()
    elif name == "bayes-logistic":
        x, y = synthesize_logistic_data(50, 2, [1.0, 1.0], setup_seed)
        target = make_logistic_target(x, y, 0.5)
        info.update(n=50, alpha=0.5, theta_star=[1.0, 1.0],
                    bound_l=target.bound_l, bound_m=target.bound_m)
    else:
        raise CatalogError(f"unknown experiment {name!r}")
    if isinstance(target, QuadraticTarget):
        info["spectrum"] = target.spectrum.tolist()
    return target, info


def resolve_experiment(config):
    """Fill catalog defaults and build one SimConfig per requested method."""
    entry = CATALOG[config.name]
    target, info = _build_target(config.name, config.setup_seed)
    h = config.h if config.h is not None else entry.h
    steps = config.steps if config.steps is not None else entry.steps
    m = config.m if config.m is not None else (
        entry.m_full if config.full else max(entry.m_full // 10, 1))
    record_every = config.record_every or (1 if entry.kind != "histogram" else max(steps // 200, 1))

    if isinstance(target, QuadraticTarget):
        s1, sd = float(target.spectrum[0]), float(target.spectrum[-1])
        a = entry.a if not math.isnan(entry.a) else a_star(s1, sd)
        a = config.a if config.a is not None else a
        gamma_ul = config.gamma_ul if config.gamma_ul is not None else gamma_star(0.0, sd)
        gamma = config.gamma if config.gamma is not None else gamma_star(a, sd)
    else:
        mconv = entry.strong_convexity
        if mconv is None:
            mconv = target.bound_m
        info["m"] = mconv
        a = config.a if config.a is not None else entry.a
        gamma_ul = config.gamma_ul if config.gamma_ul is not None else 2.0 * math.sqrt(mconv)
        gamma = config.gamma if config.gamma is not None else 2.0 * math.sqrt(mconv) + a * mconv

    init_cov = 1.0 / target.bound_l if entry.init_cov == "1/L" else 1.0
    info.update(a=a, gamma_ul=gamma_ul, gamma_gaul=gamma, h=h, steps=steps, m_particles=m,
                init_cov=init_cov, ol_note="plain ULA; labelled a=1, gamma=0 in the catalog")

    params = {
        "ol": DynamicsParams(a=0.0, gamma=0.0, h=h, method="overdamped"),
        "ul": DynamicsParams(a=0.0, gamma=gamma_ul, h=h, method="underdamped"),
        "gaul": DynamicsParams(a=a, gamma=gamma, h=h, method="gaul"),
    }
    methods = tuple(METHOD_NAMES) if config.method == "all" else (config.method,)
    sims = {}
    if entry.kind != "theory":
        for key in methods:
            sims[key] = SimConfig(target, params[key], m, steps, config.seed, record_every, init_cov)
    return ResolvedExperiment(config, entry, target, sims, info)


def _histogram_metric(target, bounds, n):
    def metric(ens):
        res = histogram_kl(ens.x, lambda pts: -target.potential(pts), bounds, n, log=True)
        return {"kl": res.kl, "dropped": res.dropped}
    return metric


def _gaussian_row(snap, target_cov):
    cov = snap.cov_x
    try:
        kl = gaussian_kl(cov, target_cov)
    except DomainError:
        kl = float("nan")
    tv = tv_upper_bound(target_cov, cov)
    diag = np.diag(cov)
    return [snap.step, snap.time, kl, tv, diag.min(), diag.max()]


def _decay_rows(resolved, record):
    rows = []
    for snap in record.snapshots:
        if resolved.entry.kind == "gaussian":
            rows.append(_gaussian_row(snap, resolved.target.covariance()))
        else:
            diag = np.diag(snap.cov_x)
            rows.append([snap.step, snap.time, snap.metrics["kl"], float("nan"),
                         diag.min(), diag.max(), snap.metrics["dropped"]])
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) if isinstance(v, (int, np.integer)) else fmt(v)
                              for v in row) + "\n")


def _write_samples(path, x, columns):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["particle"] + columns) + "\n")
        idx = np.arange(x.shape[0])[:, None]
        np.savetxt(fh, np.hstack([idx, x]), fmt=["%d"] + ["%.17g"] * x.shape[1], delimiter=",")


def theory_rows(a, gamma, h, spectrum):
    """One row per mode: eigenvalues, discrete fixed point and mode decay rates."""
    s = np.asarray(spectrum, dtype=np.float64)
    try:
        fp = fixed_point_covariance(a, gamma, h, s)
        y = (fp.y11, fp.y12, fp.y22)
    except NoFixedPointError:
        y = tuple(np.full(s.size, np.nan) for _ in range(3))
    radius = discrete_map(a, gamma, h, s).spectral_radius()
    rows = []
    for i, si in enumerate(s):
        spec = continuous_eigenvalues(a, gamma, si)
        rows.append([i, si, spec.lam0.real, spec.lam_plus.real, abs(spec.lam_plus.imag),
                     y[0][i], y[1][i], y[2][i], -spec.lam_plus.real, 1.0 - radius[i]])
    return rows


def _config_dict(config):
    d = asdict(config)
    if d["hist_bounds"] is not None:
        d["hist_bounds"] = [list(b) for b in d["hist_bounds"]]
    return d


def run(config, out_dir=None, threads=None, theory_only=False):
    """Execute an experiment and write its artifacts; returns the manifest dict.

    ``config`` may be an :class:`ExperimentConfig`, a path to a config file
    or a path to a previously written manifest. With ``theory_only`` only
    the per-mode theory table is written (Gaussian experiments only).
    """
    if isinstance(config, (str, os.PathLike)):
        config = load_config(config)
    out = out_dir or config.output
    os.makedirs(out, exist_ok=True)
    resolved = resolve_experiment(config)
    started = time.time()
    manifest = {
        "config": _config_dict(config),
        "resolved": resolved.info,
        "library_version": __version__,
        "backend": BACKEND,
        "python": platform.python_version(),
        "outputs": {},
        "diverged": {},
    }
    if resolved.entry.kind == "theory" or theory_only:
        if "spectrum" not in resolved.info:
            raise CatalogError(f"{config.name} has no Gaussian spectrum for a theory report")
        path = os.path.join(out, f"{config.name}_theory.csv")
        info = resolved.info
        _write_csv(path, THEORY_HEADER,
                   theory_rows(info["a"], info["gamma_gaul"], info["h"], info["spectrum"]))
        manifest["outputs"]["theory"] = [os.path.basename(path)]
    for key, sim in ({} if theory_only else resolved.sims).items():
        metrics = None
        if resolved.entry.kind == "histogram":
            n = config.hist_n or resolved.entry.hist_n
            metrics = [_histogram_metric(resolved.target, config.hist_bounds, n)]
        try:
            record = simulate(sim, metrics=metrics, threads=threads)
        except DivergenceError as err:
            record = err.snapshot
            manifest["diverged"][key] = err.step
        header = DECAY_HEADER + (["dropped"] if resolved.entry.kind == "histogram" else [])
        files = []
        path = os.path.join(out, f"{config.name}_{key}_decay.csv")
        _write_csv(path, header, _decay_rows(resolved, record))
        files.append(os.path.basename(path))
        x = record.final.x
        d = x.shape[1]
        path = os.path.join(out, f"{config.name}_{key}_samples.csv")
        _write_samples(path, x, [f"x{j + 1}" for j in range(d)])
        files.append(os.path.basename(path))
        if d > 2:
            path = os.path.join(out, f"{config.name}_{key}_scatter.csv")
            _write_samples(path, x[:, [0, d - 1]], ["x1", f"x{d}"])
            files.append(os.path.basename(path))
        manifest["outputs"][key] = files
    manifest["wall_clock_seconds"] = time.time() - started
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
    return manifest


_INT_KEYS = {"m", "steps", "seed", "record_every", "hist_n", "setup_seed"}
_FLOAT_KEYS = {"h", "a", "gamma", "gamma_ul"}


def _parse_bounds(text):
    try:
        return tuple(tuple(float(v) for v in part.split(":")) for part in text.split(","))
    except ValueError:
        raise CatalogError(f"bad hist_bounds {text!r}; expected lo:hi,lo:hi") from None


def config_from_mapping(values):
    """Build an ExperimentConfig from string or typed key/value pairs."""
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, raw in values.items():
        key = key.strip().lower()
        if key not in known:
            raise CatalogError(f"unknown config key {key!r}")
        if raw is None:
            continue
        try:
            if key in _INT_KEYS:
                kwargs[key] = int(float(raw)) if not isinstance(raw, int) else raw
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(raw)
            elif key == "full":
                kwargs[key] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes", "on")
            elif key == "hist_bounds":
                kwargs[key] = _parse_bounds(raw) if isinstance(raw, str) else tuple(tuple(b) for b in raw)
            else:
                kwargs[key] = str(raw).strip()
        except (TypeError, ValueError):
            raise CatalogError(f"bad value for {key}: {raw!r}") from None
    if "name" not in kwargs:
        raise CatalogError("config needs a name")
    return ExperimentConfig(**kwargs)


def load_config(path):
    """Read a flat key = value config file or a run manifest (``.json``)."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise CatalogError(f"bad manifest: {err}") from None
        return config_from_mapping(data.get("config", data))
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as err:
        raise CatalogError(f"bad config file: {err}") from None
    return config_from_mapping(dict(parser["experiment"]))


def with_overrides(config, **kwargs):
    """Copy of ``config`` with the given non-None fields replaced."""
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})


@dataclass(frozen=True)
class DecaySummary:
    path: str
    rows: int
    terminal_step: int
    terminal_kl: float
    first_below: int


@dataclass(frozen=True)
class DecayComparison:
    threshold: float
    a: DecaySummary
    b: DecaySummary

    @property
    def faster(self):
        """'a', 'b', 'tie' or None when neither series reaches the threshold."""
        fa, fb = self.a.first_below, self.b.first_below
        if fa < 0 and fb < 0:
            return None
        if fa >= 0 and (fb < 0 or fa < fb):
            return "a"
        if fb >= 0 and (fa < 0 or fb < fa):
            return "b"
        return "tie"


NOT_REACHED = -1


def read_decay(path):
    """Parse a decay CSV, validating the schema; returns (header, rows)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("empty file", 1) from None
        if header not in (DECAY_HEADER, DECAY_HEADER + ["dropped"]):
            raise SchemaError(f"unexpected header {','.join(header)!r}", 1)
        rows = []
        for line, rec in enumerate(reader, start=2):
            if len(rec) != len(header):
                raise SchemaError(f"expected {len(header)} fields, got {len(rec)}", line)
            try:
                vals = [float(v) for v in rec]
            except ValueError:
                raise SchemaError("non-numeric field", line) from None
            if vals[0] != int(vals[0]) or vals[0] < 0:
                raise SchemaError("step must be a non-negative integer", line)
            rows.append(vals)
    return header, rows


def summarize_decay(path, threshold):
    _, rows = read_decay(path)
    first = next((int(r[0]) for r in rows if r[2] < threshold), NOT_REACHED)
    if not rows:
        return DecaySummary(str(path), 0, NOT_REACHED, float("nan"), NOT_REACHED)
    return DecaySummary(str(path), len(rows), int(rows[-1][0]), rows[-1][2], first)


def compare_decay(csv_a, csv_b, threshold=1e-3):
    """Terminal KL and first step below ``threshold`` for two decay CSVs."""
    return DecayComparison(float(threshold), summarize_decay(csv_a, threshold),
                           summarize_decay(csv_b, threshold))
