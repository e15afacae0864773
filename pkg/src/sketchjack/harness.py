"""Monte Carlo evaluation of error, bias, standard deviation and jackknife estimates.

For ``m`` independent runs ``X[1..m]`` of an algorithm on a fixed matrix the
relative metrics are

* ``Err  = (mean_i ||A - X[i]||^2)^(1/2) / ||A||``
* ``Bias = ||A - mean_i X[i]|| / ||A||``
* ``SD   = (mean_i ||X[i] - mean X||^2)^(1/2) / ||A||``

so that ``Err^2 = Bias^2 + SD^2`` holds exactly in the Frobenius norm. Trial
``i`` uses the sketch seed ``derive_seed(base_seed, "trial", s, i)``. Trials
are processed in fixed-size chunks whose accumulators are merged pairwise in
a fixed tree order, so output does not depend on the number of workers.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import jack, nystrom as nys, rsvd as rs
from .errors import MemoryCapError, ParameterError
from .rng import derive_seed, gaussian_matrix
from .testmat import gen_exp_decay, gen_noisy_lr, gen_poly_decay, load_matrix, rbf_kernel, read_table

log = logging.getLogger(__name__)

DEFAULT_S_VALUES = (20, 40, 60, 80, 100, 120, 140)
DEFAULT_MEMORY_CAP = 2 * 1024 ** 3
ALGORITHMS = ("rsvd", "nystrom")
TARGETS = ("none", "projector", "truncation", "schatten")
_DENSE_COPIES = 5


# --------------------------------------------------------------------------
# matrices
# --------------------------------------------------------------------------

def _parse_params(text):
    params = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        if "=" not in item:
            raise ParameterError(f"expected key=value in matrix spec, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = value.strip()
    return params


def build_matrix(spec, d=1000, seed=0, delimiter=","):
    """Parse a matrix spec into ``(matrix_id, MatrixSource)``.

    Accepted forms::

        noisylr:R=5,xi=1e-4[,seed=N]   expdecay:R=5,rate=0.1   polydecay:R=5,p=1
        rbf:PATH[,sigma=10][,drop=col1;col2]   file:PATH   PATH.mjk

    ``d`` sizes the synthetic matrices. NoisyLR draws its Gaussian factor from
    ``seed`` unless the spec names one.
    """
    spec = spec.strip()
    if spec.endswith(".mjk") and not spec.startswith(("file:", "rbf:")):
        spec = "file:" + spec
    name, _, rest = spec.partition(":")
    name = name.lower()
    if name == "file":
        A = load_matrix(rest)
        return f"file({rest})", A
    if name == "rbf":
        path, _, opts = rest.partition(",")
        params = _parse_params(opts)
        sigma = float(params.pop("sigma", 10.0))
        drop = [c for c in params.pop("drop", "quality").split(";") if c]
        if params:
            raise ParameterError(f"unknown rbf options {sorted(params)}")
        names, table = read_table(path, delimiter=delimiter, drop=drop)
        return f"rbf({path},sigma={sigma:g})", rbf_kernel(table, sigma, names)
    if name not in ("noisylr", "expdecay", "polydecay"):
        raise ParameterError(f"unknown matrix family {name!r}")
    params = _parse_params(rest)
    try:
        R = int(params.pop("R", 5))
        if name == "noisylr":
            xi = float(params.pop("xi"))
            mseed = int(params.pop("seed", seed))
            A, label = gen_noisy_lr(d, R, xi, mseed), f"noisylr(R={R},xi={xi:g},d={d},seed={mseed})"
        elif name == "expdecay":
            rate = float(params.pop("rate"))
            A, label = gen_exp_decay(d, R, rate), f"expdecay(R={R},rate={rate:g},d={d})"
        else:
            p = float(params.pop("p"))
            A, label = gen_poly_decay(d, R, p), f"polydecay(R={R},p={p:g},d={d})"
    except KeyError as exc:
        raise ParameterError(f"matrix spec {spec!r} is missing parameter {exc}") from None
    if params:
        raise ParameterError(f"unknown parameters {sorted(params)} for {name}")
    return label, A


# --------------------------------------------------------------------------
# configuration and records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment sweep.

    ``projector_index`` is 1-based (the ``i``-th singular or spectral
    projector). ``target`` selects which output is measured: the full
    approximation, a singular projector, the rank-``truncate_rank``
    truncation, or the full approximation in the Schatten-``schatten_p`` norm.
    """

    matrix: str
    algorithm: str = "rsvd"
    d: int = 1000
    s_values: tuple = DEFAULT_S_VALUES
    q: int = 2
    trials: int = 1000
    seed: int = 0
    target: str = "none"
    projector_index: int = 1
    side: str = "left"
    truncate_rank: int = 10
    schatten_p: int = 4
    fast: bool = True
    shift_multiplier: float = 1.0
    delimiter: str = ","
    memory_cap: int = DEFAULT_MEMORY_CAP
    chunk: int = 10
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ParameterError(f"algorithm must be one of {ALGORITHMS}")
        if self.target not in TARGETS:
            raise ParameterError(f"target must be one of {TARGETS}")
        if self.trials < 1:
            raise ParameterError("need at least one trial")
        if any(int(s) < 2 for s in self.s_values):
            raise ParameterError("jackknife needs s >= 2")
        if self.target == "projector" and self.projector_index < 1:
            raise ParameterError("projector index is 1-based")
        object.__setattr__(self, "s_values", tuple(int(s) for s in self.s_values))

    @property
    def target_label(self):
        if self.target == "projector":
            return f"projector-{self.projector_index}" + ("" if self.side == "left" else "-right")
        if self.target == "truncation":
            return f"truncation-{self.truncate_rank}"
        if self.target == "schatten":
            return f"schatten-{self.schatten_p}"
        return "none"


@dataclass
class MetricsRow:
    matrix_id: str
    algorithm: str
    d1: int
    d2: int
    s: int
    q: int
    trials: int
    err: float = math.nan
    bias: float = math.nan
    sd: float = math.nan
    jack_mean: float = math.nan
    jack_std: float = math.nan
    err_sq_se: float = math.nan
    derived_target: str = "none"
    error: str = ""


CSV_FIELDS = [f.name for f in fields(MetricsRow)]


# --------------------------------------------------------------------------
# per-trial work
# --------------------------------------------------------------------------

@dataclass
class _Problem:
    cfg: ExperimentConfig
    A: object
    A_dense: np.ndarray
    reference: np.ndarray
    scale: float
    p: int
    matrix_id: str = ""


def _schatten_norm(M, p):
    sv = np.linalg.svd(M, compute_uv=False)
    return float(np.sum(sv ** p) ** (1.0 / p))


def _projector_reference(A, index0, side):
    if A.kind == "diagonal":
        order = np.argsort(-np.abs(A.payload), kind="stable")
        v = np.zeros(A.shape[0])
        v[order[index0]] = 1.0
    else:
        U, _, Vt = np.linalg.svd(A.payload)
        v = U[:, index0] if side == "left" else Vt[index0]
    return np.outer(v, v)


def prepare_problem(cfg, matrix=None, matrix_id=None):
    """Build the matrix and its reference output; checks the memory cap."""
    if matrix is None:
        matrix_id, matrix = build_matrix(cfg.matrix, cfg.d, derive_seed(cfg.seed, "matrix"),
                                         cfg.delimiter)
    d1, d2 = matrix.shape
    need = 8 * d1 * d2 * _DENSE_COPIES
    if need > cfg.memory_cap:
        raise MemoryCapError(
            f"dense accumulation needs about {need / 2**20:.0f} MiB for a {d1}x{d2} matrix, "
            f"above the cap of {cfg.memory_cap / 2**20:.0f} MiB; use a smaller matrix or "
            "raise the cap (memory_cap / --memory-cap)")
    A_dense = matrix.to_dense()
    p = cfg.schatten_p if cfg.target == "schatten" else 2
    if cfg.target == "projector":
        reference = _projector_reference(matrix, cfg.projector_index - 1, cfg.side)
        scale = 1.0
    else:
        reference = A_dense
        scale = matrix.fro_norm() if p == 2 else float(np.sum(matrix.singular_values() ** p) ** (1.0 / p))
    return _Problem(cfg, matrix, A_dense, reference, scale, p, matrix_id or cfg.matrix)


def run_trial(problem, s, seed):
    """One algorithm run; returns ``(X, jack_value)`` for the configured target."""
    cfg = problem.cfg
    if cfg.target == "projector" and cfg.projector_index > s:
        raise ParameterError(f"projector index {cfg.projector_index} exceeds s={s}")
    if cfg.target == "truncation" and not 1 <= cfg.truncate_rank <= s:
        raise ParameterError(f"truncation rank {cfg.truncate_rank} not in [1, s={s}]")
    if cfg.algorithm == "rsvd":
        res = rs.rsvd(problem.A, s, cfg.q, seed)
        cores = rs.core_replicates(res, fast=cfg.fast)
        L, M = res.U, res.V
        weights = res.Sigma
    else:
        res = nys.nystrom(problem.A, s, seed, cfg.shift_multiplier)
        cores = nys.core_replicates(res, fast=cfg.fast)
        L = M = res.V
        weights = res.Lambda
    if cfg.target == "projector":
        i0 = cfg.projector_index - 1
        v = (L if cfg.side == "left" else M)[:, i0]
        X = np.outer(v, v)
        cores = rs.projector_replicates(cores, i0, cfg.side, check_gap=False)
        return X, jack.jack_frobenius(cores).value
    if cfg.target == "truncation":
        r = cfg.truncate_rank
        X = (L[:, :r] * weights[:r]) @ M[:, :r].T
        return X, jack.jack_frobenius(jack.truncate_cores(cores, r)).value
    X = (L * weights) @ M.T
    if cfg.target == "schatten":
        return X, jack.jack_schatten(cores, cfg.schatten_p).value
    return X, jack.jack_frobenius(cores).value


@dataclass
class _Acc:
    n: int = 0
    mean: np.ndarray = None
    m2: float = 0.0
    err_sq: list = field(default_factory=list)
    jack: list = field(default_factory=list)


def _merge(a, b):
    if a.n == 0:
        return b
    if b.n == 0:
        return a
    n = a.n + b.n
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.n / n)
    m2 = a.m2 + b.m2 + float(np.sum(delta * delta)) * a.n * b.n / n
    return _Acc(n, mean, m2, a.err_sq + b.err_sq, a.jack + b.jack)


def _run_chunk(problem, s, indices):
    acc = _Acc()
    for i in indices:
        seed = derive_seed(problem.cfg.seed, "trial", s, i)
        X, jv = run_trial(problem, s, seed)
        diff = problem.reference - X
        acc.err_sq.append(float(np.sum(diff * diff)) if problem.p == 2
                          else _schatten_norm(diff, problem.p) ** 2)
        acc.jack.append(jv)
        acc.n += 1
        if acc.mean is None:
            acc.mean = X.copy()
            continue
        delta = X - acc.mean
        acc.mean += delta / acc.n
        acc.m2 += float(np.sum(delta * (X - acc.mean)))
    return acc


def _tree_merge(parts):
    while len(parts) > 1:
        nxt = [_merge(parts[k], parts[k + 1]) for k in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            nxt.append(parts[-1])
        parts = nxt
    return parts[0]


def monte_carlo_metrics(cfg, s, problem=None):
    """Err, Bias, SD and jackknife statistics for one sketch size."""
    problem = problem or prepare_problem(cfg)
    m = cfg.trials
    chunks = [range(k, min(k + cfg.chunk, m)) for k in range(0, m, cfg.chunk)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda idx: _run_chunk(problem, s, idx), chunks))
    else:
        parts = [_run_chunk(problem, s, idx) for idx in chunks]
    acc = _tree_merge(parts)
    scale = problem.scale
    err_sq = np.array(acc.err_sq) / scale ** 2
    jacks = np.array(acc.jack) / scale
    if problem.p == 2:
        diff = problem.reference - acc.mean
        bias = math.sqrt(float(np.sum(diff * diff))) / scale
        sd = math.sqrt(acc.m2 / m) / scale
    else:
        bias = _schatten_norm(problem.reference - acc.mean, problem.p) / scale
        sd = _schatten_second_pass(problem, s, acc.mean) / scale
    d1, d2 = problem.A.shape
    return MetricsRow(
        matrix_id=problem.matrix_id, algorithm=cfg.algorithm, d1=d1, d2=d2, s=s, q=cfg.q if cfg.algorithm == "rsvd" else 0,
        trials=m, err=math.sqrt(float(np.mean(err_sq))), bias=bias, sd=sd,
        jack_mean=float(np.mean(jacks)), jack_std=float(np.std(jacks, ddof=1)) if m > 1 else 0.0,
        err_sq_se=float(np.std(err_sq, ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
        derived_target=cfg.target_label)


def _schatten_second_pass(problem, s, mean):
    cfg = problem.cfg
    total = 0.0
    for i in range(cfg.trials):
        X, _ = run_trial(problem, s, derive_seed(cfg.seed, "trial", s, i))
        total += _schatten_norm(X - mean, problem.p) ** 2
    return math.sqrt(total / cfg.trials)


def sweep_experiment(cfg, out=None):
    """One :class:`MetricsRow` per sketch size; failures land in the ``error`` column."""
    rows = []
    try:
        matrix_id, A = build_matrix(cfg.matrix, cfg.d, derive_seed(cfg.seed, "matrix"), cfg.delimiter)
        problem = prepare_problem(cfg, A, matrix_id)
    except Exception as exc:  # a bad matrix spec fails every row the same way
        log.error("matrix setup failed: %s", exc)
        return _write_maybe([MetricsRow(cfg.matrix, cfg.algorithm, 0, 0, s, cfg.q, cfg.trials,
                                        derived_target=cfg.target_label,
                                        error=f"{type(exc).__name__}: {exc}")
                             for s in cfg.s_values], out)
    for s in cfg.s_values:
        try:
            row = monte_carlo_metrics(cfg, s, problem)
        except Exception as exc:
            log.warning("s=%d failed: %s", s, exc)
            row = MetricsRow(matrix_id, cfg.algorithm, *A.shape, s, cfg.q, cfg.trials,
                             derived_target=cfg.target_label, error=f"{type(exc).__name__}: {exc}")
        log.info("%s %s s=%d err=%.3g sd=%.3g jack=%.3g", matrix_id, cfg.algorithm, s,
                 row.err, row.sd, row.jack_mean)
        rows.append(row)
    return _write_maybe(rows, out)


def projector_sweep(cfg, indices, out=None):
    """Projector-target sweeps for several 1-based indices, concatenated."""
    rows = []
    for i in indices:
        rows.extend(sweep_experiment(replace(cfg, target="projector", projector_index=int(i))))
    return _write_maybe(rows, out)


def _write_maybe(rows, out):
    if out is not None:
        write_csv(rows, out)
    return rows


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def rows_to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        record = asdict(row)
        writer.writerow([_fmt(record[k]) for k in CSV_FIELDS])
    return buf.getvalue()


def write_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_to_csv(rows))


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------
# overestimation and orthoprojector checks
# --------------------------------------------------------------------------

def jackknife_overestimation(A, s, q=2, trials=1000, seed=0, algorithm="rsvd", fast=True):
    """Compare ``mean Jack^2`` of ``s``-column runs with the sample variance of
    independent ``(s - 1)``-column approximations.

    Returns ``(mean_jack_sq, variance, jack_sq_se)``; the jackknife should
    not underestimate on average.
    """
    if algorithm == "rsvd":
        def run(k, sd):
            return rs.rsvd(A, k, q, sd)
        cores_of = rs.core_replicates
    else:
        def run(k, sd):
            return nys.nystrom(A, k, sd)
        cores_of = nys.core_replicates
    jack_sq = np.empty(trials)
    mean = np.zeros(A.shape)
    m2 = 0.0
    for i in range(trials):
        res = run(s, derive_seed(seed, "jack", i))
        jack_sq[i] = jack.jack_frobenius(cores_of(res, fast=fast)).value ** 2
        X = run(s - 1, derive_seed(seed, "independent", i)).approximation()
        delta = X - mean
        mean += delta / (i + 1)
        m2 += float(np.sum(delta * (X - mean)))
    variance = m2 / (trials - 1)
    return float(jack_sq.mean()), variance, float(jack_sq.std(ddof=1) / math.sqrt(trials))


@dataclass
class OrthoprojectorRecord:
    d: int
    s: int
    trials: int
    bias_sq_mc: float
    bias_sq_se: float
    var_mc: float
    var_se: float
    bias_sq_formula: float
    var_formula: float
    bias_formula: float
    sd_formula: float


def orthoprojector_check(d, s, m, seed=0):
    """Monte Carlo bias and variance of a uniformly random rank-``s`` orthoprojector as an
    approximation of the identity.

    ``E X = (s/d) I`` gives ``bias^2 = (d - s)^2 / d`` and ``Var = s (d - s) / d``.
    The Monte Carlo squared bias is the jackknife bias-corrected plug-in
    ``||I - mean X||^2`` with a delete-one jackknife standard error; the
    variance uses ``1/(m - 1)``. ``bias_formula`` and ``sd_formula`` are the
    square roots of the closed forms.
    """
    if not 1 <= s <= d:
        raise ParameterError(f"need 1 <= s <= d, got s={s}, d={d}")
    if m < 2:
        raise ParameterError("need at least 2 trials")
    bases = np.empty((m, d, s))
    mean = np.zeros((d, d))
    for i in range(m):
        Q, _ = np.linalg.qr(gaussian_matrix(d, s, derive_seed(seed, "ortho", i)))
        bases[i] = Q
        mean += Q @ Q.T
    mean /= m
    traces = np.einsum("ijk,ijk->i", bases, bases)
    sq_norms = np.sum(np.einsum("iak,ial->ikl", bases, bases) ** 2, axis=(1, 2))
    inner = np.einsum("iak,ab,ibk->i", bases, mean, bases)
    mean_sq = float(np.sum(mean * mean))
    dev = sq_norms - 2.0 * inner + mean_sq
    var_mc = float(dev.sum() / (m - 1))
    var_se = float(dev.std(ddof=1) / math.sqrt(m))

    plug_in = d - 2.0 * np.trace(mean) + mean_sq
    loo_trace = (m * np.trace(mean) - traces) / (m - 1)
    loo_sq = (m * m * mean_sq - 2.0 * m * inner + sq_norms) / (m - 1) ** 2
    loo = d - 2.0 * loo_trace + loo_sq
    bias_sq_mc = float(m * plug_in - (m - 1) * loo.mean())
    bias_sq_se = math.sqrt((m - 1) / m * jack.tukey_scalar(loo))
    bias_sq = (d - s) ** 2 / d
    var = s * (d - s) / d
    return OrthoprojectorRecord(d, s, m, bias_sq_mc, bias_sq_se, var_mc, var_se,
                                bias_sq, var, math.sqrt(bias_sq), math.sqrt(var))
