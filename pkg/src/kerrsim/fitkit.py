"""Model fitting: weighted transmission cost, Powell search, synthetic data.

The cost over a dataset sums, per power, the pointwise complex deviation of
the model trace from the data plus two weighted scalar terms: the depth and
the frequency of the transmission minimum, each worth 200 points. The
frequency difference is normalized by the candidate linewidth (w_f = 1/kappa)
to keep the cost dimensionless; fitted-cost magnitudes are therefore
comparable only within this package, fitted parameters are comparable to
anything.

The minimizer is a conjugate-direction (Powell) search with bounded
golden-section line minimization, deterministic for given inputs. It is
implemented here rather than borrowed so the quadratic/Rosenbrock oracles in
the test suite genuinely cross-check an independent implementation
(scipy.optimize is used in the tests as the second opinion, never here).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import classical, fock, response
from .calibrate import Baseline, RawDataset
from .constants import TWO_PI
from .device import CircuitParams, DriveSpec, drive_strength
from .errors import BracketingError, KerrsimError

__all__ = [
    "FitProblem",
    "FitResult",
    "cost",
    "powell_minimize",
    "fit",
    "synthesize",
    "quantum_problem",
    "classical_nl_problem",
]

MIN_WEIGHT = 200.0

_GOLD = 0.5 * (math.sqrt(5.0) - 1.0)  # 0.618...


@dataclass
class FitProblem:
    """Free/fixed split plus the calibrated dataset to fit.

    ``free`` maps name -> (lower, upper, initial); ``fixed`` maps name ->
    value. ``model`` is "quantum" or "classical_nl". Dataset powers are
    source powers (dBm at the instrument); the attenuation parameter maps
    them to device powers.
    """

    dataset: RawDataset
    model: str
    free: dict
    fixed: dict
    dim_margin: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.model not in ("quantum", "classical_nl"):
            raise ValueError(f"unknown model {self.model!r}")
        overlap = set(self.free) & set(self.fixed)
        if overlap:
            raise ValueError(f"parameters both free and fixed: {sorted(overlap)}")
        for name, (lo, hi, x0) in self.free.items():
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"bounds for {name} must be finite with lo < hi")
            if not lo <= x0 <= hi:
                raise ValueError(f"initial {name}={x0} outside [{lo}, {hi}]")

    @property
    def names(self):
        return list(self.free)


@dataclass
class FitResult:
    params: dict
    cost: float
    n_evals: int
    converged: bool
    residuals: list = field(default_factory=list)  # per-power trace costs
    metadata: dict = field(default_factory=dict)


def _trace_min(omega: np.ndarray, s21: np.ndarray) -> tuple[float, float]:
    """Refined (min |S21|, omega_min); grid values when refinement fails."""
    try:
        omega_min, min_abs = response._parabolic_min(omega, np.abs(s21))
    except BracketingError:
        i = int(np.argmin(np.abs(s21)))
        omega_min, min_abs = float(omega[i]), float(np.abs(s21[i]))
    return min_abs, omega_min


def _model_trace(problem: FitProblem, p: dict, power_dbm_source: float,
                 omega: np.ndarray) -> np.ndarray:
    if problem.model == "quantum":
        params = CircuitParams(omega_r=p["omega_r"], kappa_int=p["kappa_int"],
                               kappa_ext=p["kappa_ext"], K=p["K"],
                               n_th=p.get("n_th", 0.0))
        drive = DriveSpec(power_dbm_at_source=power_dbm_source,
                          attenuation_db=p["attenuation_db"], omega_d=omega)
        dim = None
        if problem.dim_margin:
            dim = fock.adequate_dim(
                2.0 * drive_strength(drive, params) / params.kappa
            ) + problem.dim_margin
        return response.sweep("quantum", params, drive, dim=dim,
                              threads=problem.threads).s21
    # classical_nl: resonance pinned to the quantum-fit value, gamma and K free
    params = CircuitParams(omega_r=p["omega_r_classical"],
                           kappa_int=p["kappa_int"], kappa_ext=p["kappa_ext"],
                           K=p["K"], n_th=p.get("n_th", 0.0))
    drive = DriveSpec(power_dbm_at_source=power_dbm_source,
                      attenuation_db=p["attenuation_db"], omega_d=omega)
    eps = drive_strength(drive, params)
    deltas = p["omega_r_classical"] - omega
    return classical.s21_amplitudes(params, p["gamma"], eps, deltas)


def cost(problem: FitProblem, candidate: dict) -> tuple[float, list]:
    """Weighted dataset cost at one parameter point.

    Returns (total, per_power_trace_costs). Model failures (truncation,
    solver breakdown) evaluate to +inf rather than raising, so a search can
    step across them.
    """
    p = dict(problem.fixed)
    p.update(candidate)
    kappa = p["kappa_int"] + p["kappa_ext"]
    total = 0.0
    per_power = []
    for power, freq_hz, s21_data in zip(problem.dataset.powers_dbm,
                                        problem.dataset.freqs_hz,
                                        problem.dataset.s21):
        omega = TWO_PI * np.asarray(freq_hz, dtype=float)
        # the cost is a sum over points; sort so the dip refinement sees a
        # monotone grid whatever the row order was
        order = np.argsort(omega)
        omega = omega[order]
        s21_data = np.asarray(s21_data)[order]
        try:
            s21_model = _model_trace(problem, p, float(power), omega)
        except (KerrsimError, ValueError, FloatingPointError):
            return float("inf"), []
        t1 = float(np.sum(np.abs(s21_model - s21_data)))
        mmin_m, omin_m = _trace_min(omega, s21_model)
        mmin_d, omin_d = _trace_min(omega, np.asarray(s21_data))
        t2 = MIN_WEIGHT * abs(mmin_m - mmin_d)
        t3 = MIN_WEIGHT * abs(omin_m - omin_d) / kappa
        total += t1 + t2 + t3
        per_power.append(t1)
    return total, per_power


def _bracket(g, t0: float, f0: float, step: float, lo: float, hi: float):
    """Expand from t0 until a minimum is bracketed inside [lo, hi]."""
    a, fa = t0, f0
    b = min(max(t0 + step, lo), hi)
    fb = g(b)
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
        step = -step
    while True:
        c = b + (1.0 + _GOLD) * (b - a)
        if c <= lo or c >= hi:
            c = lo if c <= lo else hi
            fc = g(c)
            return (a, b, c, fa, fb, fc) if fc >= fb else (b, c, c, fb, fc, fc)
        fc = g(c)
        if fc >= fb:
            return a, b, c, fa, fb, fc
        a, b, fa, fb = b, c, fb, fc


def _golden(g, a, b, c, fb, tol):
    """Golden-section shrink of the bracket (a, b, c) to width tol."""
    x0, x3 = a, c
    if abs(c - b) > abs(b - a):
        x1, f1 = b, fb
        x2 = b + (1.0 - _GOLD) * (c - b)
        f2 = g(x2)
    else:
        x2, f2 = b, fb
        x1 = b - (1.0 - _GOLD) * (b - a)
        f1 = g(x1)
    while abs(x3 - x0) > tol:
        if f2 < f1:
            x0, x1, f1 = x1, x2, f2
            x2 = _GOLD * x1 + (1.0 - _GOLD) * x3
            f2 = g(x2)
        else:
            x3, x2, f2 = x2, x1, f1
            x1 = _GOLD * x2 + (1.0 - _GOLD) * x0
            f1 = g(x1)
    return (x1, f1) if f1 < f2 else (x2, f2)


def powell_minimize(f, x0, bounds, tol: float = 1e-6, max_evals: int = 20000,
                    line_tol: float = 1e-8, names=None) -> FitResult:
    """Bounded Powell conjugate-direction minimization.

    Works in box-normalized coordinates (each parameter mapped to [0, 1]).
    Line minimizations bracket from the current point and shrink by golden
    section to ``line_tol`` (normalized units). Terminates when a full
    direction cycle improves the cost by less than ``tol`` relatively, or on
    the evaluation budget (converged=False then). Deterministic.
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("initial point outside bounds")
    span = hi - lo
    n = x0.size
    evals = [0]

    def fz(z):
        evals[0] += 1
        return float(f(lo + np.clip(z, 0.0, 1.0) * span))

    z = (x0 - lo) / span
    fcur = fz(z)
    if not np.isfinite(fcur):
        raise ValueError("objective not finite at the initial point")
    dirs = np.eye(n)
    converged = False

    def linmin(z, fzv, d):
        nd = np.linalg.norm(d)
        if nd == 0.0:
            return z, fzv
        d = d / nd
        # feasible segment [tmin, tmax] of z + t d inside the unit box
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(d > 0, (1.0 - z) / d, np.where(d < 0, -z / d, np.inf))
            t2 = np.where(d > 0, -z / d, np.where(d < 0, (1.0 - z) / d, -np.inf))
        tmax = float(np.min(t1))
        tmin = float(np.max(t2))
        if tmax <= tmin:
            return z, fzv
        g = lambda t: fz(z + t * d)
        step = min(0.1, 0.25 * (tmax - tmin))
        a, b, c, fa, fb, fc = _bracket(g, 0.0, fzv, step, tmin, tmax)
        if a == b or b == c:
            tbest, fbest = (b, fb) if fb < fzv else (0.0, fzv)
        else:
            tbest, fbest = _golden(g, a, b, c, fb, line_tol)
        if fbest >= fzv:
            return z, fzv
        return np.clip(z + tbest * d, 0.0, 1.0), fbest

    while evals[0] < max_evals:
        f_start = fcur
        z_start = z.copy()
        biggest_drop, drop_idx = 0.0, 0
        for i in range(n):
            f_before = fcur
            z, fcur = linmin(z, fcur, dirs[i])
            if f_before - fcur > biggest_drop:
                biggest_drop, drop_idx = f_before - fcur, i
        if 2.0 * (f_start - fcur) <= tol * (abs(f_start) + abs(fcur)) + 1e-300:
            converged = True
            break
        # Powell's direction-replacement criterion on the extrapolated point
        z_ext = 2.0 * z - z_start
        if np.all(z_ext >= 0.0) and np.all(z_ext <= 1.0):
            f_ext = fz(z_ext)
            if f_ext < f_start:
                t = 2.0 * (f_start - 2.0 * fcur + f_ext) \
                    * (f_start - fcur - biggest_drop) ** 2 \
                    - biggest_drop * (f_start - f_ext) ** 2
                if t < 0.0:
                    new_dir = z - z_start
                    z, fcur = linmin(z, fcur, new_dir)
                    dirs[drop_idx] = dirs[n - 1]
                    dirs[n - 1] = new_dir / max(np.linalg.norm(new_dir), 1e-300)
    x = lo + z * span
    if names is None:
        names = [f"x{i}" for i in range(n)]
    return FitResult(params=dict(zip(names, x)), cost=fcur, n_evals=evals[0],
                     converged=converged)


def quantum_problem(dataset: RawDataset, initial: dict, n_th: float = 0.0,
                    rel_window: float = 0.10, threads: int = 1) -> FitProblem:
    """Five-parameter quantum-model problem around an initial guess.

    Free: omega_r, kappa_int, kappa_ext, K, attenuation_db. The bounds are a
    relative window around the initial values (omega_r gets a tighter window,
    its scale being so far above the linewidth).
    """
    free = {}
    for name in ("kappa_int", "kappa_ext", "K"):
        v = initial[name]
        free[name] = (v * (1 - rel_window * 3), v * (1 + rel_window * 3), v)
    wr = initial["omega_r"]
    free["omega_r"] = (wr - 30 * initial["kappa_ext"],
                       wr + 30 * initial["kappa_ext"], wr)
    att = initial["attenuation_db"]
    free["attenuation_db"] = (att - 2.0, att + 2.0, att)
    return FitProblem(dataset=dataset, model="quantum", free=free,
                      fixed={"n_th": n_th}, threads=threads)


def classical_nl_problem(dataset: RawDataset, quantum_params: CircuitParams,
                         attenuation_db: float,
                         gamma_window: tuple = (0.0, None),
                         threads: int = 1) -> FitProblem:
    """Two-parameter (gamma, K) problem with everything else pinned.

    The dampings, the attenuation and the oscillator frequency (omega_r - K,
    the physical resonance) stay at the quantum-fit values.
    """
    K0 = quantum_params.K
    hi = gamma_window[1]
    if hi is None:
        hi = 40.0 * K0**2 / quantum_params.kappa
    free = {
        "gamma": (gamma_window[0], hi, 2.0 * K0**2 / quantum_params.kappa),
        "K": (0.5 * K0, 1.5 * K0, K0),
    }
    fixed = {
        "omega_r_classical": quantum_params.omega_r - quantum_params.K,
        "kappa_int": quantum_params.kappa_int,
        "kappa_ext": quantum_params.kappa_ext,
        "attenuation_db": attenuation_db,
        "n_th": quantum_params.n_th,
    }
    return FitProblem(dataset=dataset, model="classical_nl", free=free,
                      fixed=fixed, threads=threads)


def fit(problem: FitProblem, tol: float = 1e-6, max_evals: int = 4000,
        line_tol: float = 1e-4, bootstrap: int = 0, seed: int = 0) -> FitResult:
    """Minimize the dataset cost over the problem's free parameters.

    Runs a second Powell pass from the converged point with a tightened
    tolerance (a reproducible stand-in for by-hand touch-up), then optional
    residual-resampling bootstrap for parameter spreads.
    """
    names = problem.names
    x0 = [problem.free[k][2] for k in names]
    bounds = [(problem.free[k][0], problem.free[k][1]) for k in names]

    def objective(x):
        return cost(problem, dict(zip(names, x)))[0]

    first = powell_minimize(objective, x0, bounds, tol=tol,
                            max_evals=max_evals, line_tol=line_tol,
                            names=names)
    second = powell_minimize(objective, [first.params[k] for k in names],
                             bounds, tol=tol * 1e-2,
                             max_evals=max(200, max_evals // 4),
                             line_tol=line_tol * 1e-2, names=names)
    best = second if second.cost <= first.cost else first
    total, per_power = cost(problem, best.params)
    result = FitResult(params=best.params, cost=total,
                       n_evals=first.n_evals + second.n_evals,
                       converged=first.converged or second.converged,
                       residuals=per_power,
                       metadata={"frequency_weight": "1/kappa",
                                 "min_weight": MIN_WEIGHT,
                                 "model": problem.model})
    if bootstrap > 0:
        result.metadata["bootstrap"] = _bootstrap_spread(
            problem, result, replicas=bootstrap, seed=seed, tol=tol,
            line_tol=line_tol, max_evals=max_evals)
    return result


def _bootstrap_spread(problem: FitProblem, result: FitResult, replicas: int,
                      seed: int, tol: float, line_tol: float,
                      max_evals: int) -> dict:
    """Residual-resampling bootstrap: refit on model + resampled residuals."""
    rng = np.random.default_rng(seed)
    names = problem.names
    p_hat = dict(problem.fixed)
    p_hat.update(result.params)
    model_traces, residuals = [], []
    for power, freq_hz, s21_data in zip(problem.dataset.powers_dbm,
                                        problem.dataset.freqs_hz,
                                        problem.dataset.s21):
        m = _model_trace(problem, p_hat, float(power),
                         TWO_PI * np.asarray(freq_hz, dtype=float))
        model_traces.append(m)
        residuals.append(np.asarray(s21_data) - m)
    pooled = np.concatenate(residuals)
    samples = {k: [] for k in names}
    for _ in range(replicas):
        fake = []
        for m in model_traces:
            fake.append(m + rng.choice(pooled, size=m.size, replace=True))
        boot = FitProblem(
            dataset=RawDataset(powers_dbm=list(problem.dataset.powers_dbm),
                               freqs_hz=[np.asarray(f) for f in
                                         problem.dataset.freqs_hz],
                               s21=fake),
            model=problem.model,
            free={k: (problem.free[k][0], problem.free[k][1],
                      result.params[k]) for k in names},
            fixed=dict(problem.fixed), threads=problem.threads)

        def objective(x, _b=boot):
            return cost(_b, dict(zip(names, x)))[0]

        r = powell_minimize(objective, [result.params[k] for k in names],
                            [(problem.free[k][0], problem.free[k][1])
                             for k in names],
                            tol=tol * 10, max_evals=max_evals // 4,
                            line_tol=line_tol, names=names)
        for k in names:
            samples[k].append(r.params[k])
    return {k: {"mean": float(np.mean(v)), "std": float(np.std(v))}
            for k, v in samples.items()}


def synthesize(params: CircuitParams, powers_dbm_source, attenuation_db: float,
               freq_grids_hz, noise_sigma: float = 0.0,
               baseline: Baseline | None = None, seed: int = 0,
               threads: int = 1) -> RawDataset:
    """Forward-model a dataset with the quantum backend.

    Applies the baseline envelope (if any) and adds i.i.d. complex Gaussian
    noise with ``noise_sigma`` per quadrature; bit-exact reproducible for a
    given seed.
    """
    rng = np.random.default_rng(seed)
    powers = list(powers_dbm_source)
    freqs, traces = [], []
    for power, freq_hz in zip(powers, freq_grids_hz):
        freq_hz = np.asarray(freq_hz, dtype=float)
        drive = DriveSpec(power_dbm_at_source=float(power),
                          attenuation_db=attenuation_db,
                          omega_d=TWO_PI * freq_hz)
        trace = response.sweep("quantum", params, drive, threads=threads)
        s21 = trace.s21
        if baseline is not None:
            s21 = s21 * baseline.envelope(freq_hz)
        if noise_sigma > 0.0:
            s21 = s21 + noise_sigma * (rng.standard_normal(s21.size)
                                       + 1j * rng.standard_normal(s21.size))
        freqs.append(freq_hz)
        traces.append(s21)
    return RawDataset(powers_dbm=powers, freqs_hz=freqs, s21=traces)
