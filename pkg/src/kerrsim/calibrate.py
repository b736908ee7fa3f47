"""Dataset ingestion and the measurement-chain data-reduction pipeline.

A measured transmission trace carries an affine-amplitude / exponential-phase
baseline from the cabling plus a single resonator line:

    S21_meas(f) = (A + B f~) exp(C + D f~) * (1 - G / (i (f - F) + E))

with f~ the frequency centered on the band midpoint (an affine
reparameterization that conditions the fit; mathematically equivalent to the
uncentered form). The baseline (A..D) is fitted on the lowest-power trace,
where the device response is linear, jointly with the resonator nuisance
parameters (E, F, G); G is allowed complex (asymmetric lines) with
Re G >= 0. Dividing the baseline out leaves the device response alone.

Dataset file contract: CSV with header ``power_dbm,freq_hz,re_s21,im_s21``,
rows grouped by power, UTF-8, '.' decimal, LF endings; or JSON with identical
field names. Baselines persist as JSON.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import CalibrationError

__all__ = [
    "RawDataset",
    "Baseline",
    "fit_baseline",
    "apply_baseline",
    "decimate",
    "read_dataset_csv",
    "write_dataset_csv",
    "read_dataset_json",
    "write_dataset_json",
]


@dataclass
class RawDataset:
    """Per-power complex transmission traces on strictly increasing grids."""

    powers_dbm: list
    freqs_hz: list        # one strictly increasing array per power
    s21: list             # matching complex arrays

    def __post_init__(self):
        if not (len(self.powers_dbm) == len(self.freqs_hz) == len(self.s21)):
            raise ValueError("powers, frequency arrays and traces must align")
        for f, s in zip(self.freqs_hz, self.s21):
            if len(f) != len(s):
                raise ValueError("frequency and s21 arrays differ in length")
            if np.any(np.diff(f) <= 0):
                raise ValueError("frequency arrays must be strictly increasing")

    def trace(self, power_dbm: float):
        i = list(self.powers_dbm).index(power_dbm)
        return np.asarray(self.freqs_hz[i]), np.asarray(self.s21[i])

    @property
    def lowest_power(self) -> float:
        return float(min(self.powers_dbm))


@dataclass
class Baseline:
    """Affine/exponential baseline plus the Lorentzian nuisance parameters.

    A..D act on the centered frequency (f - f_center); E, F, G describe the
    device line seen during the baseline fit and are recorded for provenance
    only (apply_baseline never divides them out).
    """

    A: float
    B: float
    C: float
    D: float
    E: float
    F: float
    G: complex
    f_center: float = 0.0
    residual_rms: float = field(default=float("nan"))

    @classmethod
    def identity(cls) -> "Baseline":
        return cls(A=1.0, B=0.0, C=0.0, D=0.0, E=1.0, F=0.0, G=0.0)

    def envelope(self, freq_hz: np.ndarray) -> np.ndarray:
        f = np.asarray(freq_hz, dtype=float) - self.f_center
        return (self.A + self.B * f) * np.exp(self.C + self.D * f)

    def to_json(self) -> dict:
        return {
            "A": self.A, "B": self.B, "C": self.C, "D": self.D,
            "E": self.E, "F": self.F,
            "G_re": complex(self.G).real, "G_im": complex(self.G).imag,
            "f_center": self.f_center, "residual_rms": self.residual_rms,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Baseline":
        return cls(A=d["A"], B=d["B"], C=d["C"], D=d["D"], E=d["E"], F=d["F"],
                   G=complex(d["G_re"], d["G_im"]), f_center=d["f_center"],
                   residual_rms=d.get("residual_rms", float("nan")))


def fit_baseline(freq_hz: np.ndarray, s21: np.ndarray) -> Baseline:
    """Joint least-squares fit of the baseline and the resonator line.

    Expects the lowest-power (linear-regime) trace. The search runs in
    span-normalized frequency units so every parameter is O(1); results come
    back in Hz. Raises :class:`CalibrationError` on non-convergence.
    """
    freq_hz = np.asarray(freq_hz, dtype=float)
    s21 = np.asarray(s21, dtype=complex)
    f_center = 0.5 * (freq_hz[0] + freq_hz[-1])
    span = freq_hz[-1] - freq_hz[0]
    phi = (freq_hz - f_center) / span  # in [-1/2, 1/2]

    # data-driven starting point: dip position, width and depth
    i0 = int(np.argmin(np.abs(s21)))
    edge_mag = max(0.5 * (abs(s21[0]) + abs(s21[-1])), 1e-12)
    depth = max(1.0 - abs(s21[i0]) / edge_mag, 1e-3)
    half = edge_mag * (1.0 - depth / 2.0)
    width = max(np.count_nonzero(np.abs(s21) < half) / freq_hz.size, 0.01) / 2.0
    x0 = np.array([edge_mag, 0.0, 0.0, 0.0, width, phi[i0],
                   depth * width, 0.0])
    lb = [1e-12, -np.inf, -30.0, -30.0, 1e-9, -0.5, 0.0, -np.inf]
    ub = [np.inf, np.inf, 30.0, 30.0, 10.0, 0.5, np.inf, np.inf]

    def model(x):
        A, B, C, D, E, F, gre, gim = x
        env = (A + B * phi) * np.exp(C + D * phi)
        return env * (1.0 - complex(gre, gim) / (1j * (phi - F) + E))

    def resid(x):
        r = model(x) - s21
        return np.concatenate([r.real, r.imag])

    sol = least_squares(resid, x0, bounds=(lb, ub), xtol=1e-15, ftol=1e-15,
                        gtol=1e-15, max_nfev=20000)
    rms = float(np.sqrt(np.mean(sol.fun**2)))
    if not sol.success or rms > 0.5:
        raise CalibrationError(
            f"baseline fit did not converge: {sol.message} (residual rms {rms:.3e})"
        )
    A, B, C, D, E, F, gre, gim = sol.x
    return Baseline(A=A, B=B / span, C=C, D=D / span, E=E * span,
                    F=f_center + F * span, G=complex(gre, gim) * span,
                    f_center=f_center, residual_rms=rms)


def apply_baseline(dataset: RawDataset, bl: Baseline) -> RawDataset:
    """Divide the baseline envelope out of every trace.

    Idempotent when re-applied with the identity baseline. Raises
    :class:`CalibrationError` if the envelope crosses zero in band.
    """
    freqs, traces = [], []
    for f, s in zip(dataset.freqs_hz, dataset.s21):
        env = bl.envelope(f)
        if np.any(np.abs(env) < 1e-12):
            raise CalibrationError("baseline envelope crosses zero in band")
        freqs.append(np.asarray(f, dtype=float).copy())
        traces.append(np.asarray(s, dtype=complex) / env)
    return RawDataset(powers_dbm=list(dataset.powers_dbm), freqs_hz=freqs,
                      s21=traces)


def decimate(dataset: RawDataset, block: int = 10) -> RawDataset:
    """Average blocks of ``block`` successive points (complex mean for S21).

    Frequencies get the arithmetic block mean; a trailing partial block is
    averaged as-is. Complex averaging (not magnitude/phase) keeps the
    operation linear in the baseline model.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    if block == 1:
        return RawDataset(powers_dbm=list(dataset.powers_dbm),
                          freqs_hz=[np.asarray(f, dtype=float).copy()
                                    for f in dataset.freqs_hz],
                          s21=[np.asarray(s, dtype=complex).copy()
                               for s in dataset.s21])
    freqs, traces = [], []
    for f, s in zip(dataset.freqs_hz, dataset.s21):
        f = np.asarray(f, dtype=float)
        s = np.asarray(s, dtype=complex)
        nfull = len(f) // block
        cut = nfull * block
        fb = f[:cut].reshape(nfull, block).mean(axis=1)
        sb = s[:cut].reshape(nfull, block).mean(axis=1)
        if cut < len(f):
            fb = np.append(fb, f[cut:].mean())
            sb = np.append(sb, s[cut:].mean())
        freqs.append(fb)
        traces.append(sb)
    return RawDataset(powers_dbm=list(dataset.powers_dbm), freqs_hz=freqs,
                      s21=traces)


def write_dataset_csv(dataset: RawDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("power_dbm,freq_hz,re_s21,im_s21\n")
        for p, f, s in zip(dataset.powers_dbm, dataset.freqs_hz, dataset.s21):
            for fi, si in zip(f, s):
                fh.write(f"{p:.10g},{fi:.17g},{si.real:.17g},{si.imag:.17g}\n")


def read_dataset_csv(path) -> RawDataset:
    powers, freqs, traces = [], [], []
    cur_p, cur_f, cur_s = None, [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "power_dbm,freq_hz,re_s21,im_s21":
            raise ValueError(f"unexpected dataset header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            p_s, f_s, re_s, im_s = line.split(",")
            p = float(p_s)
            if cur_p is None or p != cur_p:
                if cur_p is not None:
                    powers.append(cur_p)
                    freqs.append(np.array(cur_f))
                    traces.append(np.array(cur_s))
                cur_p, cur_f, cur_s = p, [], []
            cur_f.append(float(f_s))
            cur_s.append(complex(float(re_s), float(im_s)))
    if cur_p is not None:
        powers.append(cur_p)
        freqs.append(np.array(cur_f))
        traces.append(np.array(cur_s))
    return RawDataset(powers_dbm=powers, freqs_hz=freqs, s21=traces)


def write_dataset_json(dataset: RawDataset, path) -> None:
    obj = [
        {
            "power_dbm": p,
            "freq_hz": list(map(float, f)),
            "re_s21": [float(v.real) for v in s],
            "im_s21": [float(v.imag) for v in s],
        }
        for p, f, s in zip(dataset.powers_dbm, dataset.freqs_hz, dataset.s21)
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)


def read_dataset_json(path) -> RawDataset:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return RawDataset(
        powers_dbm=[t["power_dbm"] for t in obj],
        freqs_hz=[np.array(t["freq_hz"], dtype=float) for t in obj],
        s21=[np.array(t["re_s21"]) + 1j * np.array(t["im_s21"]) for t in obj],
    )
