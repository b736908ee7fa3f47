"""Phase-space layer: Wigner function, currents, continuity, squeezing.

Conventions: x = (a + ad)/sqrt(2), p = -i(a - ad)/sqrt(2), so a coherent
state alpha sits at (x, p) = sqrt(2) (Re alpha, Im alpha) and the vacuum is
W(x, p) = exp(-x^2 - p^2)/pi, normalized to 1 under dx dp.

W is evaluated pointwise through the displaced-parity representation
W = (1/pi) Tr[rho D(2 beta) (-1)^n], beta = (x + i p)/sqrt(2), expanded over
the density-matrix diagonals with normalized associated-Laguerre recurrences;
every intermediate stays O(1), which keeps the evaluation stable up to
dim ~ 256. Currents follow the Moyal-bracket decomposition of the
rotating-frame generator: harmonic, drive, two Kerr pieces (first and third
derivative orders), damping and diffusion. All currents are rad/s times
probability density; report MHz (ordinary frequency, value / 2 pi / 1e6)
when serializing.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import fock
from .constants import TWO_PI
from .device import CircuitParams
from .errors import GridError

__all__ = [
    "PhaseSpaceGrid",
    "WignerField",
    "weyl_symbol_points",
    "wigner_grid",
    "currents",
    "current_integrals",
    "divergence",
    "continuity_residual",
    "kerr_deform",
    "squeeze_scan",
]

CURRENT_NAMES = ("harmonic", "drive", "kerr1", "kerr2", "damping", "diffusion")


@dataclass
class PhaseSpaceGrid:
    """Uniform rectangular grid over the two quadratures."""

    x: np.ndarray
    p: np.ndarray

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def hp(self) -> float:
        return float(self.p[1] - self.p[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.size, self.p.size

    @classmethod
    def for_amplitude(cls, alpha: complex, n: int = 201,
                      pad: float = 5.0) -> "PhaseSpaceGrid":
        """Symmetric grid covering a state of coherent amplitude ``alpha``.

        Extent +-(sqrt(2)|alpha| + pad) in both quadratures; the default pad
        keeps the boundary Wigner mass below the 1e-7 coverage requirement.
        """
        ext = math.sqrt(2.0) * abs(alpha) + pad
        axis = np.linspace(-ext, ext, n)
        return cls(x=axis, p=axis.copy())

    def meshes(self):
        return np.meshgrid(self.x, self.p, indexing="ij")


@dataclass
class WignerField:
    """W on a grid plus (optionally) the named current vector fields.

    ``currents[name]`` has shape (2, nx, np): the x and p components.
    ``rho`` keeps the source state so continuity checks can re-apply the
    generator to it.
    """

    grid: PhaseSpaceGrid
    W: np.ndarray
    currents: dict = field(default_factory=dict)
    rho: np.ndarray | None = None

    def norm(self) -> float:
        return float(_integrate(self.W, self.grid))


def _integrate(F: np.ndarray, grid: PhaseSpaceGrid) -> float:
    return float(np.trapezoid(np.trapezoid(F, grid.p, axis=1), grid.x, axis=0))


def weyl_symbol_points(mat: np.ndarray, xs: np.ndarray,
                       ps: np.ndarray) -> np.ndarray:
    """Wigner/Weyl transform of a Hermitian matrix at arbitrary (x, p) points.

    Expansion over matrix diagonals d with scaled Laguerre recurrences:
    every factor is kept O(1) by pairing z^d / sqrt(d!) with
    sqrt(d! m!/(m+d)!) L_m^d and folding exp(-|z|^2/2) into the prefactor.
    """
    dim = mat.shape[0]
    # the transform of the anti-Hermitian part would be imaginary; drop it
    mat = 0.5 * (mat + mat.conj().T)
    scale = max(np.max(np.abs(mat)), 1e-300)
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    z = math.sqrt(2.0) * (xs + 1j * ps)  # 2 beta
    y = np.abs(z) ** 2
    out = np.zeros_like(y)
    signs = (-1.0) ** np.arange(dim)
    for d in range(dim):
        diag = np.diagonal(mat, offset=d)
        if not np.any(np.abs(diag) > 1e-16 * scale):
            continue
        coeffs = diag * signs[: dim - d]
        # sum_m coeffs_m * Mtilde_m^d(y) via the three-term recurrence
        m_prev = np.ones_like(y)
        acc = coeffs[0] * m_prev
        if dim - d > 1:
            m_cur = (1.0 + d - y) / math.sqrt(1.0 + d)
            acc = acc + coeffs[1] * m_cur
            for m in range(1, dim - d - 1):
                m_next = ((2 * m + d + 1 - y) * m_cur
                          - math.sqrt(m * (m + d)) * m_prev
                          ) / math.sqrt((m + 1) * (m + 1 + d))
                m_prev, m_cur = m_cur, m_next
                acc = acc + coeffs[m + 1] * m_cur
        if d == 0:
            pref = np.exp(-0.5 * y)
            out += (pref * acc).real
        else:
            # z^d/sqrt(d!) e^{-y/2}, built in the log domain to stay finite
            logmag = d * np.log(np.maximum(np.abs(z), 1e-300)) \
                - 0.5 * math.lgamma(d + 1.0) - 0.5 * y
            pref = np.exp(logmag + 1j * d * np.angle(z))
            out += 2.0 * (pref * acc).real
    return out / math.pi


def wigner_grid(rho: np.ndarray, grid: PhaseSpaceGrid,
                check_support: bool = True) -> WignerField:
    """Wigner function of a density matrix on the grid.

    Raises :class:`GridError` when the boundary carries more than 1e-7 of the
    peak value, i.e. the grid fails to cover the state support.
    """
    X, P = grid.meshes()
    W = weyl_symbol_points(rho, X.ravel(), P.ravel()).reshape(X.shape)
    if check_support:
        peak = np.max(np.abs(W))
        edge = max(np.max(np.abs(W[0, :])), np.max(np.abs(W[-1, :])),
                   np.max(np.abs(W[:, 0])), np.max(np.abs(W[:, -1])))
        if edge > 1e-7 * peak:
            ext = 1.5 * max(abs(grid.x[0]), grid.x[-1])
            raise GridError(
                f"boundary |W| = {edge:.2e} exceeds 1e-7 of the peak "
                f"{peak:.2e}; widen the grid",
                suggested_bounds=(-ext, ext),
            )
    return WignerField(grid=grid, W=W, rho=rho)


def _fd_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights at point 0 for the given integer offsets.

    Fornberg's recursion; exact for any stencil, used to build the one-sided
    boundary stencils so the central-interior accuracy order carries to the
    edges.
    """
    x = np.asarray(offsets, dtype=float)
    n = x.size
    w = np.zeros((order + 1, n))
    w[0, 0] = 1.0
    c1, c4 = 1.0, x[0]
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = (c4 * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = c4 * w[0, j] / c3
        c1 = c2
    return w[order]


# 4th-order stencils: central for the interior, skewed for the 2 edge rows
_C1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_C2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_E1 = [_fd_weights(np.arange(6) - s, 1) for s in (0, 1)]
_E2 = [_fd_weights(np.arange(6) - s, 2) for s in (0, 1)]
assert np.allclose(_fd_weights(np.arange(-2, 3), 1), _C1)
assert np.allclose(_fd_weights(np.arange(-2, 3), 2), _C2)


def _deriv(F: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    """4th-order derivative along an axis, one-sided at the boundaries."""
    A = F if axis == 0 else F.T
    out = np.empty_like(A)
    c = _C1 if order == 1 else _C2
    out[2:-2] = (c[0] * A[:-4] + c[1] * A[1:-3] + c[2] * A[2:-2]
                 + c[3] * A[3:-1] + c[4] * A[4:])
    edge = _E1 if order == 1 else _E2
    sgn = -1.0 if order == 1 else 1.0
    for s in (0, 1):
        out[s] = edge[s] @ A[:6]
        out[-1 - s] = sgn * (edge[s][::-1] @ A[-6:])
    return (out if axis == 0 else out.T) / h**order


def _dx(F, h):  # noqa: D103
    return _deriv(F, h, 0, 1)


def _dp(F, h):  # noqa: D103
    return _deriv(F, h, 1, 1)


def _dxx(F, h):  # noqa: D103
    return _deriv(F, h, 0, 2)


def _dpp(F, h):  # noqa: D103
    return _deriv(F, h, 1, 2)


def currents(fieldw: WignerField, params: CircuitParams, delta: float,
             epsilon: float) -> WignerField:
    """Fill the six Wigner-current fields for the rotating-frame generator.

    ``delta`` is the detuning of the frame the state lives in (the quantum
    Delta_q of the Liouvillian that produced rho). Derivatives use 4th-order
    central stencils; currents vanish on cells with W below 1e-10.
    """
    grid = fieldw.grid
    W = fieldw.W
    X, P = grid.meshes()
    hx, hp = grid.hx, grid.hp
    Wx, Wgrad_p = _dx(W, hx), _dp(W, hp)
    Wxx, Wpp2 = _dxx(W, hx), _dpp(W, hp)
    Wxp = _dp(_dx(W, hx), hp)
    K, kappa, n_th = params.K, params.kappa, params.n_th
    r2 = X**2 + P**2

    cur = {
        "harmonic": np.stack([(delta + K) * P * W, -(delta + K) * X * W]),
        "drive": np.stack([math.sqrt(2.0) * epsilon * W, np.zeros_like(W)]),
        "kerr1": np.stack([-0.5 * K * r2 * P * W, 0.5 * K * r2 * X * W]),
        "kerr2": (K / 24.0) * np.stack([
            P * (3.0 * Wxx + Wpp2) - 2.0 * X * Wxp,
            -X * (Wxx + 3.0 * Wpp2) + 2.0 * P * Wxp,
        ]),
        "damping": np.stack([-0.5 * kappa * X * W, -0.5 * kappa * P * W]),
        "diffusion": np.stack([
            -0.5 * kappa * (n_th + 0.5) * Wx,
            -0.5 * kappa * (n_th + 0.5) * Wgrad_p,
        ]),
    }
    dead = np.abs(W) < 1e-10
    for name in cur:
        cur[name][:, dead] = 0.0
    return WignerField(grid=grid, W=W, currents=cur, rho=fieldw.rho)


def current_integrals(fieldw: WignerField) -> dict:
    """Magnitude integrals of the environmental and drive currents (rad/s).

    env = damping + diffusion. ``drive_proj_env`` integrates the projection
    of the drive current onto the local env direction; it measures how much
    of the drive actually opposes the environment.
    """
    if "damping" not in fieldw.currents:
        raise ValueError("call currents() first")
    grid = fieldw.grid
    env = fieldw.currents["damping"] + fieldw.currents["diffusion"]
    drv = fieldw.currents["drive"]
    env_abs = np.hypot(env[0], env[1])
    drv_abs = np.hypot(drv[0], drv[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.abs(drv[0] * env[0] + drv[1] * env[1]) / env_abs
    proj = np.where(env_abs > 0, proj, 0.0)
    return {
        "env_abs": _integrate(env_abs, grid),
        "drive_abs": _integrate(drv_abs, grid),
        "drive_proj_env": _integrate(proj, grid),
    }


def divergence(fieldw: WignerField) -> np.ndarray:
    """FD divergence of the summed currents (4th-order stencils)."""
    total = sum(fieldw.currents[name] for name in fieldw.currents)
    return _dx(total[0], fieldw.grid.hx) + _dp(total[1], fieldw.grid.hp)


def continuity_parts(fieldw: WignerField, liouv) -> tuple[np.ndarray, np.ndarray]:
    """The two routes to dW/dt: Weyl-transformed generator vs -div(sum J).

    ``fieldw`` must carry its source rho (built by :func:`wigner_grid`) and
    its currents must come from the same parameters and detuning as
    ``liouv``.
    """
    if fieldw.rho is None:
        raise ValueError("field lacks its source rho; build it with wigner_grid()")
    if not fieldw.currents:
        raise ValueError("call currents() first")
    sigma = liouv.apply(fieldw.rho)
    X, P = fieldw.grid.meshes()
    dwdt_liouv = weyl_symbol_points(sigma, X.ravel(), P.ravel()).reshape(X.shape)
    dwdt_div = -divergence(fieldw)
    return dwdt_liouv, dwdt_div


def continuity_residual(fieldw: WignerField, liouv) -> float:
    """L2 ratio ||dW/dt_liouv - dW/dt_currents|| / ||dW/dt_liouv||."""
    lhs, rhs = continuity_parts(fieldw, liouv)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))


def kerr_deform(alpha: complex, params: CircuitParams, lambda_coeff: float,
                duration: float, dim: int | None = None) -> np.ndarray:
    """Unitary Kerr shear of a coherent state.

    Evolves |alpha> under H/hbar = lambda K n - (K/2) ad ad a a for
    ``duration``; the generator is diagonal in the number basis, so the
    evolution is exact. ``lambda`` re-centers the sheared state on the mean
    phase. Photon number is conserved exactly; the center of mass moves
    inward (phase spreading lowers |<a>| without losing energy).
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    if dim is None:
        dim = fock.adequate_dim(alpha)
    psi = fock.coherent_ket(dim, alpha)
    n = np.arange(dim, dtype=float)
    phases = duration * (lambda_coeff * params.K * n
                         - 0.5 * params.K * (n * n - n))
    return fock.ket_to_dm(np.exp(-1j * phases) * psi)


def squeeze_scan(rho: np.ndarray, theta_grid: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Quadrature-uncertainty scan over rotation angles.

    u(theta) = e^{i theta} ad + e^{-i theta} a; Delta u = 1 for any coherent
    state, so the returned values are already relative to the coherent
    reference. Returns (theta_min, du_min_rel, curve).
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    if theta_grid.min() < -math.pi / 2 - 1e-9 or theta_grid.max() > math.pi / 2:
        raise ValueError("theta grid must lie within [-pi/2, pi/2)")
    span = theta_grid.max() - theta_grid.min()
    if span < math.pi - 2.0 * math.pi / max(theta_grid.size, 2):
        raise ValueError("theta grid must span [-pi/2, pi/2)")
    dim = rho.shape[0]
    a = fock.destroy(dim)
    ea = fock.expect(a, rho)
    ea2 = fock.expect(a @ a, rho)
    en = fock.expect(a.conj().T @ a, rho).real
    anom = ea2 - ea * ea
    du2 = 1.0 + 2.0 * (en - abs(ea) ** 2) \
        + 2.0 * (np.exp(-2j * theta_grid) * anom).real
    curve = np.sqrt(np.maximum(du2, 0.0))
    i = int(np.argmin(curve))
    # parabolic refinement with periodic (period pi) neighbors
    im, ip = (i - 1) % curve.size, (i + 1) % curve.size
    y0, y1, y2 = curve[im], curve[i], curve[ip]
    denom = y2 - 2.0 * y1 + y0
    h = theta_grid[1] - theta_grid[0]
    if denom > 0:
        theta_min = theta_grid[i] + 0.5 * h * (y0 - y2) / denom
        du_min = y1 - 0.125 * (y0 - y2) ** 2 / denom
    else:
        theta_min, du_min = float(theta_grid[i]), float(y1)
    return float(theta_min), float(du_min), curve
