"""Time integration of the truncated flow, the profile transform and the y_N residual.

The flow is  u_t = -i |k|^2 u - i (Pi_N[(V * |u|^2) u] - sigma_N u - C_N u).
Trajectories store frames every dt/2: the integer-step frames come from the
integrator with step dt, each midpoint frame from one extra half step started
at the preceding integer frame.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lattice import FourierState, check_dyadic, half, mode_set
from .potential import Potential, convolve_potential, hartree_array, multilinear_array
from .renorm import RenormConstants, hamiltonian, mass
from .spectral import spectral_grid

KINDS = ("physical", "profile")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Frames (n_frames, modes) at times t0 + j dt/2."""

    N: int
    t0: float
    dt: float
    frames: np.ndarray = field(repr=False)
    kind: str = "physical"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        fr = np.asarray(self.frames, dtype=np.complex128)
        if fr.ndim != 2 or fr.shape[1] != mode_set(self.N).size:
            raise ValueError("frames must be (n_frames, modes of ModeSet(N))")
        object.__setattr__(self, "frames", fr)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + 0.5 * self.dt * np.arange(self.n_frames)

    @property
    def mode_set(self):
        return mode_set(self.N)

    def state(self, j: int) -> FourierState:
        return FourierState(self.mode_set, self.frames[j])

    def final(self) -> FourierState:
        return self.state(-1)

    def with_frames(self, frames, kind: str | None = None) -> "Trajectory":
        return Trajectory(self.N, self.t0, self.dt, frames, kind or self.kind)

    def subsample(self, stride: int) -> "Trajectory":
        """Every ``stride``-th frame; the result has time step dt * stride."""
        if stride < 1:
            raise ValueError("stride must be >= 1")
        return Trajectory(self.N, self.t0, self.dt * stride, self.frames[::stride], self.kind)

    def lift(self, N: int) -> "Trajectory":
        pos = self.mode_set.embed_positions(mode_set(N))
        out = np.zeros((self.n_frames, mode_set(N).size), dtype=np.complex128)
        out[:, pos] = self.frames
        return Trajectory(N, self.t0, self.dt, out, self.kind)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        _check_grids(self, other)
        return self.with_frames(self.frames + other.frames)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        _check_grids(self, other)
        return self.with_frames(self.frames - other.frames)

    def dump(self, path) -> None:
        """Header JSON line, then little-endian float64 (re, im) per mode per frame."""
        header = {"N": self.N, "t0": self.t0, "dt": self.dt, "frames": self.n_frames,
                  "kind": self.kind}
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(np.ascontiguousarray(self.frames).view("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "Trajectory":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            data = np.frombuffer(fh.read(), dtype="<f8")
        frames = data.view(np.complex128).reshape(header["frames"], -1)
        return cls(header["N"], header["t0"], header["dt"], frames.copy(), header["kind"])


def _check_grids(a: Trajectory, b: Trajectory) -> None:
    if a.N != b.N or a.n_frames != b.n_frames or a.dt != b.dt or a.t0 != b.t0:
        raise ValueError("trajectories live on different grids")


# ---------------------------------------------------------------- vector field

class FlowField:
    """u -> -i |k|^2 u - i hartree(u) on arrays (..., n) over ModeSet(N)."""

    def __init__(self, N: int, R: RenormConstants, P: Potential):
        self.N, self.R, self.P = N, R, P
        self.k2 = mode_set(N).norm2.astype(float)

    def __call__(self, u):
        return -1j * (self.k2 * u + hartree_array(u, self.P, self.R, self.N))


def rk4_step(f, u, h):
    k1 = f(u)
    k2 = f(u + 0.5 * h * k1)
    k3 = f(u + 0.5 * h * k2)
    k4 = f(u + h * k3)
    return u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class StrangStepper:
    """Exact linear phases around the exact pointwise nonlinear phase, then Pi_N.

    Projecting after the phase substep integrates an equivalent variant of the
    projected flow rather than the flow itself; mass is not conserved exactly.
    """

    def __init__(self, N: int, R: RenormConstants, P: Potential):
        self.N, self.R, self.P = N, R, P
        ms = mode_set(N)
        self.lin_rate = ms.norm2 - R.sigma - R.c_multiplier
        self.grid = spectral_grid(N)
        self.vhat = P.vhat(self.grid.freqs)

    def __call__(self, u, h):
        g = self.grid
        u = np.exp(-0.5j * h * self.lin_rate) * u
        U = g.to_physical(u)
        W = g.ifft(g.fft(np.abs(U) ** 2) * self.vhat).real
        u = g.to_coeffs(np.exp(-1j * h * W) * U)
        return np.exp(-0.5j * h * self.lin_rate) * u


def evolve_array(u0, T: float, dt: float, R: RenormConstants, P: Potential,
                 method: str = "rk4", frames: str = "half") -> np.ndarray:
    """Integrate arrays (..., n). ``frames='half'`` returns (2 n_steps + 1, ..., n),
    ``frames='end'`` only the final state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    N = R.N
    n_steps = int(round(T / dt))
    if abs(n_steps * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T must be an integer multiple of dt")
    u = np.array(u0, dtype=np.complex128)
    if method == "rk4":
        f = FlowField(N, R, P)
        step = lambda x, h: rk4_step(f, x, h)
    elif method == "strang":
        step = StrangStepper(N, R, P)
    else:
        raise ValueError(f"unknown method {method!r}")
    if frames == "end":
        for _ in range(n_steps):
            u = step(u, dt)
        return u
    out = np.empty((2 * n_steps + 1,) + u.shape, dtype=np.complex128)
    out[0] = u
    for j in range(n_steps):
        out[2 * j + 1] = step(u, 0.5 * dt)
        u = step(u, dt)
        out[2 * j + 2] = u
    return out


def evolve(u0: FourierState, T: float, dt: float, R: RenormConstants, P: Potential,
           method: str = "rk4") -> Trajectory:
    """Physical trajectory of the truncated flow from u0 on [0, T]."""
    N = u0.mode_set.N
    if R.N != N:
        raise ValueError(f"constants for N={R.N} but state on N={N}")
    if not u0.supported_in(N):
        raise ValueError("initial state is not supported in <k> <= N")
    frames = evolve_array(u0.coeffs, T, dt, R, P, method)
    return Trajectory(N, 0.0, dt, frames, "physical")


# ---------------------------------------------------------------- profiles

def profile_phase(N: int, times, B: float) -> np.ndarray:
    """exp(i t |k|^2 + i B t) on the time grid, shape (n_times, modes)."""
    t = np.asarray(times, dtype=float)[:, None]
    return np.exp(1j * t * (mode_set(N).norm2[None, :] + B))


def to_profile(traj: Trajectory, B: float) -> Trajectory:
    """v_k(t) = e^{i t |k|^2} e^{i B t} u_k(t): the interaction picture of the flow."""
    if traj.kind != "physical":
        raise ValueError("to_profile expects a physical trajectory")
    return traj.with_frames(traj.frames * profile_phase(traj.N, traj.times, B), "profile")


def from_profile(traj: Trajectory, B: float) -> Trajectory:
    if traj.kind != "profile":
        raise ValueError("from_profile expects a profile trajectory")
    return traj.with_frames(traj.frames * np.conj(profile_phase(traj.N, traj.times, B)),
                            "physical")


def dyadic_difference(vN: Trajectory, vHalf: Trajectory) -> Trajectory:
    """y_N = v_N - v_{N/2} on the mode set of v_N."""
    if vHalf.N != half(vN.N):
        raise ValueError("second trajectory must live on scale N/2")
    if vHalf.n_frames != vN.n_frames or vHalf.dt != vN.dt or vHalf.t0 != vN.t0:
        raise ValueError("trajectories live on different time grids")
    if vHalf.N == 0:
        return vN
    return vN - vHalf.lift(vN.N)


# ---------------------------------------------------------------- conservation

@dataclass(frozen=True)
class ConservationReport:
    mass_drift: float
    hamiltonian_drift: float
    mass: np.ndarray = field(repr=False)
    energy: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"mass_drift": self.mass_drift, "hamiltonian_drift": self.hamiltonian_drift}


def _rel_drift(x) -> float:
    x = np.asarray(x, dtype=float)
    scale = abs(x[0]) if x[0] != 0 else 1.0
    return float(np.max(np.abs(x - x[0])) / scale)


def conservation_report(traj: Trajectory, R: RenormConstants, P: Potential) -> ConservationReport:
    if traj.kind != "physical":
        raise ValueError("conservation is measured on physical trajectories")
    m = mass(traj.frames)
    h = hamiltonian(traj.frames, R, P)
    return ConservationReport(_rel_drift(m), _rel_drift(h), np.asarray(m), np.asarray(h))


# ---------------------------------------------------------------- y_N integral equation

def _offdiag_term(v, P: Potential, L: int, ct: float) -> np.ndarray:
    """v_k sum_{l != k, <l> <= L} V_{k-l} (|v_l|^2 - ct <l>^-2) for frames on ModeSet(L)."""
    ms = mode_set(L)
    d = np.abs(v) ** 2 - ct / (1.0 + ms.norm2)
    conv = convolve_potential(P, L, d.astype(np.complex128))
    return v * (conv - _v0(P) * d)


def _v0(P: Potential) -> float:
    return float(P.vhat(np.zeros(3, dtype=np.int64)))


def _cumulative(f, dt: float, quadrature: str):
    """int_0^{t_j} f on the half-step grid; Simpson returns integer frames only."""
    h = 0.5 * dt
    if quadrature == "trapezoid":
        out = np.zeros_like(f)
        out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]), axis=0)
        return out
    if quadrature == "simpson":
        ints = (dt / 6.0) * (f[0:-1:2] + 4 * f[1::2] + f[2::2])
        out = np.zeros((ints.shape[0] + 1,) + f.shape[1:], dtype=f.dtype)
        out[1:] = np.cumsum(ints, axis=0)
        return out
    raise ValueError(f"unknown quadrature {quadrature!r}")


def integral_equation_rhs(yN: Trajectory, vN: Trajectory, vHalf: Trajectory, P: Potential,
                          quadrature: str = "trapezoid", levels: dict | None = None,
                          nonlinear: bool = True, counterterms: bool = True) -> np.ndarray:
    """Right-hand side of the y_N integral equation, framewise.

    The two hierarchy sums are collapsed by multilinearity: summing M over all
    triples of dyadic pieces with largest scale N gives M(v_N) - M(v_{N/2}), and
    over triples with largest scale <= N/2 gives M(v_{N/2}). Passing ``levels``
    ({L: v_L} for every dyadic L <= N) evaluates the literal triple sums instead.
    Without counterterms the <k>^-2 pieces they generate are dropped.
    """
    ct = 1.0 if counterterms else 0.0
    N = vN.N
    Nh = half(N)
    ms = mode_set(N)
    pi_mask = ms.mask(N, "pi")
    delta_mask = ms.mask(N, "delta")
    vh = vHalf.lift(N).frames if Nh else np.zeros_like(vN.frames)
    times = vN.times
    integrand = np.zeros_like(vN.frames)
    if nonlinear:
        if levels is None:
            for j, s in enumerate(times):
                top = multilinear_array(vN.frames[j], vN.frames[j], vN.frames[j], "full", P, N,
                                        s=s, phased=True)
                if Nh:
                    low = multilinear_array(vh[j], vh[j], vh[j], "full", P, N, s=s, phased=True)
                else:
                    low = np.zeros_like(top)
                integrand[j] = -1j * (pi_mask * (top - low) + delta_mask * low)
        else:
            integrand = -1j * _literal_hierarchy(levels, N, P, times, pi_mask, delta_mask)
        integrand -= 1j * _offdiag_term(vN.frames, P, N, ct)
        if Nh:
            low_off = _offdiag_term(vHalf.frames, P, Nh, ct)
            integrand[:, vHalf.mode_set.embed_positions(ms)] += 1j * low_off
    integrand += 1j * ct * _v0(P) * yN.frames / (1.0 + ms.norm2)
    F = yN.frames[0]
    return F[None, :] + _cumulative(integrand, vN.dt, quadrature)


def _literal_hierarchy(levels: dict, N: int, P: Potential, times, pi_mask, delta_mask):
    scales = [L for L in sorted(levels) if L >= 1]
    if scales != [2 ** j for j in range(len(scales))] or scales[-1] != N:
        raise ValueError("levels must hold every dyadic scale 1, 2, ..., N")
    lifted = {L: levels[L].lift(N).frames for L in scales}
    ys = {}
    for L in scales:
        ys[L] = lifted[L] - (lifted[L // 2] if L > 1 else 0)
    out = np.zeros((len(times), mode_set(N).size), dtype=np.complex128)
    for L1 in scales:
        for L2 in scales:
            for L3 in scales:
                top = max(L1, L2, L3)
                mask = pi_mask if top == N else delta_mask
                for j, s in enumerate(times):
                    out[j] += mask * multilinear_array(ys[L1][j], ys[L2][j], ys[L3][j], "full",
                                                       P, N, s=s, phased=True)
    return out


def integral_equation_residual(yN: Trajectory, vN: Trajectory, vHalf: Trajectory,
                               R: RenormConstants | None, P: Potential,
                               quadrature: str = "trapezoid", levels: dict | None = None,
                               nonlinear: bool = True) -> float:
    """Max over frames and modes of |y_N - RHS|; a zero ``R`` switches counterterms off."""
    _check_grids(yN, vN)
    if vHalf.n_frames != vN.n_frames or vHalf.dt != vN.dt:
        raise ValueError("trajectories live on different time grids")
    ct = R is None or R.sigma != 0 or bool(np.any(R.c_multiplier))
    rhs = integral_equation_rhs(yN, vN, vHalf, P, quadrature, levels, nonlinear, ct)
    lhs = yN.frames if quadrature == "trapezoid" else yN.frames[::2]
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------- profile hierarchy

@dataclass
class ProfileHierarchy:
    """Profiles v_L for every dyadic L <= N built from one Gaussian draw."""

    N: int
    profiles: dict
    physical: dict
    gauge: dict

    def y(self, L: int) -> Trajectory:
        return dyadic_difference(self.profiles[L], self.profiles[half(L)]) if L > 1 \
            else self.profiles[1]


def build_profiles(draw, N: int, T: float, dt: float, P: Potential, method: str = "rk4",
                   scales=None) -> ProfileHierarchy:
    """Evolve f_L = draw.field(L) for every dyadic L <= N and pass to profiles.

    v_L depends only on the draw truncated at L, since the data at scale L is
    read through ``draw.field(L)`` and the flow at scale L never sees higher modes.
    """
    from .renorm import gauge_constant, renorm_constants

    N = check_dyadic(N)
    scales = scales or [2 ** j for j in range(int(np.log2(N)) + 1)]
    profiles, physical, gauge = {}, {}, {}
    for L in scales:
        R = renorm_constants(L, P)
        u0 = draw.field(L)
        traj = evolve(u0, T, dt, R, P, method)
        B = gauge_constant(draw, L)
        physical[L] = traj
        gauge[L] = B
        profiles[L] = to_profile(traj, B)
    return ProfileHierarchy(N, profiles, physical, gauge)
