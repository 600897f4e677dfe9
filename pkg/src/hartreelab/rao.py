"""Random averaging operators on the dyadic annulus N/2 < <k> <= N.

H^{N,L}(t) is the propagator of  Psi' = -i Delta_N M^<(v_L, v_L, Psi)  and
M^N(t) of  Xi' = -i Delta_N [M^<(v_{N/2}, v_{N/2}, Xi) + M^<<(v_N, v_N, Xi)
- M^<<(v_{N/2}, v_{N/2}, Xi)],  both started from the identity on the
annulus. The generators are Hermitian, so exact propagators are unitary.
Matrices are integrated as one dense matrix ODE with rk4; for large
annuli the same equations are solved on single vectors instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ProfileHierarchy, Trajectory, _cumulative
from .lattice import FourierState, check_dyadic, half, mode_set
from .params import DEFAULT_PARAMS, ParamSet
from .potential import Potential, _form, multilinear_array, phase_rotation

MAX_RAO_N = 8


def _check_scale(N: int) -> int:
    N = check_dyadic(N)
    if N < 2:
        raise ValueError("random averaging operators need N >= 2")
    if N > MAX_RAO_N:
        raise ValueError(f"N={N} exceeds the supported range N <= {MAX_RAO_N}")
    return N


def annulus_positions(N: int) -> np.ndarray:
    return mode_set(N).annulus()


# ---------------------------------------------------------------- generators

class _Generator:
    """Sum of c * Delta_N M^window(a, a, .) over terms, with a read from stored frames."""

    def __init__(self, N: int, terms, P: Potential, params: ParamSet):
        self.N, self.P, self.params = N, P, params
        self.terms = terms            # (window, coeff, frames on ModeSet(N))
        self.ann = annulus_positions(N)

    def matrix(self, j: int, s: float) -> np.ndarray:
        r = phase_rotation(self.N, s)
        ann = self.ann
        A = np.zeros((ann.size, ann.size), dtype=np.complex128)
        for window, c, frames in self.terms:
            form = _form(self.P, window, self.N, self.N, self.params)
            A += c * form.operator_matrix(frames[j] * r, ann, ann)
        return np.conj(r[ann])[:, None] * A * r[ann][None, :]

    def apply(self, j: int, s: float, x: np.ndarray) -> np.ndarray:
        """Generator applied to x on ModeSet(N)."""
        out = np.zeros_like(x)
        for window, c, frames in self.terms:
            a = frames[j]
            out += c * multilinear_array(a, a, x, window, self.P, self.N, s=s, phased=True,
                                         output="delta", params=self.params)
        return out


def _stride(v: Trajectory, dt: float | None) -> int:
    """Frames per half step; frames sit at spacing v.dt / 2."""
    if dt is None:
        return 1
    m = int(round(dt / v.dt))
    if m < 1 or abs(m * v.dt - dt) > 1e-12 * max(1.0, dt):
        raise ValueError("dt must be a positive integer multiple of the trajectory step")
    return m


def _lifted(v: Trajectory, N: int) -> np.ndarray:
    if v.kind != "profile":
        raise ValueError("random averaging operators are driven by profile trajectories")
    return v.lift(N).frames if v.N != N else v.frames


def _check_grid(*trajs: Trajectory) -> None:
    a = trajs[0]
    for b in trajs[1:]:
        if b.n_frames != a.n_frames or b.dt != a.dt or b.t0 != a.t0:
            raise ValueError("trajectories live on different time grids")


def _h_generator(N, L, vL, P, params):
    N = _check_scale(N)
    L = check_dyadic(L)
    if not 1 <= L <= half(N):
        raise ValueError("need 1 <= L <= N/2")
    if vL.N != L:
        raise ValueError(f"profile lives on scale {vL.N}, expected L={L}")
    return _Generator(N, [("low", 1.0, _lifted(vL, N))], P, params)


def _m_generator(N, vHalf, vN, P, params):
    N = _check_scale(N)
    if vN.N != N or vHalf.N != half(N):
        raise ValueError("build_M needs profiles on scales N and N/2")
    _check_grid(vHalf, vN)
    low = _lifted(vHalf, N)
    top = _lifted(vN, N)
    return _Generator(N, [("low", 1.0, low), ("tiny", 1.0, top), ("tiny", -1.0, low)], P, params)


# ---------------------------------------------------------------- matrices

@dataclass(frozen=True, eq=False)
class RAOMatrices:
    """Propagator samples mats[j] at times[j], indexed by annulus modes."""

    N: int
    label: object                 # dyadic L, "xi", or a difference label
    times: np.ndarray
    mats: np.ndarray = field(repr=False)
    defects: np.ndarray | None = field(default=None, repr=False)

    @property
    def annulus(self) -> np.ndarray:
        return annulus_positions(self.N)

    @property
    def size(self) -> int:
        return self.mats.shape[-1]

    def dump(self, path) -> None:
        header = {"N": self.N, "L_or_xi": str(self.label), "times": [float(t) for t in self.times]}
        with open(path, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode())
            fh.write(np.ascontiguousarray(self.mats, dtype="<c16").tobytes())

    @classmethod
    def load(cls, path) -> "RAOMatrices":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline())
            data = np.frombuffer(fh.read(), dtype="<c16")
        N = header["N"]
        n = annulus_positions(N).size
        label = header["L_or_xi"]
        label = int(label) if label.isdigit() else label
        return cls(N, label, np.array(header["times"]), data.reshape(-1, n, n).copy())


def _rk4_linear(f0, f1, f2, x, h):
    k1 = f0(x)
    k2 = f1(x + 0.5 * h * k1)
    k3 = f1(x + 0.5 * h * k2)
    k4 = f2(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _frame_defect(X: np.ndarray) -> float:
    return float(np.linalg.norm(X @ X.conj().T - np.eye(X.shape[0])))


def _integrate_matrix(gen: _Generator, m: int, dt_frame: float, n_frames: int,
                      store_every: int, label) -> RAOMatrices:
    n_steps = (n_frames - 1) // (2 * m)
    h = m * dt_frame
    ann = gen.ann
    X = np.eye(ann.size, dtype=np.complex128)
    mats, times, defects = [X.copy()], [0.0], [0.0]
    A_next = gen.matrix(0, 0.0)
    for step in range(n_steps):
        j = 2 * m * step
        t = step * h
        A0 = A_next
        A1 = gen.matrix(j + m, t + 0.5 * h)
        A_next = gen.matrix(j + 2 * m, t + h)
        X = _rk4_linear(lambda Y: -1j * (A0 @ Y), lambda Y: -1j * (A1 @ Y),
                        lambda Y: -1j * (A_next @ Y), X, h)
        defects.append(_frame_defect(X))
        if (step + 1) % store_every == 0:
            mats.append(X.copy())
            times.append((step + 1) * h)
    return RAOMatrices(gen.N, label, np.array(times), np.array(mats), np.array(defects))


def build_H(N: int, L: int, vL: Trajectory, dt: float | None = None, P: Potential | None = None,
            store_every: int = 1, params: ParamSet = DEFAULT_PARAMS) -> RAOMatrices:
    """H^{N,L}(t) on the grid of rk4 steps dt (a multiple of the profile step).

    The stages read the stored half-step frames of v_L exactly. The unitarity
    defect is recorded at every step even when only every ``store_every``-th
    matrix is kept.
    """
    if P is None:
        raise ValueError("a potential is required")
    gen = _h_generator(N, L, vL, P, params)
    return _integrate_matrix(gen, _stride(vL, dt), vL.dt, vL.n_frames, store_every, L)


def build_M(N: int, vHalf: Trajectory, vN: Trajectory, dt: float | None = None,
            P: Potential | None = None, store_every: int = 1,
            params: ParamSet = DEFAULT_PARAMS) -> RAOMatrices:
    """M^N(t), the propagator of the linear equation with the M^<< corrections."""
    if P is None:
        raise ValueError("a potential is required")
    gen = _m_generator(N, vHalf, vN, P, params)
    return _integrate_matrix(gen, _stride(vN, dt), vN.dt, vN.n_frames, store_every, "xi")


def identity_matrices(N: int, times) -> RAOMatrices:
    n = annulus_positions(N).size
    times = np.asarray(times, dtype=float)
    return RAOMatrices(N, 0, times, np.broadcast_to(np.eye(n, dtype=np.complex128),
                                                     (times.size, n, n)).copy())


def dyadic_matrix_difference(H_L: RAOMatrices, H_halfL: RAOMatrices | None) -> RAOMatrices:
    """H_L - H_halfL per time; ``None`` stands for the identity (the L = 1 case)."""
    if H_halfL is None:
        H_halfL = identity_matrices(H_L.N, H_L.times)
    if H_L.N != H_halfL.N or H_L.mats.shape != H_halfL.mats.shape \
            or not np.array_equal(H_L.times, H_halfL.times):
        raise ValueError("matrices live on different scales or time grids")
    return RAOMatrices(H_L.N, f"{H_L.label}-{H_halfL.label}", H_L.times, H_L.mats - H_halfL.mats)


def _traj_step(times: np.ndarray) -> float:
    if times.size < 2:
        return 0.0
    steps = np.diff(times)
    if np.ptp(steps) > 1e-9 * steps[0]:
        raise ValueError("stored times are not uniform")
    return float(steps[0])


def apply_matrices(mats: RAOMatrices, data: FourierState) -> Trajectory:
    """t -> mats(t) data on ModeSet(N); frames at the stored times."""
    ms = mode_set(mats.N)
    if data.mode_set.N != mats.N:
        data = data.lift(mats.N) if data.mode_set.N < mats.N else data
    ann = mats.annulus
    outside = np.ones(ms.size, dtype=bool)
    outside[ann] = False
    if np.any(data.coeffs[outside] != 0):
        raise ValueError("data must be supported on the annulus N/2 < <k> <= N")
    frames = np.zeros((mats.times.size, ms.size), dtype=np.complex128)
    frames[:, ann] = mats.mats @ data.coeffs[ann]
    return Trajectory(mats.N, float(mats.times[0]), 2.0 * _traj_step(mats.times), frames,
                      "profile")


def unitarity_defect(mats: RAOMatrices) -> float:
    """max_t ||X(t) X(t)^* - I||_F over every integrator step when recorded."""
    if mats.defects is not None:
        return float(np.max(mats.defects))
    return max(_frame_defect(X) for X in mats.mats)


# ---------------------------------------------------------------- vectors

def _integrate_vector(gen: _Generator, m: int, dt_frame: float, n_frames: int, x0: np.ndarray,
                      label=None) -> Trajectory:
    n_steps = (n_frames - 1) // (2 * m)
    h = m * dt_frame
    x = np.array(x0, dtype=np.complex128)
    out = np.empty((n_steps + 1, x.size), dtype=np.complex128)
    out[0] = x
    for step in range(n_steps):
        j = 2 * m * step
        t = step * h
        x = _rk4_linear(lambda y: -1j * gen.apply(j, t, y),
                        lambda y: -1j * gen.apply(j + m, t + 0.5 * h, y),
                        lambda y: -1j * gen.apply(j + 2 * m, t + h, y), x, h)
        out[step + 1] = x
    return Trajectory(gen.N, 0.0, 2.0 * h, out, "profile")


def _annulus_data(N: int, data: FourierState) -> np.ndarray:
    ms = mode_set(N)
    x = data.lift(N).coeffs if data.mode_set.N < N else data.coeffs
    if np.any(x[~ms.mask(N, "delta")] != 0):
        raise ValueError("data must be supported on the annulus N/2 < <k> <= N")
    return x


def propagate_H(N: int, L: int, vL: Trajectory, data: FourierState, dt: float | None = None,
                P: Potential | None = None, params: ParamSet = DEFAULT_PARAMS) -> Trajectory:
    """H^{N,L}(t) data without forming the matrix."""
    gen = _h_generator(N, L, vL, P, params)
    return _integrate_vector(gen, _stride(vL, dt), vL.dt, vL.n_frames, _annulus_data(N, data))


def propagate_M(N: int, vHalf: Trajectory, vN: Trajectory, data: FourierState,
                dt: float | None = None, P: Potential | None = None,
                params: ParamSet = DEFAULT_PARAMS) -> Trajectory:
    """M^N(t) data without forming the matrix."""
    gen = _m_generator(N, vHalf, vN, P, params)
    return _integrate_vector(gen, _stride(vN, dt), vN.dt, vN.n_frames, _annulus_data(N, data))


def literal_xi(N: int, vHalf: Trajectory, vN: Trajectory, data: FourierState,
               dt: float | None = None, P: Potential | None = None,
               params: ParamSet = DEFAULT_PARAMS) -> Trajectory:
    """Mixed reading of the xi equation, for comparison with the linear one.

    The first two terms act on xi^N = M^N F_N (solved alongside), only the
    subtracted M^<< term acts on the unknown. The map data -> result is then
    affine rather than a propagator.
    """
    full = _m_generator(N, vHalf, vN, P, params)
    top = _Generator(N, [("low", 1.0, _lifted(vHalf, N)), ("tiny", 1.0, _lifted(vN, N))],
                     P, params)
    sub = _Generator(N, [("tiny", 1.0, _lifted(vHalf, N))], P, params)
    m = _stride(vN, dt)
    x0 = _annulus_data(N, data)
    n = x0.size

    class _Pair:
        def apply(self, j, s, y):
            xi, lit = y[:n], y[n:]
            return np.concatenate([full.apply(j, s, xi),
                                   top.apply(j, s, xi) - sub.apply(j, s, lit)])

    pair = _Pair()
    pair.N = N
    traj = _integrate_vector(pair, m, vN.dt, vN.n_frames, np.concatenate([x0, x0]))
    return Trajectory(N, 0.0, traj.dt, traj.frames[:, n:], "profile")


# ---------------------------------------------------------------- ansatz pieces

def remainder(yN: Trajectory, xi: Trajectory) -> Trajectory:
    """z_N = y_N - xi^N on a common grid."""
    _check_grid(yN, xi)
    if yN.N != xi.N:
        raise ValueError("y_N and xi^N live on different scales")
    return yN - xi


def paraproduct_apply(yL1: Trajectory, yL2: Trajectory, z: Trajectory, N: int,
                      P: Potential, params: ParamSet = DEFAULT_PARAMS) -> Trajectory:
    """(L z)(t) = -i int_0^t Delta_N M^<(y_L1, y_L2, z) by trapezoid quadrature."""
    _check_grid(yL1, yL2, z)
    N = check_dyadic(N)
    if z.N != N:
        raise ValueError("z must live on ModeSet(N)")
    a, b = _lifted(yL1, N), _lifted(yL2, N)
    f = np.empty_like(z.frames)
    for j, s in enumerate(z.times):
        f[j] = -1j * multilinear_array(a[j], b[j], z.frames[j], "low", P, N, s=s, phased=True,
                                       output="delta", params=params)
    return z.with_frames(_cumulative(f, z.dt, "trapezoid"))


@dataclass
class AnsatzBundle:
    N: int
    F: FourierState
    psi: Trajectory
    xi: Trajectory
    rho: Trajectory
    z: Trajectory
    y: Trajectory
    zeta: dict
    psi_levels: dict
    matrices: dict = field(default_factory=dict, repr=False)

    def identity_defects(self) -> dict:
        """Framewise max deviations of the two defining identities."""
        return {
            "xi_psi_rho": float(np.max(np.abs(self.xi.frames - (self.psi.frames + self.rho.frames)))),
            "z_y_xi": float(np.max(np.abs(self.z.frames - (self.y.frames - self.xi.frames)))),
        }


def build_ansatz(hier: ProfileHierarchy, N: int, P: Potential, dt: float | None = None,
                 dense: bool | None = None, params: ParamSet = DEFAULT_PARAMS) -> AnsatzBundle:
    """psi^{N,L}, zeta^{N,L}, xi^N, rho^N and z_N from a profile hierarchy.

    Dense matrices are formed when ``dense`` (default: N <= 4); otherwise the
    propagators are applied to F_N directly. Outputs live on the rk4 step grid.
    """
    N = _check_scale(N)
    vN, vHalf = hier.profiles[N], hier.profiles[half(N)]
    m = _stride(vN, dt)
    ms = mode_set(N)
    F = FourierState(ms, np.where(ms.mask(N, "delta"), hier.y(N).frames[0], 0))
    y = hier.y(N).subsample(2 * m)
    dense = N <= 4 if dense is None else dense
    levels = [2 ** j for j in range(int(np.log2(N)))]
    matrices, psi_levels = {}, {}
    if dense:
        for L in levels:
            matrices[L] = build_H(N, L, hier.profiles[L], dt, P, params=params)
            psi_levels[L] = apply_matrices(matrices[L], F)
        matrices["xi"] = build_M(N, vHalf, vN, dt, P, params=params)
        xi = apply_matrices(matrices["xi"], F)
    else:
        for L in levels:
            psi_levels[L] = propagate_H(N, L, hier.profiles[L], F, dt, P, params)
        xi = propagate_M(N, vHalf, vN, F, dt, P, params)
    psi = psi_levels[half(N)]
    const = psi.with_frames(np.broadcast_to(F.coeffs, psi.frames.shape).copy())
    zeta = {L: psi_levels[L] - (psi_levels[L // 2] if L > 1 else const) for L in levels}
    rho = xi - psi
    return AnsatzBundle(N, F, psi, xi, rho, remainder(y, xi), y, zeta, psi_levels, matrices)
