"""Geometric mmWave channel model for a BS -> IRS -> user link.

The base station is a ULA along the x axis; the IRS is a UPA in the x-z
plane whose element index runs vertical-major (row index = mv*Mh + mh).
All spatial frequencies are in radians per element and carry the element
spacing as a fraction of the carrier wavelength.

The cascade channel stacks per-IRS-element rows of diag(conj(h)) @ G where
G is the BS->IRS matrix and h the IRS->user vector. Its vectorization is
column-major, so the flat index is n*M + m (BS antenna slowest), which makes
the covariance of the vectorized cascade a 3-level Toeplitz matrix with
per-level dims (N, Mv, Mh).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .toeplitz import (
    ToeplitzGenerator3,
    lag_index_sets,
    toeplitz_adjoint_average,
    toeplitz_d,
)


class ToeplitzStructureError(RuntimeError):
    """The assembled covariance deviates from 3-level Toeplitz structure."""


@dataclass(frozen=True)
class ArrayGeometry:
    """Antenna counts and element spacing (as a fraction of wavelength)."""

    n_bs: int
    m_v: int
    m_h: int
    spacing_ratio: float = 0.5

    def __post_init__(self):
        for name in ("n_bs", "m_v", "m_h"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not (np.isfinite(self.spacing_ratio) and self.spacing_ratio > 0):
            raise ValueError(f"spacing_ratio must be positive, got {self.spacing_ratio!r}")

    @property
    def m_irs(self) -> int:
        return self.m_v * self.m_h

    @property
    def nm(self) -> int:
        return self.n_bs * self.m_irs

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n_bs, self.m_v, self.m_h)


def steering_vector(nu: float, d: int) -> np.ndarray:
    """Uniform linear phase ramp [1, e^{j*nu}, .., e^{j*(d-1)*nu}]."""
    if d < 1:
        raise ValueError(f"steering vector needs at least one element, got d={d}")
    return np.exp(1j * nu * np.arange(d))


def bs_frequency(aod: float, spacing_ratio: float = 0.5):
    """BS ULA frequency: 2*pi*spacing*sin(departure angle)."""
    return 2 * np.pi * spacing_ratio * np.sin(aod)


def irs_vertical_frequency(elev: float, spacing_ratio: float = 0.5):
    """IRS vertical frequency: 2*pi*spacing*cos(elevation)."""
    return 2 * np.pi * spacing_ratio * np.cos(elev)


def irs_horizontal_frequency(elev: float, azim: float, spacing_ratio: float = 0.5):
    """IRS horizontal frequency: 2*pi*spacing*sin(elevation)*cos(azimuth)."""
    return 2 * np.pi * spacing_ratio * np.sin(elev) * np.cos(azim)


def irs_response(geom: ArrayGeometry, elev: float, azim: float) -> np.ndarray:
    """UPA response, vertical level slowest: a(nu_v, Mv) kron a(nu_h, Mh)."""
    s = geom.spacing_ratio
    return np.kron(
        steering_vector(irs_vertical_frequency(elev, s), geom.m_v),
        steering_vector(irs_horizontal_frequency(elev, azim, s), geom.m_h),
    )


def _as_angle_array(x, n_expected=None, name="") -> np.ndarray:
    a = np.atleast_1d(np.asarray(x, dtype=float))
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    if n_expected is not None and a.shape[0] != n_expected:
        raise ValueError(f"{name} has length {a.shape[0]}, expected {n_expected}")
    return a


@dataclass(frozen=True)
class PathSet:
    """Propagation paths of the two hops.

    BS->IRS paths carry a departure angle at the BS, an elevation/azimuth
    pair at the IRS, and a gain variance; IRS->user paths carry an
    elevation/azimuth pair and a gain variance. Variances may be zero
    (degenerate paths) but never negative.
    """

    bs_irs_aod: np.ndarray
    bs_irs_elev: np.ndarray
    bs_irs_azim: np.ndarray
    bs_irs_var: np.ndarray
    irs_user_elev: np.ndarray
    irs_user_azim: np.ndarray
    irs_user_var: np.ndarray

    def __post_init__(self):
        aod = _as_angle_array(self.bs_irs_aod, name="bs_irs_aod")
        n_l = aod.shape[0]
        if n_l < 1:
            raise ValueError("need at least one BS->IRS path")
        elev = _as_angle_array(self.bs_irs_elev, n_l, "bs_irs_elev")
        azim = _as_angle_array(self.bs_irs_azim, n_l, "bs_irs_azim")
        var = _as_angle_array(self.bs_irs_var, n_l, "bs_irs_var")
        u_elev = _as_angle_array(self.irs_user_elev, name="irs_user_elev")
        n_p = u_elev.shape[0]
        if n_p < 1:
            raise ValueError("need at least one IRS->user path")
        u_azim = _as_angle_array(self.irs_user_azim, n_p, "irs_user_azim")
        u_var = _as_angle_array(self.irs_user_var, n_p, "irs_user_var")
        if np.any(var < 0) or np.any(u_var < 0):
            raise ValueError("path gain variances must be nonnegative")
        for name, arr in (
            ("bs_irs_aod", aod), ("bs_irs_elev", elev), ("bs_irs_azim", azim),
            ("bs_irs_var", var), ("irs_user_elev", u_elev),
            ("irs_user_azim", u_azim), ("irs_user_var", u_var),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_bs_irs(self) -> int:
        return self.bs_irs_aod.shape[0]

    @property
    def n_irs_user(self) -> int:
        return self.irs_user_elev.shape[0]

    @property
    def n_composite(self) -> int:
        return self.n_bs_irs * self.n_irs_user


@dataclass(frozen=True)
class CompositePath:
    """One (BS->IRS path, IRS->user path) pair of the cascade.

    index is the 1-based combined index rho = (p-1)*L + l + (l-1)*L*P for
    1-based hop indices (l, p); nu_v/nu_h are differences of the two hops'
    IRS frequencies, and var is the product of the hop variances.
    """

    index: int
    nu_bs: float
    nu_v: float
    nu_h: float
    var: float


def composite_lags(paths: PathSet, geom: ArrayGeometry) -> tuple[CompositePath, ...]:
    """All L*P composite paths, enumerated with the BS->IRS index fastest."""
    s = geom.spacing_ratio
    n_l, n_p = paths.n_bs_irs, paths.n_irs_user
    nu1 = bs_frequency(paths.bs_irs_aod, s)
    nu2 = irs_vertical_frequency(paths.bs_irs_elev, s)
    nu3 = irs_horizontal_frequency(paths.bs_irs_elev, paths.bs_irs_azim, s)
    nu4 = irs_vertical_frequency(paths.irs_user_elev, s)
    nu5 = irs_horizontal_frequency(paths.irs_user_elev, paths.irs_user_azim, s)
    out = []
    for p in range(1, n_p + 1):
        for l in range(1, n_l + 1):
            out.append(
                CompositePath(
                    index=(p - 1) * n_l + l + (l - 1) * n_l * n_p,
                    nu_bs=float(nu1[l - 1]),
                    nu_v=float(nu2[l - 1] - nu4[p - 1]),
                    nu_h=float(nu3[l - 1] - nu5[p - 1]),
                    var=float(paths.bs_irs_var[l - 1] * paths.irs_user_var[p - 1]),
                )
            )
    return tuple(out)


def bs_irs_channel(paths: PathSet, geom: ArrayGeometry, gains: np.ndarray) -> np.ndarray:
    """BS->IRS matrix (M x N): sum of per-path rank-one terms
    gain * irs_response * steering(bs)^H."""
    gains = np.asarray(gains)
    if gains.shape != (paths.n_bs_irs,):
        raise ValueError("gains must have one entry per BS->IRS path")
    ar = np.stack(
        [irs_response(geom, e, a) for e, a in zip(paths.bs_irs_elev, paths.bs_irs_azim)],
        axis=1,
    )
    at = np.stack(
        [steering_vector(bs_frequency(g, geom.spacing_ratio), geom.n_bs)
         for g in paths.bs_irs_aod],
        axis=1,
    )
    return (ar * gains) @ at.conj().T


def irs_user_channel(paths: PathSet, geom: ArrayGeometry, gains: np.ndarray) -> np.ndarray:
    """IRS->user vector (M,): sum of per-path gain * irs_response."""
    gains = np.asarray(gains)
    if gains.shape != (paths.n_irs_user,):
        raise ValueError("gains must have one entry per IRS->user path")
    f = np.stack(
        [irs_response(geom, e, a)
         for e, a in zip(paths.irs_user_elev, paths.irs_user_azim)],
        axis=1,
    )
    return f @ gains


def cascade_channel(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Per-IRS-element product diag(conj(h)) @ g, shape (M, N)."""
    g = np.asarray(g)
    h = np.asarray(h)
    if g.ndim != 2 or h.ndim != 1 or g.shape[0] != h.shape[0]:
        raise ValueError(f"incompatible shapes g{g.shape}, h{h.shape}")
    return np.conj(h)[:, None] * g


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of both hops and their cascade; vec is the column-major
    ravel of the cascade (flat index n*M + m)."""

    bs_irs: np.ndarray
    irs_user: np.ndarray
    cascade: np.ndarray
    vec: np.ndarray
    bs_irs_gains: np.ndarray
    irs_user_gains: np.ndarray


def sample_realization(
    paths: PathSet, geom: ArrayGeometry, rng: np.random.Generator
) -> ChannelRealization:
    """Draw circularly symmetric complex Gaussian path gains and assemble the
    channels. Draw order: BS->IRS real, BS->IRS imag, IRS->user real,
    IRS->user imag."""
    n_l, n_p = paths.n_bs_irs, paths.n_irs_user
    a_re = rng.standard_normal(n_l)
    a_im = rng.standard_normal(n_l)
    alpha = np.sqrt(paths.bs_irs_var / 2) * (a_re + 1j * a_im)
    b_re = rng.standard_normal(n_p)
    b_im = rng.standard_normal(n_p)
    beta = np.sqrt(paths.irs_user_var / 2) * (b_re + 1j * b_im)
    g = bs_irs_channel(paths, geom, alpha)
    h = irs_user_channel(paths, geom, beta)
    casc = cascade_channel(g, h)
    return ChannelRealization(
        bs_irs=g,
        irs_user=h,
        cascade=casc,
        vec=casc.ravel(order="F"),
        bs_irs_gains=alpha,
        irs_user_gains=beta,
    )


@dataclass(frozen=True)
class GroundTruthCcm:
    """Exact covariance of the vectorized cascade.

    rh is the dense (NM x NM) matrix, generator its 3-level Toeplitz
    parameterization, rank the number of composite paths with positive
    variance (the generic matrix rank), composite the underlying paths.
    """

    rh: np.ndarray
    generator: ToeplitzGenerator3
    rank: int
    composite: tuple[CompositePath, ...]


def composite_steering(cp: CompositePath, geom: ArrayGeometry) -> np.ndarray:
    """Covariance eigendirection of one composite path:
    conj(a(nu_bs, N)) kron a(nu_v, Mv) kron a(nu_h, Mh)."""
    return np.kron(
        np.conj(steering_vector(cp.nu_bs, geom.n_bs)),
        np.kron(
            steering_vector(cp.nu_v, geom.m_v),
            steering_vector(cp.nu_h, geom.m_h),
        ),
    )


def true_ccm(paths: PathSet, geom: ArrayGeometry) -> GroundTruthCcm:
    """Assemble the exact cascade covariance sum_rho var_rho * u u^H and its
    Toeplitz generator; raises ToeplitzStructureError if the per-lag spread
    exceeds 1e-10 relative to the matrix scale."""
    comps = composite_lags(paths, geom)
    u_mat = np.empty((geom.nm, len(comps)), dtype=complex)
    variances = np.empty(len(comps))
    for k, cp in enumerate(comps):
        u_mat[:, k] = composite_steering(cp, geom)
        variances[k] = cp.var
    rh = (u_mat * variances) @ u_mat.conj().T
    rh = (rh + rh.conj().T) / 2
    sets = lag_index_sets(geom.dims)
    gen = toeplitz_adjoint_average(rh, sets)
    scale = float(np.max(np.abs(rh)))
    if scale > 0:
        spread = float(np.max(np.abs(toeplitz_d(gen) - rh)))
        if spread > 1e-10 * scale:
            raise ToeplitzStructureError(
                f"per-lag spread {spread:.3e} exceeds 1e-10 of scale {scale:.3e}"
            )
    return GroundTruthCcm(
        rh=rh,
        generator=ToeplitzGenerator3(gen),
        rank=int(np.count_nonzero(variances > 0)),
        composite=comps,
    )


def _los_direction(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = dst - src
    norm = float(np.linalg.norm(d))
    if norm <= 0:
        raise ValueError("positions must be distinct")
    return d / norm


def pathloss_db(distance: float) -> float:
    """Urban mmWave distance law in dB: 61.4 + 29.2*log10(d meters)."""
    if distance <= 0:
        raise ValueError("distance must be positive")
    return 61.4 + 29.2 * np.log10(distance)


def pathloss_scenario(
    bs_pos,
    irs_pos,
    user_pos,
    rician_db: float,
    rng: np.random.Generator,
    *,
    n_bs_irs_paths: int = 3,
    n_irs_user_paths: int = 3,
    shadow_std_db: float = 8.7,
) -> PathSet:
    """Draw a PathSet from site geometry.

    Each hop gets one line-of-sight path whose angles follow from the
    positions (direction cosines toward the far end) and whose variance is
    the shadowed distance law; the remaining paths are non-line-of-sight
    with i.i.d. uniform angles on [-pi, pi) and equal variances summing to
    LOS variance divided by the Rician ratio. Draw order: BS->IRS shadowing,
    IRS->user shadowing, BS->IRS NLOS angle triples, IRS->user NLOS angle
    pairs.
    """
    if n_bs_irs_paths < 1 or n_irs_user_paths < 1:
        raise ValueError("each hop needs at least one path")
    bs = np.asarray(bs_pos, dtype=float).reshape(3)
    irs = np.asarray(irs_pos, dtype=float).reshape(3)
    user = np.asarray(user_pos, dtype=float).reshape(3)
    d_bi = float(np.linalg.norm(irs - bs))
    d_iu = float(np.linalg.norm(user - irs))
    if d_bi <= 0 or d_iu <= 0:
        raise ValueError("positions must be pairwise distinct along each hop")

    eps_bi = rng.normal(0.0, shadow_std_db) if shadow_std_db > 0 else 0.0
    eps_iu = rng.normal(0.0, shadow_std_db) if shadow_std_db > 0 else 0.0
    los_var_bi = 10.0 ** (-(pathloss_db(d_bi) + eps_bi) / 10.0)
    los_var_iu = 10.0 ** (-(pathloss_db(d_iu) + eps_iu) / 10.0)
    ratio = 10.0 ** (rician_db / 10.0)

    # LOS geometry: BS departure toward the IRS, IRS sees both far ends
    u_bi = _los_direction(bs, irs)
    v_to_bs = _los_direction(irs, bs)
    v_to_user = _los_direction(irs, user)
    aod = [float(np.arcsin(np.clip(u_bi[0], -1.0, 1.0)))]
    elev_bi = [float(np.arccos(np.clip(v_to_bs[2], -1.0, 1.0)))]
    azim_bi = [float(np.arctan2(v_to_bs[1], v_to_bs[0]))]
    elev_iu = [float(np.arccos(np.clip(v_to_user[2], -1.0, 1.0)))]
    azim_iu = [float(np.arctan2(v_to_user[1], v_to_user[0]))]
    var_bi = [los_var_bi]
    var_iu = [los_var_iu]

    n_nlos_bi = n_bs_irs_paths - 1
    n_nlos_iu = n_irs_user_paths - 1
    if n_nlos_bi:
        ang = rng.uniform(-np.pi, np.pi, size=(n_nlos_bi, 3))
        aod += ang[:, 0].tolist()
        elev_bi += ang[:, 1].tolist()
        azim_bi += ang[:, 2].tolist()
        var_bi += [los_var_bi / ratio / n_nlos_bi] * n_nlos_bi
    if n_nlos_iu:
        ang = rng.uniform(-np.pi, np.pi, size=(n_nlos_iu, 2))
        elev_iu += ang[:, 0].tolist()
        azim_iu += ang[:, 1].tolist()
        var_iu += [los_var_iu / ratio / n_nlos_iu] * n_nlos_iu

    return PathSet(
        bs_irs_aod=np.array(aod),
        bs_irs_elev=np.array(elev_bi),
        bs_irs_azim=np.array(azim_bi),
        bs_irs_var=np.array(var_bi),
        irs_user_elev=np.array(elev_iu),
        irs_user_azim=np.array(azim_iu),
        irs_user_var=np.array(var_iu),
    )
