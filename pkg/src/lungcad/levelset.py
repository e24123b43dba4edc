"""Level-set evolution seeded by fuzzy-clustering memberships.

The surface phi uses an inside-positive convention: the lesion is where
phi >= 0 and the balloon force maps membership 1 to outward pressure +1.
Each time step is a Jacobi-style update of the whole field from the previous
step's snapshot, so evolution is deterministic bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EvolutionDivergedError, FcmDataError, NoLesionRegionError
from .fcm import FcmConfig, FcmResult, MembershipMap, fcm_fit, select_lesion_cluster, spatial_regularize
from .imaging import ImageGrid, ScalarField, SegMask, _second_diff, gaussian_smooth, gradient_central

_NORM_EPS = 1e-10
_STABLE_STEP = 0.25


@dataclass(frozen=True, eq=False)
class LevelSetField:
    """The evolving surface phi over an image grid."""

    width: int
    height: int
    phi: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.phi, dtype=np.float64)
        if arr.shape != (self.width, self.height):
            arr = arr.reshape(self.width, self.height)
        if not np.isfinite(arr).all():
            raise ValueError("phi must be finite everywhere")
        object.__setattr__(self, "phi", arr)


@dataclass(frozen=True)
class LevelSetParams:
    """Evolution controls.

    contour_weight scales the length-shortening term, dirac_width is the
    half-width of the regularized delta, and reg_weight keeps phi close to a
    distance function under explicit stepping. time_step and
    time_step * reg_weight are both bounded by 0.25 for stability.
    """

    contour_weight: float = 0.5
    dirac_eps: float = 1.5
    time_step: float = 0.1
    iterations: int = 250
    reg_weight: float = 2.0
    balloon_weight: float = 1.0
    init_amplitude: float = 2.0

    def __post_init__(self):
        if self.contour_weight < 0:
            raise ValueError("contour_weight must be non-negative")
        if not self.dirac_eps > 0:
            raise ValueError("dirac_eps must be positive")
        if not 0 < self.time_step <= _STABLE_STEP:
            raise ValueError(f"time_step must lie in (0, {_STABLE_STEP}]")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be non-negative")
        if self.time_step * self.reg_weight > _STABLE_STEP + 1e-12:
            raise ValueError(
                "time_step * reg_weight exceeds the explicit stability bound"
            )
        if not self.init_amplitude > 0:
            raise ValueError("init_amplitude must be positive")


@dataclass(frozen=True, eq=False)
class EdgeIndicator:
    """Edge-stopping field g in (0, 1]; 1 on flat regions."""

    g: ScalarField

    def __post_init__(self):
        v = self.g.values
        if v.min() <= 0 or v.max() > 1:
            raise ValueError("edge indicator must lie in (0, 1]")


def _values(field) -> np.ndarray:
    if isinstance(field, EdgeIndicator):
        return field.g.values
    return field.values if hasattr(field, "values") else np.asarray(field)


def curvature(phi: LevelSetField) -> ScalarField:
    """Curvature of the level lines of phi.

    (pxx*py^2 - 2*pxy*px*py + pyy*px^2) / (px^2 + py^2 + 1e-10)^(3/2),
    all derivatives central with unit spacing.
    """
    if phi.width < 3 or phi.height < 3:
        raise ValueError("curvature requires at least a 3x3 grid")
    v = phi.phi
    px = np.gradient(v, axis=0)
    py = np.gradient(v, axis=1)
    pxx = _second_diff(v, axis=0)
    pyy = _second_diff(v, axis=1)
    pxy = np.gradient(px, axis=1)
    num = pxx * py**2 - 2.0 * pxy * px * py + pyy * px**2
    den = (px**2 + py**2 + _NORM_EPS) ** 1.5
    return ScalarField(phi.width, phi.height, num / den)


def _dirac_values(z: np.ndarray, eps: float) -> np.ndarray:
    out = np.zeros_like(z)
    band = np.abs(z) <= eps
    out[band] = (1.0 + np.cos(np.pi * z[band] / eps)) / (2.0 * eps)
    return out


def dirac(phi: LevelSetField, eps: float) -> ScalarField:
    """Cosine-window delta: (1/(2e))(1 + cos(pi z / e)) on |z| <= e, else 0."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return ScalarField(phi.width, phi.height, _dirac_values(phi.phi, eps))


def edge_indicator(image: ImageGrid, sigma: float = 1.5) -> EdgeIndicator:
    """g = 1 / (1 + |grad of the sigma-smoothed image|^2)."""
    smoothed = gaussian_smooth(image, sigma)
    gx, gy = gradient_central(smoothed)
    g = 1.0 / (1.0 + gx.values**2 + gy.values**2)
    return EdgeIndicator(ScalarField(image.width, image.height, g))


def balloon_force(mm: MembershipMap, k: int, width: int, height: int) -> ScalarField:
    """Membership-derived pressure 2*mu_k - 1 in [-1, 1]."""
    if not 0 <= k < mm.clusters:
        raise ValueError(f"cluster index {k} out of range")
    if mm.n_points != width * height:
        raise ValueError(f"{mm.n_points} points do not fill a {width}x{height} grid")
    g = 2.0 * mm.mu[:, k].reshape(width, height) - 1.0
    return ScalarField(width, height, g)


def init_from_membership(mm: MembershipMap, k: int, width: int, height: int,
                         amplitude: float = 2.0) -> LevelSetField:
    """Binary surface +amplitude where mu_k >= 0.5, -amplitude elsewhere."""
    if not 0 <= k < mm.clusters:
        raise ValueError(f"cluster index {k} out of range")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    inside = mm.mu[:, k].reshape(width, height) >= 0.5
    return LevelSetField(width, height, amplitude * (2.0 * inside - 1.0))


def evolve(phi0: LevelSetField, g, G, params: LevelSetParams) -> LevelSetField:
    """Run `iterations` explicit Euler steps of

        phi += tau * ( contour_weight * delta(phi) * div(g * n)
                       + balloon_weight * g * G * delta(phi)
                       + reg_weight * (lap(phi) - div(n)) )

    with n the stabilized unit gradient of phi. Zero iterations returns phi
    unchanged.  Non-finite values abort with the failing iteration index.
    """
    gv = _values(g)
    Gv = _values(G)
    phi = phi0.phi
    if gv.shape != phi.shape or Gv.shape != phi.shape:
        raise ValueError("g and G must match the surface dimensions")
    tau = params.time_step
    lam = params.contour_weight
    eps = params.dirac_eps
    for it in range(params.iterations):
        px = np.gradient(phi, axis=0)
        py = np.gradient(phi, axis=1)
        norm = np.sqrt(px**2 + py**2) + _NORM_EPS
        nx, ny = px / norm, py / norm
        delta = _dirac_values(phi, eps)
        update = lam * delta * (np.gradient(gv * nx, axis=0) + np.gradient(gv * ny, axis=1))
        update += params.balloon_weight * gv * Gv * delta
        if params.reg_weight > 0:
            lap = _second_diff(phi, 0) + _second_diff(phi, 1)
            div_n = np.gradient(nx, axis=0) + np.gradient(ny, axis=1)
            update += params.reg_weight * (lap - div_n)
        phi = phi + tau * update
        if not np.isfinite(phi).all():
            raise EvolutionDivergedError(it)
    return LevelSetField(phi0.width, phi0.height, phi)


def zero_level_mask(phi: LevelSetField) -> SegMask:
    """Lesion mask: true where phi >= 0."""
    return SegMask(phi.width, phi.height, phi.phi >= 0.0)


def derive_params(region_area: int, overrides: dict | None = None) -> LevelSetParams:
    """Evolution parameters derived from the seed region size.

    iterations = 5 * ceil(sqrt(area)), capped at 1000; the remaining values
    are fixed defaults tied to the stability bound. Any entry in `overrides`
    replaces the derived value.
    """
    tau = 0.1
    derived = {
        "iterations": min(1000, 5 * math.ceil(math.sqrt(max(region_area, 1)))),
        "dirac_eps": 1.5,
        "time_step": tau,
        "contour_weight": 5.0 * tau,
        "reg_weight": 0.2 / tau,
        "balloon_weight": 1.0,
        "init_amplitude": 2.0,
    }
    if overrides:
        unknown = set(overrides) - set(derived)
        if unknown:
            raise ValueError(f"unknown level-set parameters: {sorted(unknown)}")
        derived.update(overrides)
    return LevelSetParams(**derived)


def fuzzy_level_set_segment(
    image: ImageGrid,
    fcm_cfg: FcmConfig,
    auto: bool = True,
    overrides: dict | None = None,
    *,
    window: int = 3,
    edge_sigma: float = 1.5,
    lesion_cluster: int | None = None,
) -> tuple[SegMask, FcmResult, LevelSetField]:
    """Cluster, pick the lesion cluster, seed the surface, and evolve it.

    Expects a normalized image. The returned FcmResult carries the spatially
    regularized memberships that seeded the surface. With auto=False the
    LevelSetParams defaults are used instead of size-derived values;
    `overrides` entries replace either source.
    """
    v = image.values
    if v.min() < 0 or v.max() > 1:
        raise ValueError("image must be normalized to [0, 1]")
    try:
        result = fcm_fit(v.ravel(), fcm_cfg)
    except FcmDataError as e:
        raise NoLesionRegionError(f"no lesion region after clustering: {e}") from e
    mm = spatial_regularize(result.memberships, image.width, image.height, window)
    result = replace(result, memberships=mm)
    k = select_lesion_cluster(result, override=lesion_cluster)
    region = mm.mu[:, k] >= 0.5
    area = int(region.sum())
    if area == 0:
        raise NoLesionRegionError("no lesion region after clustering")
    if auto:
        params = derive_params(area, overrides)
    else:
        params = LevelSetParams(**(overrides or {}))
    phi0 = init_from_membership(mm, k, image.width, image.height, params.init_amplitude)
    g = edge_indicator(image, edge_sigma)
    G = balloon_force(mm, k, image.width, image.height)
    phi = evolve(phi0, g, G, params)
    return zero_level_mask(phi), result, phi
