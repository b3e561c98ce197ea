"""Deterministic training-point generation and noise injection.

Every sampler is a pure function of its arguments plus a seed: the same call
always returns bitwise-identical points.  Each sampler owns a private
`numpy.random.default_rng(seed)`; nothing touches global RNG state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cfpinn.conformable import DomainSpec, analytic_solution

ROLE_INITIAL = "initial"
ROLE_BOUNDARY = "boundary"
ROLE_COLLOCATION = "collocation"
ROLE_INTERIOR_DATA = "interior-data"

_ROLES = (ROLE_INITIAL, ROLE_BOUNDARY, ROLE_COLLOCATION, ROLE_INTERIOR_DATA)


class PointSetError(ValueError):
    pass


@dataclass(frozen=True)
class PointSet:
    """A labelled batch of (t, x) points.

    Collocation sets carry no targets; every other role must supply one
    target per point.  Arrays are stored read-only.
    """

    role: str
    coords: np.ndarray
    targets: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.role not in _ROLES:
            raise PointSetError(f"unknown role {self.role!r}")
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise PointSetError("coords must be an (n, 2) array of (t, x) pairs")
        if not np.all(np.isfinite(coords)):
            raise PointSetError("coords contain non-finite values")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

        targets = self.targets
        if self.role == ROLE_COLLOCATION:
            if targets is not None:
                raise PointSetError("collocation points carry no targets")
        else:
            if targets is None:
                raise PointSetError(f"role {self.role!r} requires targets")
            targets = np.array(targets, dtype=np.float64)
            if targets.shape != (coords.shape[0],):
                raise PointSetError("need exactly one target per point")
            if not np.all(np.isfinite(targets)):
                raise PointSetError("targets contain non-finite values")
            targets.flags.writeable = False
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.coords.shape[0]


def sample_collocation(domain: DomainSpec, n_f: int, seed: int) -> PointSet:
    """Latin-hypercube collocation points over the domain rectangle.

    Each axis is split into n_f equal strata holding exactly one point;
    the strata of the two axes are paired through seeded permutations and
    each point sits at a seeded uniform position inside its stratum.
    """
    if n_f < 1:
        raise PointSetError("need at least one collocation point")
    rng = np.random.default_rng(seed)
    perm_t = rng.permutation(n_f)
    perm_x = rng.permutation(n_f)
    jit_t = rng.uniform(size=n_f)
    jit_x = rng.uniform(size=n_f)
    t = domain.t_lo + (perm_t + jit_t) * ((domain.t_hi - domain.t_lo) / n_f)
    x = domain.x_lo + (perm_x + jit_x) * ((domain.x_hi - domain.x_lo) / n_f)
    return PointSet(ROLE_COLLOCATION, np.column_stack([t, x]))


def sample_ic_bc(domain: DomainSpec, n_ic: int, n_bc: int, seed: int):
    """Initial-slice and boundary point sets with exact-solution targets.

    Initial points sit on t = t_lo with uniform-random x; boundary points
    have uniform-random t and alternate between the faces x = x_lo and
    x = x_hi, so the per-face counts differ by at most one.
    """
    if n_ic < 1 or n_bc < 1:
        raise PointSetError("need at least one point per set")
    rng = np.random.default_rng(seed)

    x_ic = rng.uniform(domain.x_lo, domain.x_hi, size=n_ic)
    t_ic = np.full(n_ic, domain.t_lo)
    ic_coords = np.column_stack([t_ic, x_ic])
    ic_targets = analytic_solution(domain.alpha, domain.lam, t_ic, x_ic)

    t_bc = rng.uniform(domain.t_lo, domain.t_hi, size=n_bc)
    x_bc = np.where(np.arange(n_bc) % 2 == 0, domain.x_lo, domain.x_hi)
    bc_coords = np.column_stack([t_bc, x_bc])
    bc_targets = analytic_solution(domain.alpha, domain.lam, t_bc, x_bc)

    return (PointSet(ROLE_INITIAL, ic_coords, ic_targets),
            PointSet(ROLE_BOUNDARY, bc_coords, bc_targets))


def sample_interior_data(domain: DomainSpec, n_data: int, seed: int) -> PointSet:
    """Uniform-random labelled points across the whole rectangle."""
    if n_data < 1:
        raise PointSetError("need at least one data point")
    rng = np.random.default_rng(seed)
    t = rng.uniform(domain.t_lo, domain.t_hi, size=n_data)
    x = rng.uniform(domain.x_lo, domain.x_hi, size=n_data)
    targets = analytic_solution(domain.alpha, domain.lam, t, x)
    return PointSet(ROLE_INTERIOR_DATA, np.column_stack([t, x]), targets)


def add_noise(points: PointSet, level: float, seed: int) -> PointSet:
    """Targets plus level * sigma_u * standard-normal noise; coords untouched.

    sigma_u is the empirical (population) standard deviation of the clean
    targets, so `level` is a relative noise amplitude.
    """
    if points.targets is None:
        raise PointSetError("noise needs a point set with targets")
    if level < 0:
        raise PointSetError("noise level must be >= 0")
    if level == 0:
        return PointSet(points.role, points.coords, points.targets)
    rng = np.random.default_rng(seed)
    sigma = float(np.std(points.targets))
    noisy = points.targets + level * sigma * rng.standard_normal(len(points))
    return PointSet(points.role, points.coords, noisy)


def write_points(points: PointSet, path) -> None:
    """Export as delimited text: role,t,x,target (target blank if absent)."""
    lines = ["role,t,x,target"]
    for i in range(len(points)):
        t, x = points.coords[i]
        tgt = "" if points.targets is None else format(points.targets[i], ".17g")
        lines.append(f"{points.role},{format(t, '.17g')},{format(x, '.17g')},{tgt}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
