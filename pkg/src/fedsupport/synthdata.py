"""Heterogeneous per-client data for sparse linear regression.

Every client draws ``y = X w* + e`` with its own sample count, predictor
scale, noise scale, sub-Gaussian family and covariance.  All clients share
the same sparse parameter ``w*``.

Indices are 0-based everywhere in the Python API.  Files written by this
module (support lists) use 1-based coordinates.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Family",
    "Regime",
    "GroundTruth",
    "CovarianceSpec",
    "ClientProfile",
    "ClientDataset",
    "derive_seed",
    "make_ground_truth",
    "independent_covariance",
    "correlated_covariance",
    "make_profiles",
    "sample_client_dataset",
    "empirical_covariance",
    "save_client_csv",
    "load_client_csv",
    "write_manifest",
    "read_manifest",
]


class Family(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"
    UNIFORM = "uniform"
    GAUSSIAN_MIXTURE = "gaussian_mixture"


class Regime(str, enum.Enum):
    INDEPENDENT = "independent"
    CORRELATED = "correlated"


# two-component mixture +/-MIX_LOC with MIX_SCALE spread; MIX_LOC**2 + MIX_SCALE**2 == 1
MIX_LOC = 0.8
MIX_SCALE = 0.6


def derive_seed(master_seed: int, *keys: int) -> int:
    """64-bit seed for the stream identified by ``(master_seed, *keys)``.

    Streams for different keys are independent, so clients can be generated
    in any order or in parallel.
    """
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def unit_draws(rng: np.random.Generator, family: Family, size) -> np.ndarray:
    """Zero-mean, unit-variance i.i.d. draws from ``family``."""
    family = Family(family)
    if family is Family.GAUSSIAN:
        return rng.standard_normal(size)
    if family is Family.RADEMACHER:
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if family is Family.UNIFORM:
        a = math.sqrt(3.0)
        return rng.uniform(-a, a, size=size)
    sign = 2.0 * rng.integers(0, 2, size=size) - 1.0
    return MIX_LOC * sign + MIX_SCALE * rng.standard_normal(size)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    d: int
    s: int
    w_star: np.ndarray
    support: frozenset
    nonsupport: frozenset

    @classmethod
    def from_vector(cls, w_star) -> "GroundTruth":
        w = np.asarray(w_star, dtype=float).ravel()
        support = frozenset(int(j) for j in np.flatnonzero(w))
        if not support:
            raise ConfigurationError("w_star must have at least one non-zero entry")
        nonsupport = frozenset(range(w.size)) - support
        w.setflags(write=False)
        return cls(d=w.size, s=len(support), w_star=w, support=support, nonsupport=nonsupport)

    @property
    def support_index(self) -> np.ndarray:
        return np.array(sorted(self.support), dtype=int)

    @property
    def nonsupport_index(self) -> np.ndarray:
        return np.array(sorted(self.nonsupport), dtype=int)


def make_ground_truth(
    d: int,
    s: int,
    magnitude_range: tuple[float, float] = (0.5, 1.5),
    seed: int = 0,
    signs: str = "random",
) -> GroundTruth:
    """Draw an ``s``-sparse ``w*`` in R^d.

    Non-zero positions are uniform without replacement, magnitudes uniform
    in ``magnitude_range``.  ``signs`` is ``"random"`` (fair coin per entry)
    or ``"positive"``.
    """
    d, s = int(d), int(s)
    if d < 1 or s < 1 or s > d:
        raise ConfigurationError(f"need 1 <= s <= d, got d={d}, s={s}")
    lo, hi = map(float, magnitude_range)
    if not 0 < lo <= hi:
        raise ConfigurationError(f"need 0 < lo <= hi for magnitude_range, got {magnitude_range}")
    if signs not in ("random", "positive"):
        raise ConfigurationError(f"signs must be 'random' or 'positive', got {signs!r}")
    rng = np.random.default_rng(derive_seed(seed, 0))
    idx = rng.choice(d, size=s, replace=False)
    mags = rng.uniform(lo, hi, size=s) if hi > lo else np.full(s, lo)
    sgn = rng.choice([-1.0, 1.0], size=s) if signs == "random" else np.ones(s)
    w = np.zeros(d)
    w[idx] = sgn * mags
    return GroundTruth.from_vector(w)


@dataclass(eq=False)
class CovarianceSpec:
    """Block-structured predictor covariance of one client.

    ``diag`` holds the variances sigma_jj^2.  Off-diagonal entries take one
    of three values depending on whether the pair is support/support,
    support/non-support or non-support/non-support.
    """

    regime: Regime
    diag: np.ndarray
    rho_ss: float = 0.0
    rho_sn: float = 0.0
    rho_nn: float = 0.0

    def __post_init__(self):
        self.regime = Regime(self.regime)
        self.diag = np.asarray(self.diag, dtype=float).ravel()
        if self.diag.size == 0 or np.any(self.diag <= 0) or not np.all(np.isfinite(self.diag)):
            raise ConfigurationError("covariance diagonal must be positive and finite")
        if self.regime is Regime.INDEPENDENT and (self.rho_ss or self.rho_sn or self.rho_nn):
            raise ConfigurationError("independent regime requires zero off-diagonal covariance")

    @property
    def d(self) -> int:
        return self.diag.size

    def matrix(self, support) -> np.ndarray:
        d = self.d
        if self.regime is Regime.INDEPENDENT:
            return np.diag(self.diag)
        S = np.array(sorted(support), dtype=int)
        m = np.full((d, d), float(self.rho_nn))
        m[S, :] = self.rho_sn
        m[:, S] = self.rho_sn
        m[np.ix_(S, S)] = self.rho_ss
        np.fill_diagonal(m, self.diag)
        return m

    def columns(self, support, cols) -> np.ndarray:
        """``Sigma[:, cols]`` without materialising the full matrix."""
        cols = np.asarray(cols, dtype=int)
        d = self.d
        if self.regime is Regime.INDEPENDENT:
            out = np.zeros((d, cols.size))
            out[cols, np.arange(cols.size)] = self.diag[cols]
            return out
        in_s = np.zeros(d, dtype=bool)
        in_s[list(support)] = True
        col_s = in_s[cols]
        out = np.where(
            in_s[:, None],
            np.where(col_s[None, :], self.rho_ss, self.rho_sn),
            np.where(col_s[None, :], self.rho_sn, self.rho_nn),
        )
        out[cols, np.arange(cols.size)] = self.diag[cols]
        return out

    def sqrt_factor(self, support) -> np.ndarray:
        """``L`` with ``L @ L.T == Sigma``; raises if Sigma is not PSD."""
        if self.regime is Regime.INDEPENDENT:
            return np.diag(np.sqrt(self.diag))
        m = self.matrix(support)
        try:
            return np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            pass
        # singular but possibly PSD: fall back to the symmetric square root
        vals, vecs = np.linalg.eigh(m)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise ConfigurationError(
                f"covariance is not positive semi-definite (min eigenvalue {vals.min():.3g})"
            )
        return vecs * np.sqrt(np.clip(vals, 0.0, None))

    def one_factor(self, support) -> tuple[np.ndarray, np.ndarray] | None:
        """``(r, v)`` with ``Sigma = diag(r**2) + v v'`` when the block values allow it.

        That holds when ``rho_nn == rho_sn**2 / rho_ss`` (the default
        correlated construction); ``[diag(r) | v]`` is then a d x (d+1)
        square-root factor and sampling costs O(n d) instead of O(n d^2).
        """
        if self.regime is Regime.INDEPENDENT or self.rho_ss <= 0:
            return None
        if not math.isclose(self.rho_nn, self.rho_sn**2 / self.rho_ss, rel_tol=1e-12, abs_tol=1e-15):
            return None
        v = np.full(self.d, self.rho_sn / math.sqrt(self.rho_ss))
        v[list(support)] = math.sqrt(self.rho_ss)
        resid = self.diag - v**2
        if np.any(resid < 0):
            return None
        return np.sqrt(resid), v

    def validate(self, support) -> None:
        if self.one_factor(support) is None:
            self.sqrt_factor(support)


def independent_covariance(d: int, variance: float) -> CovarianceSpec:
    return CovarianceSpec(Regime.INDEPENDENT, np.full(int(d), float(variance)))


def correlated_covariance(
    d: int,
    variance: float,
    ss_frac: float = 0.3,
    sn_frac: float = 0.1,
    nn_frac: float | None = None,
) -> CovarianceSpec:
    """Equal-variance block covariance, off-diagonals as fractions of ``variance``.

    With ``nn_frac=None`` the non-support covariance is set to
    ``sn**2 / ss`` which makes Sigma a one-factor matrix: PSD for every d.
    """
    rho_ss = ss_frac * variance
    rho_sn = sn_frac * variance
    if nn_frac is None:
        rho_nn = rho_sn**2 / rho_ss if rho_ss > 0 else 0.0
    else:
        rho_nn = nn_frac * variance
    return CovarianceSpec(Regime.CORRELATED, np.full(int(d), float(variance)), rho_ss, rho_sn, rho_nn)


@dataclass(eq=False)
class ClientProfile:
    client_id: int
    n: int
    rho: float
    eta: float
    family: Family
    covariance: CovarianceSpec
    seed: int

    def __post_init__(self):
        self.family = Family(self.family)
        if int(self.n) < 1:
            raise ConfigurationError(f"client {self.client_id}: n must be >= 1")
        if not (self.rho > 0 and self.eta > 0):
            raise ConfigurationError(f"client {self.client_id}: rho and eta must be positive")
        self.n = int(self.n)


@dataclass(eq=False)
class ClientDataset:
    profile: ClientProfile
    X: np.ndarray
    y: np.ndarray
    e: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def make_profiles(
    gt: GroundTruth,
    g: int,
    n,
    *,
    regime: Regime | str = Regime.INDEPENDENT,
    rho_range: tuple[float, float] = (1.0, 1.0),
    eta_range: tuple[float, float] = (0.5, 0.5),
    families: Sequence[Family | str] = tuple(Family),
    ss_frac: float = 0.3,
    sn_frac: float = 0.1,
    nn_frac: float | None = None,
    jitter: float = 0.2,
    master_seed: int = 0,
) -> list[ClientProfile]:
    """Build ``g`` heterogeneous client profiles.

    ``n`` is an int (balanced) or a length-g sequence (unbalanced).  Per
    client, rho and eta are uniform in their ranges, the family cycles
    through ``families`` and, in the correlated regime, each off-diagonal
    fraction is scaled by an independent factor in ``1 +/- jitter``.
    """
    g = int(g)
    if g < 1:
        raise ConfigurationError("need at least one client")
    ns = [int(n)] * g if np.isscalar(n) else [int(v) for v in n]
    if len(ns) != g:
        raise ConfigurationError(f"expected {g} sample counts, got {len(ns)}")
    if not 0 <= jitter < 1:
        raise ConfigurationError("jitter must be in [0, 1)")
    regime = Regime(regime)
    families = [Family(f) for f in families]
    profiles = []
    for cid in range(g):
        rng = np.random.default_rng(derive_seed(master_seed, 1, cid))
        rho = float(rng.uniform(*rho_range))
        eta = float(rng.uniform(*eta_range))
        if regime is Regime.INDEPENDENT:
            cov = independent_covariance(gt.d, rho**2)
        else:
            j_ss, j_sn = 1.0 + rng.uniform(-jitter, jitter, size=2)
            cov = correlated_covariance(gt.d, rho**2, ss_frac * j_ss, sn_frac * j_sn, nn_frac)
            cov.validate(gt.support)
        profiles.append(
            ClientProfile(
                client_id=cid,
                n=ns[cid],
                rho=rho,
                eta=eta,
                family=families[cid % len(families)],
                covariance=cov,
                seed=derive_seed(master_seed, 2, cid),
            )
        )
    return profiles


def sample_client_dataset(gt: GroundTruth, profile: ClientProfile, factor=None) -> ClientDataset:
    """Draw ``profile.n`` samples of ``y = X w* + e``.

    ``factor`` optionally supplies a precomputed square-root factor of the
    client's covariance (it must match ``profile.covariance``).
    """
    cov = profile.covariance
    if cov.d != gt.d:
        raise ConfigurationError(f"covariance dimension {cov.d} != d={gt.d}")
    rng = np.random.default_rng(profile.seed)
    structured = cov.one_factor(gt.support) if factor is None else None
    if cov.regime is Regime.INDEPENDENT:
        X = unit_draws(rng, profile.family, (profile.n, gt.d)) * np.sqrt(cov.diag)
    elif structured is not None:
        r, v = structured
        z = unit_draws(rng, profile.family, (profile.n, gt.d + 1))
        X = z[:, :-1] * r + z[:, -1:] * v
    else:
        L = cov.sqrt_factor(gt.support) if factor is None else factor
        X = unit_draws(rng, profile.family, (profile.n, L.shape[1])) @ L.T
    e = profile.eta * unit_draws(rng, profile.family, profile.n)
    y = X @ gt.w_star + e
    return ClientDataset(profile=profile, X=X, y=y, e=e)


def empirical_covariance(X) -> np.ndarray:
    """Uncentered second-moment matrix ``X.T @ X / n``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ConfigurationError("need an n x d matrix with n >= 2")
    return X.T @ X / X.shape[0]


# ---------------------------------------------------------------- file I/O


def save_client_csv(ds: ClientDataset, out_dir) -> Path:
    path = Path(out_dir) / f"client_{ds.profile.client_id}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y"] + [f"x{j + 1}" for j in range(ds.d)])
        for yt, xt in zip(ds.y, ds.X):
            w.writerow([repr(float(yt))] + [repr(float(v)) for v in xt])
    return path


def load_client_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a ``y,x1,...,xd`` table; returns ``(X, y)``."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header or header[0].strip() != "y":
        raise OSError(f"{path}: expected header starting with 'y'")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header):
        raise OSError(f"{path}: header has {len(header)} columns, rows have {data.shape[1]}")
    return data[:, 1:], data[:, 0]


def _floats(v) -> str:
    return ",".join(repr(float(x)) for x in np.ravel(v))


def write_manifest(path, gt: GroundTruth, profiles: Sequence[ClientProfile], master_seed: int) -> Path:
    """Plain ``key=value`` sidecar recording everything needed to regenerate."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"d={gt.d}",
        f"s={gt.s}",
        f"master_seed={master_seed}",
        f"g={len(profiles)}",
        f"w_star={_floats(gt.w_star)}",
    ]
    for p in profiles:
        c = p.covariance
        pre = f"client.{p.client_id}"
        lines += [
            f"{pre}.n={p.n}",
            f"{pre}.rho={float(p.rho)!r}",
            f"{pre}.eta={float(p.eta)!r}",
            f"{pre}.family={p.family.value}",
            f"{pre}.seed={p.seed}",
            f"{pre}.regime={c.regime.value}",
            f"{pre}.rho_ss={float(c.rho_ss)!r}",
            f"{pre}.rho_sn={float(c.rho_sn)!r}",
            f"{pre}.rho_nn={float(c.rho_nn)!r}",
            f"{pre}.diag={_floats(c.diag)}",
        ]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(path) -> tuple[GroundTruth, list[ClientProfile], int]:
    kv = {}
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    gt = GroundTruth.from_vector([float(x) for x in kv["w_star"].split(",")])
    profiles = []
    for cid in range(int(kv["g"])):
        pre = f"client.{cid}"
        cov = CovarianceSpec(
            Regime(kv[f"{pre}.regime"]),
            np.array([float(x) for x in kv[f"{pre}.diag"].split(",")]),
            float(kv[f"{pre}.rho_ss"]),
            float(kv[f"{pre}.rho_sn"]),
            float(kv[f"{pre}.rho_nn"]),
        )
        profiles.append(
            ClientProfile(
                client_id=cid,
                n=int(kv[f"{pre}.n"]),
                rho=float(kv[f"{pre}.rho"]),
                eta=float(kv[f"{pre}.eta"]),
                family=Family(kv[f"{pre}.family"]),
                covariance=cov,
                seed=int(kv[f"{pre}.seed"]),
            )
        )
    return gt, profiles, int(kv["master_seed"])
