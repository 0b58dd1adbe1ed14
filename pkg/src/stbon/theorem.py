"""Monte Carlo validation of the consistency-propagation bound.

The bound says that under two structural assumptions, the aggregate
distance S between one primary sample and its N-1 followers satisfies
E[S_{t+1} | S_t] <= Gamma * S_t with Gamma = 1 + L*M, where L bounds how
fast next-token distributions drift apart with sequence distance and M
bounds how much one token can move the distance. Iterating and applying
Markov's inequality gives

    Pr[S_T <= eps | S_t] >= 1 - Gamma^(T-t) * S_t / eps.

The simulator draws the coupled dynamics those assumptions allow: each
follower's distance d grows by a Uniform(0, M) increment with
probability min(1, L*d) - the maximal-coupling divergence event - and is
otherwise unchanged. A uniform increment is used rather than the worst
case M because the proof only upper-bounds the increment; a stochastic
increment stresses the inequality harder. All randomness per follower,
step, and trial is drawn up front, so raising L with a fixed seed reuses
the same uniforms (common random numbers) and trajectories are
pointwise monotone in L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sampling import derive_rng


@dataclass(frozen=True)
class CoupledChainConfig:
    lipschitz: float
    increment_bound: float
    horizon: int
    start: int
    followers: int
    trials: int
    seed: int = 0
    init_scale: float = 1.0  # mean (exponential) or value (constant) of initial distances
    init_distribution: str = "exponential"

    def __post_init__(self) -> None:
        if self.lipschitz < 0:
            raise ValueError("lipschitz must be >= 0")
        if self.increment_bound <= 0:
            raise ValueError("increment_bound must be positive")
        if not 0 <= self.start < self.horizon:
            raise ValueError("need 0 <= start < horizon")
        if self.followers < 1:
            raise ValueError("followers must be >= 1")
        if self.trials < 100:
            raise ValueError("trials must be >= 100")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")
        if self.init_distribution not in ("exponential", "constant"):
            raise ValueError("init_distribution must be exponential or constant")

    @property
    def steps(self) -> int:
        return self.horizon - self.start

    @property
    def gamma(self) -> float:
        return 1.0 + self.lipschitz * self.increment_bound


@dataclass(frozen=True)
class CoupledTrajectory:
    """Aggregate distance S at steps start..horizon of one trial."""

    s: np.ndarray


def simulate_coupled(config: CoupledChainConfig) -> list[CoupledTrajectory]:
    rng = derive_rng(config.seed, 4)
    shape = (config.trials, config.followers)
    if config.init_distribution == "constant":
        d = np.full(shape, config.init_scale)
    else:
        d = rng.exponential(config.init_scale, size=shape)
    uniforms = rng.random(size=(config.steps,) + shape)
    increments = rng.random(size=(config.steps,) + shape) * config.increment_bound

    s = np.empty((config.trials, config.steps + 1))
    s[:, 0] = d.sum(axis=1)
    for k in range(config.steps):
        diverge = uniforms[k] < np.minimum(1.0, config.lipschitz * d)
        d = d + np.where(diverge, increments[k], 0.0)
        s[:, k + 1] = d.sum(axis=1)
    return [CoupledTrajectory(s=s[i]) for i in range(config.trials)]


@dataclass(frozen=True)
class BucketCheck:
    step: int
    bucket: int
    count: int
    observed: float
    bound: float
    slack: float
    violated: bool


@dataclass(frozen=True)
class BoundVerdict:
    name: str
    gamma: float
    checks: tuple[BucketCheck, ...]
    violations: tuple[BucketCheck, ...]

    @property
    def passed(self) -> bool:
        return len(self.violations) == 0


def _bucketize(values: np.ndarray, buckets: int) -> list[np.ndarray]:
    """Index groups by quantile bucket; degenerate edges collapse."""
    edges = np.quantile(values, np.linspace(0.0, 1.0, buckets + 1))
    edges = np.unique(edges)
    if len(edges) <= 2:
        return [np.arange(values.size)]
    idx = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, len(edges) - 2)
    return [np.flatnonzero(idx == b) for b in range(len(edges) - 1)]


def _stack(trajectories: list[CoupledTrajectory]) -> np.ndarray:
    return np.stack([t.s for t in trajectories])


def check_drift_bound(
    trajectories: list[CoupledTrajectory],
    gamma: float,
    *,
    buckets: int = 10,
) -> BoundVerdict:
    """Check E[S_{t+1} | S_t bucket] <= gamma * mean(S_t) + 3 SE per step."""
    if len(trajectories) < 100:
        raise ValueError("need at least 100 trajectories")
    s = _stack(trajectories)
    checks: list[BucketCheck] = []
    for step in range(s.shape[1] - 1):
        now, nxt = s[:, step], s[:, step + 1]
        for b, members in enumerate(_bucketize(now, buckets)):
            if members.size == 0:
                continue
            observed = float(nxt[members].mean())
            bound = gamma * float(now[members].mean())
            se = float(nxt[members].std(ddof=1)) / np.sqrt(members.size) if members.size > 1 else 0.0
            slack = 3.0 * se
            checks.append(
                BucketCheck(
                    step=step,
                    bucket=b,
                    count=int(members.size),
                    observed=observed,
                    bound=bound,
                    slack=slack,
                    violated=observed > bound + slack,
                )
            )
    checks_t = tuple(checks)
    return BoundVerdict(
        name="drift",
        gamma=gamma,
        checks=checks_t,
        violations=tuple(ch for ch in checks_t if ch.violated),
    )


def check_markov_bound(
    trajectories: list[CoupledTrajectory],
    epsilon: float,
    gamma: float,
    *,
    buckets: int = 10,
) -> BoundVerdict:
    """Check Pr[S_T <= eps | S_t bucket] >= 1 - gamma^(T-t) mean(S_t)/eps - 3 SE.

    The bound is linear in S_t, so averaging it over a bucket is exact;
    negative bounds are clipped to zero (the guarantee is vacuous there).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if len(trajectories) < 100:
        raise ValueError("need at least 100 trajectories")
    s = _stack(trajectories)
    steps = s.shape[1] - 1
    start, end = s[:, 0], s[:, -1]
    hit = (end <= epsilon).astype(np.float64)
    checks: list[BucketCheck] = []
    for b, members in enumerate(_bucketize(start, buckets)):
        if members.size == 0:
            continue
        freq = float(hit[members].mean())
        bound = max(0.0, 1.0 - (gamma**steps) * float(start[members].mean()) / epsilon)
        se = np.sqrt(freq * (1.0 - freq) / members.size)
        slack = 3.0 * float(se)
        checks.append(
            BucketCheck(
                step=steps,
                bucket=b,
                count=int(members.size),
                observed=freq,
                bound=bound,
                slack=slack,
                violated=freq < bound - slack,
            )
        )
    checks_t = tuple(checks)
    return BoundVerdict(
        name="markov",
        gamma=gamma,
        checks=checks_t,
        violations=tuple(ch for ch in checks_t if ch.violated),
    )
