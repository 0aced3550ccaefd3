"""Agent-based opinion softening through small mixed-stance circles.

Each step draws a batch of circles: a uniformly chosen seed page plus up to
``circle_size - 1`` of its undirected neighbors. In every mixed circle, each
member whose stance is eligible becomes neutral with probability
``conversion_probability``. Conversions are applied together at the end of
the step, and neutral is absorbing.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from triarch.errors import StepNotRecorded, ValidationError
from triarch.graph import STANCE_ORDER, Snapshot, Stance

ANTI, PRO, NEUTRAL = (st.code for st in STANCE_ORDER)


class Scenario(enum.Enum):
    AVERAGE = "average"  # anti and pro pages may convert
    BETTER = "better"  # only anti pages may convert

    @property
    def eligible(self) -> tuple[int, ...]:
        return (ANTI, PRO) if self is Scenario.AVERAGE else (ANTI,)


class MixedRule(enum.Enum):
    ANY_TWO = "any_two"  # at least two distinct stances, neutral included
    ANTI_PRO = "anti_pro"  # both an anti and a pro member


@dataclass(frozen=True)
class SofteningConfig:
    circle_size: int = 6
    circles_per_step: int | None = None  # None: ceil(n / circle_size)
    conversion_probability: float = 1.0
    scenario: Scenario = Scenario.AVERAGE
    mixed_rule: MixedRule = MixedRule.ANY_TWO
    max_steps: int = 200
    run_count: int = 1000
    seed: int = 0
    hours_per_step: float = 1.0
    record_run: int | None = 0

    def __post_init__(self):
        if isinstance(self.scenario, str):
            object.__setattr__(self, "scenario", Scenario(self.scenario))
        if isinstance(self.mixed_rule, str):
            object.__setattr__(self, "mixed_rule", MixedRule(self.mixed_rule))
        if self.circle_size < 2:
            raise ValidationError("circle_size must be >= 2")
        if self.circles_per_step is not None and self.circles_per_step < 1:
            raise ValidationError("circles_per_step must be >= 1")
        if not 0.0 <= self.conversion_probability <= 1.0:
            raise ValidationError("conversion_probability must lie in [0, 1]")
        if self.max_steps < 0:
            raise ValidationError("max_steps must be >= 0")
        if self.run_count < 1:
            raise ValidationError("run_count must be >= 1")
        if self.hours_per_step <= 0:
            raise ValidationError("hours_per_step must be > 0")
        if self.record_run is not None and not 0 <= self.record_run < self.run_count:
            raise ValidationError("record_run must index one of the runs")

    def circles_for(self, n: int) -> int:
        if self.circles_per_step is not None:
            return self.circles_per_step
        return max(1, math.ceil(n / self.circle_size))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        d["mixed_rule"] = self.mixed_rule.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "SofteningConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown simulation option(s): {', '.join(sorted(unknown))}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc)) from None


@dataclass
class StanceState:
    codes: np.ndarray  # int8 per node, indexed like Snapshot.nodes
    step: int = 0

    @classmethod
    def initial(cls, s: Snapshot) -> "StanceState":
        return cls(s.stance_codes.copy(), 0)

    def counts(self) -> tuple[int, int, int]:
        c = np.bincount(self.codes, minlength=3)
        return int(c[ANTI]), int(c[PRO]), int(c[NEUTRAL])


def draw_circle(s: Snapshot, state: StanceState, rng: np.random.Generator, circle_size: int) -> set[str]:
    """One circle: a uniform seed plus up to ``circle_size - 1`` distinct uniform neighbors."""
    if s.n == 0:
        raise ValidationError("cannot draw a circle from an empty snapshot")
    indptr, indices = s.undirected_csr
    seed = int(rng.integers(s.n))
    nbrs = indices[indptr[seed]:indptr[seed + 1]]
    k = min(circle_size - 1, len(nbrs))
    chosen = rng.choice(nbrs, size=k, replace=False) if k else []
    return {s.ids[seed], *(s.ids[int(i)] for i in chosen)}


def is_mixed(circle, state, rule: MixedRule = MixedRule.ANY_TWO) -> bool:
    """``circle``: iterable of stances (Stance or code), or node indices when ``state`` is given."""
    labels = [state.codes[i] for i in circle] if state is not None else list(circle)
    codes = {x.code if isinstance(x, Stance) else int(x) for x in labels}
    if not codes:
        raise ValidationError("empty circle")
    if rule is MixedRule.ANTI_PRO:
        return ANTI in codes and PRO in codes
    return len(codes) >= 2


def _draw_circles(indptr, indices, n, count, size, rng):
    """Vectorized batch of circles: (member node indices, circle index per member)."""
    seeds = rng.integers(n, size=count)
    deg = indptr[seeds + 1] - indptr[seeds]
    total = int(deg.sum())
    if total == 0:
        return seeds, np.arange(count)
    seg = np.repeat(np.arange(count), deg)
    offset_in_seg = np.arange(total) - np.repeat(np.cumsum(deg) - deg, deg)
    nbrs = indices[np.repeat(indptr[seeds], deg) + offset_in_seg]
    keys = rng.random(total)
    order = np.lexsort((keys, seg))
    # order keeps segments contiguous and in segment order, so rank = offset_in_seg
    chosen = order[offset_in_seg < size - 1]
    members = np.concatenate([seeds, nbrs[chosen]])
    circle = np.concatenate([np.arange(count), seg[chosen]])
    return members, circle


def _step_codes(codes, indptr, indices, count, config: SofteningConfig, rng) -> np.ndarray:
    n = len(codes)
    members, circle = _draw_circles(indptr, indices, n, count, config.circle_size, rng)
    stance = codes[members]
    if config.mixed_rule is MixedRule.ANY_TWO:
        lo = np.full(count, 3, dtype=np.int8)
        hi = np.full(count, -1, dtype=np.int8)
        np.minimum.at(lo, circle, stance)
        np.maximum.at(hi, circle, stance)
        mixed = lo != hi
    else:
        seen = np.zeros(count, dtype=np.int8)
        np.bitwise_or.at(seen, circle, (1 << stance).astype(np.int8))
        mixed = (seen & 0b011) == 0b011
    convert = mixed[circle] & np.isin(stance, config.scenario.eligible)
    p = config.conversion_probability
    if p < 1.0:
        convert &= rng.random(len(members)) < p
    out = codes.copy()
    out[members[convert]] = NEUTRAL
    return out


def simulate_step(s: Snapshot, state: StanceState, config: SofteningConfig, rng: np.random.Generator) -> StanceState:
    """Draw one step's circles and apply every conversion at once."""
    indptr, indices = s.undirected_csr
    codes = _step_codes(state.codes, indptr, indices, config.circles_for(s.n), config, rng)
    return StanceState(codes, state.step + 1)


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, run_index])


def _single_run(codes0, indptr, indices, config: SofteningConfig, run_index: int, record: bool):
    n = len(codes0)
    steps = config.max_steps
    count = config.circles_for(n)
    rng = run_rng(config.seed, run_index)
    eligible = list(config.scenario.eligible)
    traj = np.empty((steps + 1, 3), dtype=np.int64)
    states = np.empty((steps + 1, n), dtype=np.int8) if record else None
    codes = codes0.copy()
    t = 0
    traj[0] = np.bincount(codes, minlength=3)
    if record:
        states[0] = codes
    while t < steps:
        if n == 0 or traj[t, eligible].sum() == 0:
            traj[t + 1:] = traj[t]
            if record:
                states[t + 1:] = codes
            break
        codes = _step_codes(codes, indptr, indices, count, config, rng)
        t += 1
        traj[t] = np.bincount(codes, minlength=3)
        if record:
            states[t] = codes
    return traj, states


def _run_block(args):
    codes0, indptr, indices, config, start, stop = args
    trajs = []
    recorded = None
    for i in range(start, stop):
        traj, states = _single_run(codes0, indptr, indices, config, i, i == config.record_run)
        trajs.append(traj)
        if states is not None:
            recorded = states
    return np.stack(trajs), recorded


@dataclass(frozen=True)
class Milestone:
    mean_step: float
    sd_step: float
    censored_runs: int
    steps: np.ndarray = field(repr=False, compare=False)  # per run, -1 where censored


@dataclass
class SofteningResult:
    config: SofteningConfig
    snapshot: Snapshot
    trajectories: np.ndarray  # (runs, steps + 1, 3) anti, pro, neutral counts
    mean: np.ndarray  # (steps + 1, 3)
    sd: np.ndarray  # (steps + 1, 3)
    milestones: dict[str, Milestone]
    recorded_states: np.ndarray | None = None
    recorded_run: int | None = None

    def trajectory_rows(self):
        for t in range(self.mean.shape[0]):
            m, d = self.mean[t], self.sd[t]
            yield t, repr(float(m[ANTI])), repr(float(d[ANTI])), repr(float(m[PRO])), repr(float(d[PRO])), repr(float(m[NEUTRAL]))

    def run_rows(self):
        for r, traj in enumerate(self.trajectories):
            for t, (a, p, nu) in enumerate(traj):
                yield r, t, int(a), int(p), int(nu)

    def milestone_rows(self):
        for name, m in self.milestones.items():
            yield name, repr(m.mean_step), repr(m.sd_step), m.censored_runs


TRAJECTORY_HEADER = ("step", "anti_mean", "anti_sd", "pro_mean", "pro_sd", "neutral_mean")
RUN_HEADER = ("run", "step", "anti", "pro", "neutral")
MILESTONE_HEADER = ("name", "mean_step", "sd_step", "censored_runs")


def _first_step(mask: np.ndarray) -> np.ndarray:
    hit = mask.any(axis=1)
    return np.where(hit, mask.argmax(axis=1), -1)


def _milestone(steps: np.ndarray) -> Milestone:
    done = steps[steps >= 0]
    censored = int((steps < 0).sum())
    if len(done) == 0:
        return Milestone(math.nan, math.nan, censored, steps)
    sd = float(done.std(ddof=1)) if len(done) > 1 else 0.0
    return Milestone(float(done.mean()), sd, censored, steps)


def compute_milestones(trajectories: np.ndarray, scenario: Scenario) -> dict[str, Milestone]:
    anti, pro = trajectories[:, :, ANTI], trajectories[:, :, PRO]
    eligible = anti + pro if scenario is Scenario.AVERAGE else anti
    return {
        "half_anti": _milestone(_first_step(2 * anti <= anti[:, :1])),
        "half_pro": _milestone(_first_step(2 * pro <= pro[:, :1])),
        "full_neutral": _milestone(_first_step(eligible == 0)),
    }


RUN_BLOCK = 50


def run_ensemble(s: Snapshot, config: SofteningConfig = SofteningConfig(), workers: int = 1) -> SofteningResult:
    """``run_count`` independent runs; run ``i`` draws from its own stream seeded by (seed, i).

    Runs are gathered in index order before any reduction, so the result is
    the same for every ``workers`` value.
    """
    codes0 = s.stance_codes.copy()
    indptr, indices = s.undirected_csr
    blocks = [(a, min(a + RUN_BLOCK, config.run_count)) for a in range(0, config.run_count, RUN_BLOCK)]
    tasks = [(codes0, indptr, indices, config, a, b) for a, b in blocks]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, tasks))
    else:
        parts = [_run_block(t) for t in tasks]
    trajectories = np.concatenate([p[0] for p in parts])
    recorded = next((p[1] for p in parts if p[1] is not None), None)
    values = trajectories.astype(float)
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1) if config.run_count > 1 else np.zeros_like(mean)
    return SofteningResult(
        config=config,
        snapshot=s,
        trajectories=trajectories,
        mean=mean,
        sd=sd,
        milestones=compute_milestones(trajectories, config.scenario),
        recorded_states=recorded,
        recorded_run=config.record_run,
    )


def snapshot_states(result: SofteningResult, steps) -> list[Snapshot]:
    """Stance-relabeled snapshots of the recorded run; steps past the end give the final state."""
    if result.recorded_states is None:
        raise StepNotRecorded("no run was recorded; set record_run")
    last = result.recorded_states.shape[0] - 1
    out = []
    for t in steps:
        if t < 0:
            raise StepNotRecorded(f"step {t} precedes the simulation")
        codes = result.recorded_states[min(t, last)]
        stances = {nid: STANCE_ORDER[c] for nid, c in zip(result.snapshot.ids, codes)}
        out.append(result.snapshot.with_stances(stances, label=f"{result.snapshot.label}@step{t}"))
    return out

