"""Discrete-time run engine.

Per tick ``k``:

1. refresh every active AGV's fading gain and mean SNR (from its distance
   to the edge cloud at the origin);
2. remove AGVs with ``eps >= eps_th`` or ``delta >= n_max`` as unstable,
   then those whose service has ended as successful;
3. admit arrivals (Bernoulli(lambda) per tick);
4. allocate resource blocks;
5. draw deliveries and step every AGV's plant;
6. record resource utilisation.

Random streams are split from the master ``seed`` and the run index
``replicate`` with ``numpy.random.SeedSequence(seed, spawn_key=...)``,
independently of the policy: key ``(replicate, 0)`` drives arrivals and
``(replicate, 1, agv_id, j)`` drives AGV ``agv_id``'s placement (``j=0``),
fading (``j=1``) and delivery draws (``j=2``). Runs that differ only in
policy therefore see identical arrivals, channels and delivery uniforms.
"""

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import RadioConfig, FadingState, fading_correlation, gain_trajectory, mean_snr
from .control import (
    AgvRecord,
    AgvStatus,
    Gains,
    Pose,
    TrackSpec,
    apply_tick,
    compute_command,
    reference_pose,
    reference_rate,
)
from .link_adaptation import RbBudget, default_catalogue, load_bler_table
from .numerics import DEFAULT_QUADRATURE
from .scheduler import (
    CONSTANT_THRESHOLD,
    PolicyKind,
    SchedulerContext,
    allocate_tick,
    audit_decision,
    draw_delivery,
)
from .stability import PBB_FORMS, StabilityParams

__all__ = [
    "InitialPopulation",
    "SimConfig",
    "AgvOutcome",
    "RunSummary",
    "classify",
    "spawn_arrivals",
    "run",
    "arrival_stream",
    "agv_streams",
]


class InitialPopulation(enum.Enum):
    STATIONARY = "stationary"
    EMPTY = "empty"


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one run.

    Rates are per tick. ``sample_time`` is shared with ``radio``.
    ``initial_population="stationary"`` starts from the steady state of the
    arrival/service process (a Poisson(lambda/mu) population with
    memoryless residual service); ``"empty"`` starts with no AGVs.
    ``ideal_channel`` makes every scheduled transmission succeed.
    """

    arrival_rate: float = 2e-3
    service_rate: float = 4e-4
    n_max: int = 10
    eps_th: float = 0.02
    n_rb: int = 60
    payload_bits: int = 600
    sample_time: float = 0.005
    total_ticks: int = 10_000
    seed: int = 0
    replicate: int = 0
    radio: RadioConfig = RadioConfig()
    policy: PolicyKind = PolicyKind.INSTABILITY
    gains: Gains = Gains()
    track_shape: str = "line"
    track_speed: float = 1.0
    track_radius: float = 10.0
    cell_radius: float = 1000.0
    initial_offset_max: float = 0.01
    v_max: float = 5.0
    instability_bound: float = 1e-9
    pbb_form: str = "corrected"
    constant_threshold: float = CONSTANT_THRESHOLD
    initial_population: InitialPopulation = InitialPopulation.STATIONARY
    ideal_channel: bool = False
    bler_table: str | None = None
    audit: bool = False

    def validate(self):
        """List of ``(key, message)`` problems; empty when the config is valid."""
        bad = [(f"radio.{k}", m) for k, m in self.radio.validate()]
        for name in ("kx", "ky", "ktheta"):
            v = getattr(self.gains, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                bad.append((f"gains.{name}", f"must be finite, got {v!r}"))
        if not 0.0 <= self.arrival_rate < 0.1:
            bad.append(("arrival_rate", f"must lie in [0, 0.1), got {self.arrival_rate!r}"))
        if not 0.0 < self.service_rate < 1.0:
            bad.append(("service_rate", f"must lie in (0, 1), got {self.service_rate!r}"))
        for key in ("n_max", "n_rb", "payload_bits", "total_ticks"):
            v = getattr(self, key)
            lo = 0 if key == "n_rb" else 1
            if not (isinstance(v, int) and v >= lo):
                bad.append((key, f"must be an integer >= {lo}, got {v!r}"))
        for key in ("seed", "replicate"):
            v = getattr(self, key)
            if not (isinstance(v, int) and v >= 0):
                bad.append((key, f"must be a non-negative integer, got {v!r}"))
        for key in ("eps_th", "sample_time", "track_speed", "cell_radius", "v_max"):
            v = getattr(self, key)
            if not (math.isfinite(v) and v > 0.0):
                bad.append((key, f"must be finite and > 0, got {v!r}"))
        if self.sample_time != self.radio.sample_time:
            bad.append(("sample_time", "differs from radio.sample_time"))
        if not (math.isfinite(self.initial_offset_max) and 0.0 <= self.initial_offset_max < self.eps_th):
            bad.append(("initial_offset_max", "must lie in [0, eps_th)"))
        if self.track_shape not in ("line", "circle"):
            bad.append(("track_shape", f"must be line or circle, got {self.track_shape!r}"))
        if self.track_shape == "circle" and not (math.isfinite(self.track_radius) and self.track_radius != 0.0):
            bad.append(("track_radius", "must be finite and non-zero"))
        if not 0.0 < self.instability_bound < 1.0:
            bad.append(("instability_bound", f"must lie in (0, 1), got {self.instability_bound!r}"))
        if self.pbb_form not in PBB_FORMS:
            bad.append(("pbb_form", f"must be one of {PBB_FORMS}, got {self.pbb_form!r}"))
        if not 0.0 < self.constant_threshold <= 1.0:
            bad.append(("constant_threshold", f"must lie in (0, 1], got {self.constant_threshold!r}"))
        if not isinstance(self.policy, PolicyKind):
            bad.append(("policy", f"not a PolicyKind: {self.policy!r}"))
        if not isinstance(self.initial_population, InitialPopulation):
            bad.append(("initial_population", f"not an InitialPopulation: {self.initial_population!r}"))
        return bad

    def with_values(self, **changes):
        """Copy with ``changes``; ``sample_time`` is propagated to ``radio``."""
        if "sample_time" in changes and "radio" not in changes:
            changes["radio"] = replace(self.radio, sample_time=changes["sample_time"])
        return replace(self, **changes)

    def flat_items(self):
        """``(key, value)`` pairs with radio fields prefixed ``radio.``."""
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "radio":
                out.extend((f"radio.{g.name}", getattr(v, g.name)) for g in fields(v))
            elif f.name == "gains":
                out.extend((f"gains.{g.name}", getattr(v, g.name)) for g in fields(v))
            elif isinstance(v, enum.Enum):
                out.append((f.name, v.value))
            else:
                out.append((f.name, v))
        return out


@dataclass(frozen=True)
class AgvOutcome:
    id: int
    arrival_tick: int
    end_tick: int
    status: AgvStatus
    reason: str


@dataclass
class RunSummary:
    """Result of one run.

    Attributes
    ----------
    ru_pct : numpy.ndarray
        Per-tick resource utilisation in percent.
    arrived, successful, unstable, active_at_end : int
    fallback_count : int
        Scheduled transmissions that had to use the most robust MCS because
        none met the threshold.
    outcomes : list of AgvOutcome
        Final status of every AGV that left the system.
    trace : list of tuple or None
        Per-tick ``(tick, n_active, n_scheduled, rb_used, ru_pct, fallbacks)``
        when requested.
    audit_violations : list of str
    averaged_audit_violations : int
        Scheduled non-fallback instability-policy allocations whose
        fading-averaged BLER breaks the bound (diagnostic only).
    """

    config: SimConfig
    ru_pct: np.ndarray
    arrived: int = 0
    successful: int = 0
    unstable: int = 0
    active_at_end: int = 0
    fallback_count: int = 0
    unstable_by_error: int = 0
    unstable_by_losses: int = 0
    scheduled_ticks: int = 0
    active_ticks: int = 0
    outcomes: list = field(default_factory=list)
    trace: list | None = None
    audit_violations: list = field(default_factory=list)
    averaged_audit_violations: int = 0

    @property
    def mean_ru_pct(self):
        return float(np.mean(self.ru_pct)) if len(self.ru_pct) else 0.0

    @property
    def unstable_pct(self):
        return 100.0 * self.unstable / self.arrived if self.arrived else 0.0

    @property
    def mean_active(self):
        return self.active_ticks / len(self.ru_pct) if len(self.ru_pct) else 0.0


def arrival_stream(seed, replicate=0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, 0)))


def agv_streams(seed, replicate, agv_id):
    """(placement, fading, delivery) generators of one AGV."""
    return tuple(
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replicate, 1, agv_id, j)))
        for j in range(3)
    )


def classify(agv, eps_th, n_max, tick=None):
    """Lifecycle status of an active AGV at the start of ``tick``.

    Unstable when ``eps >= eps_th`` or ``delta >= n_max``; otherwise
    successful once ``tick`` reaches its service end (ignored when ``tick``
    is None); otherwise still active.
    """
    if agv.error >= eps_th or agv.delta >= n_max:
        return AgvStatus.UNSTABLE
    if tick is not None and tick >= agv.service_end_tick:
        return AgvStatus.SUCCESSFUL
    return AgvStatus.ACTIVE


def _make_agv(agv_id, tick, config, rho):
    place, fade, deliver = agv_streams(config.seed, config.replicate, agv_id)
    u = place.random(4)
    r = config.cell_radius * math.sqrt(u[0])
    phi = 2.0 * math.pi * u[1]
    psi = 2.0 * math.pi * u[2] - math.pi
    offset = config.initial_offset_max * (2.0 * u[3] - 1.0)
    service = int(place.geometric(config.service_rate))
    start = Pose(r * math.cos(phi), r * math.sin(phi), psi)
    track = TrackSpec(config.track_shape, config.track_speed, start, config.track_radius)
    pose = Pose(start.x - offset * math.sin(psi), start.y + offset * math.cos(psi), psi)
    # gains[j] is the fading gain j ticks after arrival; the final tick the
    # AGV can see is min(service, remaining horizon)
    n = min(service, config.total_ticks - 1 - tick) + 1
    z = fade.standard_normal(2) * math.sqrt(0.5)
    h0 = complex(z[0], z[1])
    gains = np.empty(n, dtype=complex)
    gains[0] = h0
    gains[1:] = gain_trajectory(h0, rho, n - 1, fade)
    agv = AgvRecord(
        id=agv_id,
        arrival_tick=tick,
        service_end_tick=tick + service,
        track=track,
        pose=pose,
        error=abs(offset),
    )
    agv.extra["gains"] = gains
    agv.extra["u"] = deliver.random(n)
    return agv


def spawn_arrivals(tick, arrival_rate, rng, config, next_id, rho, count=None):
    """New AGVs for ``tick``.

    One uniform from ``rng`` decides a Bernoulli(``arrival_rate``) arrival;
    pass ``count`` to admit a fixed number instead. Placement is uniform in
    the disk of radius ``config.cell_radius`` with a uniform heading, and
    service lengths are geometric with mean ``1 / config.service_rate``.
    """
    if count is None:
        count = 1 if rng.random() < arrival_rate else 0
    return [_make_agv(next_id + i, tick, config, rho) for i in range(count)]


def _refresh_fading(agv, tick, radio, ideal):
    j = tick - agv.arrival_tick
    gb = mean_snr(radio, math.hypot(agv.pose.x, agv.pose.y))
    if ideal:
        agv.fading = FadingState(1.0 + 0j, gb, gb)
    else:
        h = agv.extra["gains"][j]
        agv.fading = FadingState(h, gb, (h.real * h.real + h.imag * h.imag) * gb)


def run(config, catalogue=None, trace=False):
    """Simulate one run.

    Parameters
    ----------
    config : SimConfig
    catalogue : McsCatalogue, optional
        Defaults to ``config.bler_table`` when set, else the shipped table.
    trace : bool
        Keep the per-tick trace.

    Returns
    -------
    RunSummary
    """
    bad = config.validate()
    if bad:
        raise ValueError("invalid SimConfig: " + "; ".join(f"{k}: {m}" for k, m in bad))
    if catalogue is None:
        catalogue = load_bler_table(config.bler_table) if config.bler_table else default_catalogue()
    rho = fading_correlation(config.radio)
    params = StabilityParams(config.n_max, config.instability_bound, rho, config.pbb_form)
    ctx = SchedulerContext(
        catalogue=catalogue,
        params=params,
        payload_bits=config.payload_bits,
        total_rb=config.n_rb,
        eps_th=config.eps_th,
        constant_threshold=config.constant_threshold,
        quadrature=DEFAULT_QUADRATURE,
        ideal_channel=config.ideal_channel,
    )
    policy = config.policy
    ts = config.sample_time
    arr = arrival_stream(config.seed, config.replicate)
    summary = RunSummary(config, np.zeros(config.total_ticks), trace=[] if trace else None)
    active = []
    next_id = 0

    if config.initial_population is InitialPopulation.STATIONARY:
        n0 = int(arr.poisson(config.arrival_rate / config.service_rate))
        active.extend(spawn_arrivals(0, 0.0, None, config, next_id, rho, count=n0))
        next_id += n0

    for k in range(config.total_ticks):
        for agv in active:
            _refresh_fading(agv, k, config.radio, config.ideal_channel)
        keep = []
        for agv in active:
            status = classify(agv, config.eps_th, config.n_max, k)
            if status is AgvStatus.ACTIVE:
                keep.append(agv)
                continue
            agv.status = status
            if status is AgvStatus.UNSTABLE:
                summary.unstable += 1
                if agv.error >= config.eps_th:
                    reason = "error"
                    summary.unstable_by_error += 1
                else:
                    reason = "losses"
                    summary.unstable_by_losses += 1
            else:
                summary.successful += 1
                reason = "completed"
            summary.outcomes.append(AgvOutcome(agv.id, agv.arrival_tick, k, status, reason))
            agv.extra.clear()
        active = keep

        new = spawn_arrivals(k, config.arrival_rate, arr, config, next_id, rho)
        for agv in new:
            _refresh_fading(agv, k, config.radio, config.ideal_channel)
        next_id += len(new)
        active.extend(new)

        budget = RbBudget(config.payload_bits, config.n_rb)
        decision = allocate_tick(policy, active, budget, ctx)
        if config.audit:
            for msg in audit_decision(policy, active, decision, ctx):
                summary.audit_violations.append(f"tick {k}: {msg}")
            if policy is PolicyKind.INSTABILITY and not config.ideal_channel:
                summary.averaged_audit_violations += len(
                    audit_decision(policy, active, decision, ctx, averaged=True)
                )

        n_sched = 0
        fallbacks = 0
        for agv in active:
            al = decision.allocations[agv.id]
            j = k - agv.arrival_tick
            ok = draw_delivery(al, u=agv.extra["u"][j])
            if al.scheduled:
                n_sched += 1
                agv.last_mcs = al.mcs.id
                fallbacks += al.fallback
            cmd = None
            if ok:
                ref = reference_pose(agv.track, agv.local_tick, ts)
                cmd = compute_command(
                    agv.pose, ref, agv.track.speed, config.gains,
                    reference_rate(agv.track), issue_tick=k, v_max=config.v_max,
                )
            apply_tick(agv, ok, cmd, ts)
        used = budget.used
        summary.ru_pct[k] = 100.0 * used / config.n_rb if config.n_rb else 0.0
        summary.fallback_count += fallbacks
        summary.scheduled_ticks += n_sched
        summary.active_ticks += len(active)
        if trace:
            summary.trace.append((k, len(active), n_sched, used, summary.ru_pct[k], fallbacks))

    summary.arrived = next_id
    summary.active_at_end = len(active)
    return summary
