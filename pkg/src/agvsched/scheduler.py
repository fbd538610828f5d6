"""Per-tick downlink resource allocation.

One priority ordering is computed per tick and AGVs are served greedily in
that order: each gets the most efficient MCS whose instantaneous BLER is
below its error-probability threshold, and the RBs that MCS needs if they
are still available. AGVs that do not fit are unscheduled for the tick
(error probability 1). Blocks are never split.

Thresholds: the instability policy uses the dynamic ``p*(delta)`` that
keeps the probability of instability within its bound; the other two
policies use a constant 1e-3.
"""

import enum
import math
from dataclasses import dataclass, field

from .link_adaptation import (
    bler_at,
    equal_share_mcs,
    expected_bler,
    rb_needed,
    select_mcs,
)
from .numerics import DEFAULT_QUADRATURE
from .stability import p_instability, solve_pe_threshold

__all__ = [
    "CONSTANT_THRESHOLD",
    "PolicyKind",
    "Allocation",
    "AllocationDecision",
    "SchedulerContext",
    "priority_metric",
    "priority_order",
    "allocate_tick",
    "draw_delivery",
    "audit_decision",
]

CONSTANT_THRESHOLD = 1e-3


class PolicyKind(enum.Enum):
    INSTABILITY = "instability"
    MAX_SNR = "max_snr"
    ERROR_FIRST = "error_first"

    @classmethod
    def parse(cls, text):
        """Accept canonical names and the short CLI aliases."""
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_")
        key = {"maxsnr": "max_snr", "snr": "max_snr", "error": "error_first",
               "pus": "instability"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            names = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown policy {text!r}; expected one of {names}") from None


@dataclass(frozen=True)
class SchedulerContext:
    """Run-level inputs shared by every tick.

    Attributes
    ----------
    catalogue : McsCatalogue
    params : StabilityParams
    payload_bits : int
    total_rb : int
    eps_th : float
        Control-error threshold (metres).
    constant_threshold : float
        BLER ceiling for the max-SNR and error-first policies.
    quadrature : QuadratureSpec
    ideal_channel : bool
        Every scheduled transmission succeeds; the most efficient MCS is
        always chosen.
    """

    catalogue: object
    params: object
    payload_bits: int = 600
    total_rb: int = 60
    eps_th: float = 0.02
    constant_threshold: float = CONSTANT_THRESHOLD
    quadrature: object = DEFAULT_QUADRATURE
    ideal_channel: bool = False
    rb_by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rb_by_id", self.catalogue.rb_table(self.payload_bits))

    def threshold(self, policy, delta):
        if policy is PolicyKind.INSTABILITY:
            p = self.params
            return solve_pe_threshold(p.correlation, p.n_max, delta, p.instability_bound, p.pbb_form)
        return self.constant_threshold


@dataclass(slots=True)
class Allocation:
    """Outcome for one AGV in one tick."""

    agv_id: int
    rb_count: int = 0
    mcs: object = None
    inst_bler: float = 1.0
    scheduled: bool = False
    pe_threshold: float = math.nan
    fallback: bool = False


@dataclass
class AllocationDecision:
    """All allocations of one tick, in service order."""

    order: list
    allocations: dict
    total_rb: int

    @property
    def rb_used(self):
        return sum(a.rb_count for a in self.allocations.values())

    @property
    def fallback_count(self):
        return sum(1 for a in self.allocations.values() if a.scheduled and a.fallback)

    def __getitem__(self, agv_id):
        return self.allocations[agv_id]


def _pus_mcs(agv, ctx, n_active):
    if agv.last_mcs is not None:
        return ctx.catalogue.by_id(agv.last_mcs)
    # before the first allocation: MCS implied by an equal split of the grid
    return equal_share_mcs(ctx.catalogue, ctx.total_rb // max(n_active, 1), ctx.payload_bits)


def priority_metric(policy, agv, ctx, n_active):
    """Scalar metric, larger means served earlier.

    instability : ``P_us`` from the fading-averaged BLER of the AGV's
        current MCS at its mean SNR
    max_snr : instantaneous SNR
    error_first : ``-|eps_th - eps|``
    """
    if policy is PolicyKind.INSTABILITY:
        if ctx.ideal_channel:
            return 0.0
        p = ctx.params
        pe = expected_bler(_pus_mcs(agv, ctx, n_active), agv.fading.mean_snr_linear, ctx.quadrature)
        return p_instability(pe, p.correlation, p.n_max, agv.delta, p.pbb_form)
    if policy is PolicyKind.MAX_SNR:
        return agv.fading.inst_snr_linear
    return -abs(ctx.eps_th - agv.error)


def priority_order(policy, agvs, ctx):
    """AGV ids by descending priority; ties go to earlier arrival, then lower id."""
    n = len(agvs)
    keyed = [(-priority_metric(policy, a, ctx, n), a.arrival_tick, a.id) for a in agvs]
    keyed.sort()
    return [k[2] for k in keyed]


def allocate_tick(policy, agvs, budget, ctx):
    """Serve ``agvs`` greedily in priority order against ``budget``.

    Parameters
    ----------
    policy : PolicyKind
    agvs : list of AgvRecord
        Active AGVs with current ``fading``.
    budget : RbBudget
        Must start the tick empty; filled in place.
    ctx : SchedulerContext

    Returns
    -------
    AllocationDecision
    """
    if budget.allocated:
        raise ValueError("budget must be empty at the start of a tick")
    by_id = {a.id: a for a in agvs}
    order = priority_order(policy, agvs, ctx)
    remaining = budget.total_rb
    out = {}
    for agv_id in order:
        agv = by_id[agv_id]
        thr = ctx.threshold(policy, agv.delta)
        snr = math.inf if ctx.ideal_channel else agv.fading.inst_snr_linear
        mcs = select_mcs(ctx.catalogue, snr, thr)
        fallback = mcs is None
        if fallback:
            mcs = ctx.catalogue.most_robust
        n_rb = ctx.rb_by_id[mcs.id]
        alloc = Allocation(agv_id, pe_threshold=thr, fallback=fallback)
        if n_rb <= remaining:
            remaining -= n_rb
            budget.assign(agv_id, n_rb)
            alloc.rb_count = n_rb
            alloc.mcs = mcs
            alloc.inst_bler = 0.0 if ctx.ideal_channel else bler_at(mcs, snr)
            alloc.scheduled = True
        out[agv_id] = alloc
    return AllocationDecision(order, out, budget.total_rb)


def draw_delivery(allocation, rng=None, u=None):
    """Bernoulli delivery outcome: success with probability ``1 - inst_bler``.

    Pass either a generator or a pre-drawn uniform ``u`` in [0, 1).
    Unscheduled allocations always fail.
    """
    if not allocation.scheduled:
        return False
    if u is None:
        u = rng.random()
    return u >= allocation.inst_bler


def audit_decision(policy, agvs, decision, ctx, averaged=False):
    """Violations of the allocation invariants, as readable strings.

    Checks that the RBs handed out fit the grid, that every allocation is
    whole and consistent with its MCS, and, for the instability policy,
    that every scheduled AGV not on the forced fallback meets
    ``P_us(bler(mcs, gamma), delta) <= bound``. With ``averaged=True`` the
    fading-averaged BLER at the mean SNR is used instead of the
    instantaneous one.
    """
    bad = []
    used = 0
    ids = {a.id for a in agvs}
    if sorted(decision.order) != sorted(ids):
        bad.append("priority order is not a permutation of the active AGVs")
    by_id = {a.id: a for a in agvs}
    for agv_id, al in decision.allocations.items():
        if al.scheduled:
            if al.mcs is None or al.rb_count != rb_needed(ctx.payload_bits, al.mcs):
                bad.append(f"AGV {agv_id}: rb_count {al.rb_count} inconsistent with MCS")
            used += al.rb_count
        elif al.rb_count != 0 or al.inst_bler != 1.0:
            bad.append(f"AGV {agv_id}: unscheduled but holds RBs or BLER < 1")
    if used > ctx.total_rb:
        bad.append(f"{used} RBs allocated of {ctx.total_rb}")
    if policy is PolicyKind.INSTABILITY:
        p = ctx.params
        for agv_id, al in decision.allocations.items():
            if not al.scheduled or al.fallback:
                continue
            agv = by_id[agv_id]
            if averaged:
                pe = expected_bler(al.mcs, agv.fading.mean_snr_linear, ctx.quadrature)
            else:
                pe = al.inst_bler
            pus = p_instability(pe, p.correlation, p.n_max, agv.delta, p.pbb_form)
            if pus > p.instability_bound:
                bad.append(f"AGV {agv_id}: P_us {pus:.3e} above bound at delta={agv.delta}")
    return bad
