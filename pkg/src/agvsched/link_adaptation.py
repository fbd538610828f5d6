"""MCS catalogue, resource-block arithmetic and MCS selection.

BLER curves are tabulated against SNR in dB and interpolated linearly in
``(dB, log10 BLER)``. Tables load from CSV with the header
``mcs_id,modulation_order,code_rate,snr_db,bler``.
"""

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from .numerics import DEFAULT_QUADRATURE, TabulatedCurve, rayleigh_expect

__all__ = [
    "RB_SYMBOLS",
    "MODULATION_ORDERS",
    "BlerTableError",
    "McsEntry",
    "McsCatalogue",
    "RbBudget",
    "rb_needed",
    "bler_at",
    "expected_bler",
    "select_mcs",
    "equal_share_mcs",
    "load_bler_table",
    "default_catalogue",
    "DEFAULT_TABLE",
    "WATERFALL_PARAMS",
    "waterfall_rows",
    "write_bler_table",
]

RB_SYMBOLS = 12 * 7
MODULATION_ORDERS = (4, 16, 64)
BLER_FLOOR = 1e-12

DEFAULT_TABLE = "default_bler.csv"

# Waterfall model BLER = min(1, exp(-a (snr_db - b))); each entry is given by
# the SNR at 10 % BLER, so b = snr10 - ln(10) / a. Values follow the usual
# LTE link-level spacing of QPSK/16QAM/64QAM at rates 1/3, 1/2 and 3/4.
WATERFALL_SLOPE = 1.15
WATERFALL_PARAMS = (
    # id, M, R, snr_db at BLER 0.1
    (0, 4, "1/3", -1.0),
    (1, 4, "1/2", 1.5),
    (2, 4, "3/4", 4.5),
    (3, 16, "1/3", 4.0),
    (4, 16, "1/2", 7.0),
    (5, 16, "3/4", 11.0),
    (6, 64, "1/3", 9.0),
    (7, 64, "1/2", 12.5),
    (8, 64, "3/4", 16.5),
)


class BlerTableError(ValueError):
    """Malformed BLER table; the message names the offending CSV row."""


@dataclass(frozen=True)
class McsEntry:
    """One modulation-and-coding scheme with its BLER curve.

    Attributes
    ----------
    id : int
    modulation_order : int
        Constellation size M.
    code_rate : float
        Channel code rate R in (0, 1].
    curve : TabulatedCurve
        BLER versus SNR in dB.
    """

    id: int
    modulation_order: int
    code_rate: float
    curve: object = field(compare=False, repr=False)

    @property
    def bits_per_symbol(self):
        return math.log2(self.modulation_order)

    @property
    def efficiency(self):
        return self.code_rate * self.bits_per_symbol


def rb_needed(payload_bits, mcs):
    """Smallest RB count carrying ``payload_bits`` at ``mcs``.

    ``ceil(D / (84 log2(M) R))``; a relative slack of 1e-9 absorbs rounding
    of rates such as 1/3 so exact multiples need no extra block.
    """
    if not payload_bits > 0:
        raise ValueError("payload_bits must be > 0")
    cap = RB_SYMBOLS * mcs.bits_per_symbol * mcs.code_rate
    return max(1, math.ceil(payload_bits / cap * (1.0 - 1e-9)))


def bler_at(mcs, snr_linear):
    """Instantaneous BLER of ``mcs`` at linear SNR ``snr_linear``."""
    return mcs.curve.at(snr_linear)


def expected_bler(mcs, gamma_b, spec=DEFAULT_QUADRATURE):
    """BLER of ``mcs`` averaged over Rayleigh fading with mean SNR ``gamma_b``."""
    return rayleigh_expect(mcs.curve, gamma_b, spec)


class McsCatalogue:
    """Immutable MCS list sorted by spectral efficiency (then id)."""

    def __init__(self, entries):
        entries = sorted(entries, key=lambda e: (e.efficiency, e.id))
        if not entries:
            raise ValueError("empty MCS catalogue")
        ids = [e.id for e in entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate MCS ids")
        self.entries = tuple(entries)
        self._by_id = {e.id: e for e in entries}
        self._desc = tuple(reversed(self.entries))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def by_id(self, mcs_id):
        return self._by_id[mcs_id]

    @property
    def most_robust(self):
        return self.entries[0]

    @property
    def descending(self):
        return self._desc

    def rb_table(self, payload_bits):
        """``{mcs_id: rb_needed}`` for a payload."""
        return {e.id: rb_needed(payload_bits, e) for e in self.entries}


def select_mcs(catalogue, snr_linear, pe_threshold):
    """Most spectrally efficient entry with BLER below ``pe_threshold``.

    Among equally efficient qualifying entries the one with the lower BLER
    at ``snr_linear`` wins, then the lower id. Returns ``None`` when no entry
    qualifies.
    """
    best = None
    best_bler = 0.0
    for e in catalogue.descending:
        if best is not None and e.efficiency < best.efficiency:
            break
        p = e.curve.at(snr_linear)
        if p < pe_threshold and (best is None or (p, e.id) < (best_bler, best.id)):
            best = e
            best_bler = p
    return best


def equal_share_mcs(catalogue, share_rb, payload_bits):
    """Most robust entry that fits in ``share_rb`` blocks.

    Falls back to the most efficient entry when none fits.
    """
    for e in catalogue.entries:
        if rb_needed(payload_bits, e) <= share_rb:
            return e
    return catalogue.entries[-1]


@dataclass
class RbBudget:
    """Per-tick resource-block budget."""

    payload_bits: int = 600
    total_rb: int = 60
    rb_symbols: int = RB_SYMBOLS
    allocated: dict = field(default_factory=dict)

    @property
    def used(self):
        return sum(self.allocated.values())

    @property
    def remaining(self):
        return self.total_rb - self.used

    def assign(self, agv_id, n_rb):
        if n_rb < 0 or int(n_rb) != n_rb:
            raise ValueError("RB count must be a non-negative integer")
        if n_rb > self.remaining:
            raise ValueError("RB budget exceeded")
        self.allocated[agv_id] = self.allocated.get(agv_id, 0) + int(n_rb)


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------

_HEADER = ["mcs_id", "modulation_order", "code_rate", "snr_db", "bler"]


def _parse_rate(text):
    return float(Fraction(text.strip()))


def load_bler_table(path):
    """Read a BLER table into an :class:`McsCatalogue`.

    Rows may appear in any order. Every entry must use one modulation order
    from {4, 16, 64} and one code rate in (0, 1]; its BLER must lie in
    [0, 1] and be non-increasing in SNR. Code rates may be written as
    fractions such as ``1/3``.

    Raises
    ------
    BlerTableError
        On the first malformed row; the message gives its line number.
    """
    groups = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BlerTableError(f"{path}: empty file") from None
        if [h.strip() for h in header] != _HEADER:
            raise BlerTableError(f"{path}: row 1: header must be {','.join(_HEADER)}")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(_HEADER):
                raise BlerTableError(f"{path}: row {line}: expected 5 fields, got {len(row)}")
            try:
                mcs_id = int(row[0])
                m = int(row[1])
                r = _parse_rate(row[2])
                s = float(row[3])
                b = float(row[4])
            except (ValueError, ZeroDivisionError) as exc:
                raise BlerTableError(f"{path}: row {line}: {exc}") from None
            if m not in MODULATION_ORDERS:
                raise BlerTableError(f"{path}: row {line}: modulation_order {m} not in {MODULATION_ORDERS}")
            if not 0.0 < r <= 1.0:
                raise BlerTableError(f"{path}: row {line}: code_rate {r} outside (0, 1]")
            if not math.isfinite(s):
                raise BlerTableError(f"{path}: row {line}: snr_db must be finite")
            if not 0.0 <= b <= 1.0:
                raise BlerTableError(f"{path}: row {line}: bler {b} outside [0, 1]")
            g = groups.setdefault(mcs_id, {"m": m, "r": r, "pts": {}, "line": line})
            if g["m"] != m or g["r"] != r:
                raise BlerTableError(
                    f"{path}: row {line}: mcs_id {mcs_id} changes modulation_order or code_rate"
                )
            if s in g["pts"]:
                raise BlerTableError(
                    f"{path}: row {line}: duplicate (mcs_id, snr_db) = ({mcs_id}, {s:g}), "
                    f"first at row {g['pts'][s][1]}"
                )
            g["pts"][s] = (b, line)
    if not groups:
        raise BlerTableError(f"{path}: no data rows")
    entries = []
    for mcs_id, g in groups.items():
        pts = sorted(g["pts"].items())
        for (s0, (b0, _)), (s1, (b1, line)) in zip(pts[:-1], pts[1:]):
            if b1 > b0:
                raise BlerTableError(
                    f"{path}: row {line}: BLER of mcs_id {mcs_id} rises from {b0:g} "
                    f"at {s0:g} dB to {b1:g} at {s1:g} dB"
                )
        curve = TabulatedCurve([s for s, _ in pts], [b for _, (b, _l) in pts])
        entries.append(McsEntry(mcs_id, g["m"], g["r"], curve))
    return McsCatalogue(entries)


def default_catalogue():
    """The shipped nine-entry table."""
    with resources.as_file(resources.files("agvsched") / "data" / DEFAULT_TABLE) as p:
        return load_bler_table(p)


def waterfall_rows(params=WATERFALL_PARAMS, slope=WATERFALL_SLOPE, step_db=1.0,
                   floor=BLER_FLOOR):
    """Rows of a waterfall BLER table.

    Each curve is sampled from its knee ``b`` (BLER 1) in ``step_db`` steps
    down to ``floor``. The model is linear in (dB, log BLER) above the knee,
    so log-linear interpolation of these samples reproduces it exactly.
    """
    rows = []
    span = math.log(1.0 / floor) / slope
    for mcs_id, m, rate, snr10 in params:
        knee = snr10 - math.log(10.0) / slope
        n = math.ceil(span / step_db)
        for k in range(n + 1):
            s = knee + min(k * step_db, span)
            b = min(1.0, math.exp(-slope * (s - knee)))
            rows.append((mcs_id, m, rate, round(s, 6), float(f"{max(b, floor):.6e}")))
    return rows


def write_bler_table(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_HEADER)
        w.writerows(rows)
