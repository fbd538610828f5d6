"""AGV kinematics and trajectory tracking.

A unicycle plant driven by velocity-level commands ``(v, omega)`` and a
Kanayama tracking controller. Commands that fail to arrive are replaced by
the last one that did (zero-order hold); before the first delivery the
vehicle receives a zero command and stands still.
"""

import enum
import math
from dataclasses import dataclass, field

__all__ = [
    "Pose",
    "ControlCommand",
    "ZERO_COMMAND",
    "TrackSpec",
    "Gains",
    "AgvStatus",
    "AgvRecord",
    "wrap_angle",
    "reference_pose",
    "reference_rate",
    "compute_command",
    "step_plant",
    "control_error",
    "apply_tick",
]

_TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(theta, _TWO_PI)
    return math.pi if a == -math.pi else a


@dataclass(frozen=True, slots=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        h = self.heading
        if not -math.pi < h <= math.pi:
            object.__setattr__(self, "heading", wrap_angle(h))


@dataclass(frozen=True, slots=True)
class ControlCommand:
    """Velocity-level command issued by the edge controller."""

    linear_velocity: float
    angular_velocity: float
    issue_tick: int = -1


ZERO_COMMAND = ControlCommand(0.0, 0.0, -1)


@dataclass(frozen=True)
class TrackSpec:
    """Reference track: a straight line or a circle traversed at constant speed.

    The circle starts at ``start`` and turns left when ``radius > 0`` and
    right when ``radius < 0``.
    """

    shape: str = "line"
    speed: float = 1.0
    start: Pose = Pose(0.0, 0.0, 0.0)
    radius: float = 10.0

    def __post_init__(self):
        if self.shape not in ("line", "circle"):
            raise ValueError(f"track shape must be 'line' or 'circle', got {self.shape!r}")
        if not self.speed > 0.0:
            raise ValueError(f"track speed must be > 0, got {self.speed!r}")
        if self.shape == "circle" and not (math.isfinite(self.radius) and self.radius != 0.0):
            raise ValueError("circle track needs a finite non-zero radius")


@dataclass(frozen=True)
class Gains:
    kx: float = 10.0
    ky: float = 64.0
    ktheta: float = 16.0


def reference_pose(track, tick, sample_time):
    """Pose on ``track`` after ``tick`` samples of length ``sample_time``."""
    s = track.speed * tick * sample_time
    p = track.start
    if track.shape == "line":
        return Pose(p.x + s * math.cos(p.heading), p.y + s * math.sin(p.heading), p.heading)
    r = track.radius
    cx = p.x - r * math.sin(p.heading)
    cy = p.y + r * math.cos(p.heading)
    psi = p.heading + s / r
    return Pose(cx + r * math.sin(psi), cy - r * math.cos(psi), psi)


def reference_rate(track):
    """Angular rate of the reference (rad/s)."""
    return 0.0 if track.shape == "line" else track.speed / track.radius


def compute_command(current, reference, reference_speed, gains=Gains(),
                    reference_angular_rate=0.0, issue_tick=-1, v_max=None):
    """Kanayama tracking law.

    With the reference pose expressed in the vehicle frame as
    ``(x_e, y_e, theta_e)``::

        v     = v_r cos(theta_e) + K_x x_e
        omega = omega_r + v_r (K_y y_e + K_theta sin(theta_e))

    Parameters
    ----------
    current, reference : Pose
    reference_speed : float
        ``v_r`` in m/s.
    gains : Gains
    reference_angular_rate : float
        ``omega_r`` in rad/s; zero for a straight track.
    issue_tick : int
        Stamp carried by the command.
    v_max : float, optional
        Symmetric bound on the linear velocity.
    """
    dx = reference.x - current.x
    dy = reference.y - current.y
    c = math.cos(current.heading)
    s = math.sin(current.heading)
    xe = c * dx + s * dy
    ye = -s * dx + c * dy
    te = wrap_angle(reference.heading - current.heading)
    v = reference_speed * math.cos(te) + gains.kx * xe
    w = reference_angular_rate + reference_speed * (gains.ky * ye + gains.ktheta * math.sin(te))
    if v_max is not None:
        v = max(-v_max, min(v_max, v))
    return ControlCommand(v, w, issue_tick)


def step_plant(current, command, sample_time):
    """Forward-Euler unicycle step ``X(k+1) = X(k) + T_s J(theta) u``."""
    v = command.linear_velocity
    th = current.heading
    return Pose(
        current.x + sample_time * v * math.cos(th),
        current.y + sample_time * v * math.sin(th),
        wrap_angle(th + sample_time * command.angular_velocity),
    )


def control_error(current, reference):
    """Planar distance between the vehicle and its reference (metres)."""
    return math.hypot(reference.x - current.x, reference.y - current.y)


class AgvStatus(enum.Enum):
    ACTIVE = "active"
    SUCCESSFUL = "successful"
    UNSTABLE = "unstable"


@dataclass(slots=True)
class AgvRecord:
    """Mutable per-AGV state owned by one simulation run.

    ``local_tick`` counts samples since arrival and indexes the reference
    track. ``applied_command`` is the command used in the most recent plant
    step.
    """

    id: int
    arrival_tick: int
    service_end_tick: int
    track: TrackSpec
    pose: Pose
    delta: int = 0
    last_command: ControlCommand | None = None
    applied_command: ControlCommand = ZERO_COMMAND
    error: float = 0.0
    status: AgvStatus = AgvStatus.ACTIVE
    local_tick: int = 0
    fading: object = None
    last_mcs: object = None
    extra: dict = field(default_factory=dict)


def apply_tick(agv, delivery_success, fresh_command, sample_time):
    """Advance one AGV by one sample.

    On success the fresh command is stored and the loss counter reset; on
    failure the counter increments and the last delivered command (or the
    zero command before any delivery) is held. The plant is then stepped
    and the tracking error refreshed. ``fresh_command`` is ignored, and may
    be ``None``, when the delivery failed. The record is updated in place
    and returned.
    """
    if agv.status is not AgvStatus.ACTIVE:
        raise ValueError(f"AGV {agv.id} is not active")
    if delivery_success:
        if fresh_command is None:
            raise ValueError("successful delivery needs a command")
        agv.last_command = fresh_command
        agv.delta = 0
    else:
        agv.delta += 1
    cmd = agv.last_command if agv.last_command is not None else ZERO_COMMAND
    agv.applied_command = cmd
    agv.pose = step_plant(agv.pose, cmd, sample_time)
    agv.local_tick += 1
    agv.error = control_error(agv.pose, reference_pose(agv.track, agv.local_tick, sample_time))
    return agv
