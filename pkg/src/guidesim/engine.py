"""Deterministic simulation loop: sense, map, plan, move, narrate, record.

One owner advances the simulation tick by tick at a fixed rate; inbound
commands cross a queue and are applied at tick boundaries, so a (world,
config, command script) triple fully determines every emitted byte. Module
errors surface as paused/idle states plus logged events, never crashes.

Narration runs on a moving-time clock: the gap to the next description is
drawn from the configured bounds (quantized to whole ticks so gaps land
exactly inside them) and only counts down while the robot is navigating.
"""

from __future__ import annotations

import hashlib
import math
import random
import shlex
from collections import deque
from dataclasses import dataclass, field, replace

from . import session as sess
from .gridworld import (CostMap, Pose, SensorConfig, World, WORLD_FREE,
                        WORLD_OCCUPIED, inflate, load_world, reveal,
                        visible_pois)
from .interaction import (Button, ButtonEvent, Direction, DirectionSpec,
                          InteractionState, Intent, LevelChanged, Mode,
                          ModeKind, PauseRobot, Press, QnA, RequestDirection,
                          ResumeRobot, SpeedChanged, TakeMeThere,
                          answer_question, classify_intent, handle_direction,
                          is_ending_phrase, press)
from .narrator import DescriptionLevel, NarrationSchedule
from .planner import (MotionState, MotionStatus, PauseReason, Path,
                      Unreachable, plan_path, step_motion)
from .providers import ProviderUnavailable, TemplateDescriptionProvider
from .semantic_map import (EmptyStore, SemanticStore, TargetKind,
                           UnresolvedTarget)
from .session import EventLog, SessionEvent
from .waypoints import ClusterParams, NoCandidates, detect_waypoints, select_waypoint


@dataclass(frozen=True)
class SimConfig:
    tick_hz: int = 10
    seed: int = 0
    sensor: SensorConfig = field(default_factory=SensorConfig)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    speed_default: float = 0.5
    level_default: DescriptionLevel = DescriptionLevel.BALANCED
    stop_dist: float = 0.7
    arrival_tol: float = 0.3
    forward_cone_half_angle: float = math.radians(45.0)
    inflation_radius: float = 0.3
    visited_radius: float = 1.0
    blocked_replan_after: float = 5.0
    narration_gap: tuple[float, float] = (5.0, 10.0)
    description_provider: object | None = None  # None selects the template provider

    def __post_init__(self):
        if self.tick_hz <= 0:
            raise ValueError("tick_hz must be > 0")


# inbound commands (wire-level mirror of the handle and voice interface)
@dataclass(frozen=True)
class ButtonCommand:
    event: ButtonEvent


@dataclass(frozen=True)
class UtteranceCommand:
    text: str


@dataclass(frozen=True)
class HoldCommand:
    on: bool


@dataclass(frozen=True)
class ObstacleCommand:
    x: float
    y: float
    lifetime: float


@dataclass(frozen=True)
class ShutdownCommand:
    pass


Command = (ButtonCommand | UtteranceCommand | HoldCommand
           | ObstacleCommand | ShutdownCommand)


class ScriptError(ValueError):
    pass


def parse_script(text: str) -> list[tuple[float, Command]]:
    """Parse the line-delimited command script format.

    Lines: ``t=<s> button <name> <short|long>`` / ``t=<s> say "<text>"`` /
    ``t=<s> hold <on|off>`` / ``t=<s> obstacle <x> <y> <lifetime_s>`` /
    ``t=<s> shutdown``. Blank lines and ``#`` comments are skipped.
    """
    out: list[tuple[float, Command]] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            parts = shlex.split(line)
            if not parts[0].startswith("t="):
                raise ScriptError("line must start with t=<seconds>")
            t = float(parts[0][2:])
            verb = parts[1]
            if verb == "button":
                ev = ButtonEvent(Button(parts[2]),
                                 Press(parts[3]) if len(parts) > 3 else Press.SHORT)
                out.append((t, ButtonCommand(ev)))
            elif verb == "say":
                out.append((t, UtteranceCommand(parts[2])))
            elif verb == "hold":
                out.append((t, HoldCommand(parts[2] == "on")))
            elif verb == "obstacle":
                out.append((t, ObstacleCommand(float(parts[2]), float(parts[3]),
                                               float(parts[4]))))
            elif verb == "shutdown":
                out.append((t, ShutdownCommand()))
            else:
                raise ScriptError(f"unknown command {verb!r}")
        except ScriptError:
            raise
        except Exception as e:
            raise ScriptError(f"script line {ln}: {e}") from e
    out.sort(key=lambda item: item[0])
    return out


class Simulation:
    """Owns all mutable state; only tick() advances it."""

    def __init__(self, world: World, config: SimConfig = SimConfig()):
        self.world = world
        self.config = config
        self.costmap = CostMap.for_world(world)
        self.interaction = InteractionState(
            speed=config.speed_default, level=config.level_default,
            hold=True, initial_heading=world.start_pose.heading)
        self.motion = MotionState(pose=world.start_pose,
                                  speed=config.speed_default, hold=True)
        self.path: Path | None = None
        self.goal: tuple[float, float] | None = None
        self.visited: list[tuple[float, float]] = []
        self.store = SemanticStore()
        self.log = EventLog()
        self.tick_index = 0
        self._queue: deque[Command] = deque()
        self._obstacles: list[tuple[int, int, float]] = []
        self._blocked_since: float | None = None
        self._shutdown = False
        self._provider = config.description_provider or TemplateDescriptionProvider()
        self._template = TemplateDescriptionProvider()
        self._gap_rng = random.Random(config.seed ^ 0x6A11)
        self._moving_ticks = 0
        self._last_emit_tick = 0
        self._due_ticks = self._draw_gap_ticks()
        self._emissions = 0
        self._conversation_sightings = None
        self._poi_tokens = set()
        for poi in world.pois:
            self._poi_tokens |= {w.lower() for w in poi.name.split() if len(w) > 2}
        t0 = 0.0
        self._log(t0, sess.MODE_ENTER, mode="auto")
        self._log(t0, sess.LEVEL_CHANGED, level=config.level_default.value)

    # -- plumbing ---------------------------------------------------------

    @property
    def dt(self) -> float:
        return 1.0 / self.config.tick_hz

    @property
    def now(self) -> float:
        return self.tick_index / self.config.tick_hz

    @property
    def shutdown_requested(self) -> bool:
        return self._shutdown

    @property
    def narration_schedule(self) -> NarrationSchedule:
        hz = self.config.tick_hz
        prev = self._last_emit_tick / hz
        return NarrationSchedule(prev_end=prev,
                                 next_due=prev + self._due_ticks / hz,
                                 gap_bounds=self.config.narration_gap,
                                 rng_seed=self.config.seed)

    def submit(self, cmd: Command) -> None:
        self._queue.append(cmd)

    def _log(self, t: float, kind: str, **data) -> None:
        self.log.append(SessionEvent(t=t, kind=kind, data=data))

    def _draw_gap_ticks(self) -> int:
        lo, hi = self.config.narration_gap
        u = self._gap_rng.uniform(lo, hi)
        hz = self.config.tick_hz
        return min(int(math.ceil(u * hz)), int(round(hi * hz)))

    def state_hash(self) -> str:
        h = hashlib.sha256()
        st = self.interaction
        parts = [
            repr((self.motion.pose.x, self.motion.pose.y, self.motion.pose.heading)),
            st.mode.kind.value, str(st.mode.prior), repr(st.speed),
            st.level.value, str(st.hold), self.motion.status.value,
            str(self.motion.pause_reason), repr(self.goal),
            str(self.costmap.revision), str(self.tick_index),
            str(len(self.store)), str(self._emissions),
        ]
        h.update("|".join(parts).encode())
        h.update(self.costmap.state.tobytes())
        h.update(self.costmap.cost.tobytes())
        return h.hexdigest()

    def snapshot(self) -> dict:
        """Immutable view of the user-facing state for the gateway."""
        st = self.interaction
        return {
            "t": self.now,
            "pose": {"x": self.motion.pose.x, "y": self.motion.pose.y,
                     "heading": self.motion.pose.heading},
            "mode": st.mode.kind.value,
            "prior_mode": st.mode.prior.value if st.mode.prior else None,
            "speed": st.speed,
            "level": st.level.value,
            "hold": st.hold,
            "status": self.motion.status.value,
            "pause_reason": (self.motion.pause_reason.value
                             if self.motion.pause_reason else None),
            "goal": ({"x": self.goal[0], "y": self.goal[1]}
                     if self.goal else None),
            "revision": self.costmap.revision,
        }

    # -- command handling -------------------------------------------------

    def _set_path(self, path: Path, goal: tuple[float, float],
                  t: float, source: str, **extra) -> None:
        self.path = path
        self.goal = goal
        self.motion = replace(self.motion, progress=0.0)
        self._blocked_since = None
        self._log(t, sess.GOAL_SET, x=goal[0], y=goal[1], source=source, **extra)

    def _try_goal(self, target: tuple[float, float], t: float,
                  source: str, **extra) -> bool:
        try:
            path = plan_path(self.costmap, (self.motion.pose.x, self.motion.pose.y),
                             target)
        except (Unreachable, ValueError) as e:
            self._log(t, sess.NOTICE, note="goal_unreachable", detail=str(e))
            return False
        self._set_path(path, target, t, source, **extra)
        return True

    def _enter_conversation_pause(self, t: float) -> None:
        self._conversation_sightings = visible_pois(
            self.world, self.motion.pose, self.config.sensor)
        self.motion = replace(self.motion, status=MotionStatus.PAUSED,
                              pause_reason=PauseReason.CONVERSATION_ACTIVE)
        self._log(t, sess.PAUSED, reason=PauseReason.CONVERSATION_ACTIVE.value)

    def _exit_conversation_pause(self, t: float) -> None:
        self._conversation_sightings = None
        status = MotionStatus.NAVIGATING if self.path else MotionStatus.IDLE
        self.motion = replace(self.motion, status=status, pause_reason=None)
        self._log(t, sess.RESUMED)

    def _apply_mode_change(self, old: Mode, new: Mode, t: float) -> None:
        if old == new:
            return
        self._log(t, sess.MODE_EXIT, mode=old.kind.value)
        self._log(t, sess.MODE_ENTER, mode=new.kind.value)

    def _handle_button(self, ev: ButtonEvent, t: float) -> None:
        self._log(t, sess.BUTTON_PRESS, button=ev.button.value, press=ev.press.value)
        old_mode = self.interaction.mode
        new_state, effects = press(self.interaction, ev)
        self.interaction = new_state
        self._apply_mode_change(old_mode, new_state.mode, t)
        for eff in effects:
            if isinstance(eff, PauseRobot):
                self._enter_conversation_pause(t)
            elif isinstance(eff, ResumeRobot):
                self._exit_conversation_pause(t)
            elif isinstance(eff, SpeedChanged):
                self.motion = replace(self.motion, speed=eff.speed)
                self._log(t, sess.SPEED_CHANGED, speed=eff.speed)
            elif isinstance(eff, LevelChanged):
                self._log(t, sess.LEVEL_CHANGED, level=eff.level.value)
            elif isinstance(eff, RequestDirection):
                self._handle_direction_request(eff.direction, t)

    def _handle_direction_request(self, direction: Direction, t: float) -> None:
        try:
            cands = detect_waypoints(self.costmap, self.motion.pose,
                                     self.config.cluster,
                                     self.interaction.initial_heading)
        except NoCandidates:
            cands = []
        chosen = handle_direction(direction, cands, self.motion.pose)
        if chosen is None:
            self._log(t, sess.NOTICE, note="no_navigable_direction",
                      direction=direction.value)
            return
        self._try_goal(chosen.position, t, source="direction",
                       direction=direction.value)

    def _classify_query(self, intent: Intent, text: str) -> str:
        if isinstance(intent, (TakeMeThere, DirectionSpec)):
            return "command"
        words = {w.lower().strip(".,!?") for w in text.split()}
        return "specific" if words & self._poi_tokens else "general"

    def _handle_utterance(self, text: str, t: float) -> None:
        if self.interaction.mode.kind is not ModeKind.CONVERSATION:
            self._log(t, sess.NOTICE, note="utterance_outside_conversation")
            return
        if is_ending_phrase(text):
            old = self.interaction.mode
            self.interaction = replace(self.interaction, mode=Mode(old.prior))
            self._apply_mode_change(old, self.interaction.mode, t)
            self._exit_conversation_pause(t)
            return
        intent = classify_intent(text)
        self._log(t, sess.QUERY, **{"class": self._classify_query(intent, text)},
                  text=text)
        if isinstance(intent, TakeMeThere):
            self._log(t, sess.INTENT, intent="take_me_there",
                      target=intent.target.kind.value, name=intent.target.name)
            try:
                result = self.store.retrieve(intent.target, self.world.start_pose)
            except EmptyStore:
                self._log(t, sess.NOTICE, note="nothing_recorded_yet")
                return
            source = ("initial" if intent.target.kind is TargetKind.INITIAL
                      else "record")
            extra = {} if result.record_id is None else {"record_id": result.record_id}
            self._try_goal((result.pose.x, result.pose.y), t, source=source, **extra)
        elif isinstance(intent, DirectionSpec):
            self._log(t, sess.INTENT, intent="direction",
                      direction=intent.direction.value)
            self._handle_direction_request(intent.direction, t)
        else:
            self._log(t, sess.INTENT, intent="qna")
            sightings = self._conversation_sightings
            if sightings is None:
                sightings = visible_pois(self.world, self.motion.pose,
                                         self.config.sensor)
            answer = answer_question(text, sightings, self.world)
            self._log(t, sess.ANSWER, text=answer)

    def _handle_obstacle(self, cmd: ObstacleCommand, t: float) -> None:
        r, c = self.world.cell_at(cmd.x, cmd.y)
        robot_cell = self.world.cell_at(self.motion.pose.x, self.motion.pose.y)
        if not self.world.in_bounds(r, c) or (r, c) == robot_cell:
            self._log(t, sess.NOTICE, note="obstacle_rejected", x=cmd.x, y=cmd.y)
            return
        if self.world.grid[r, c] == WORLD_FREE:
            self.world.grid[r, c] = WORLD_OCCUPIED
            self._obstacles.append((r, c, t + cmd.lifetime))
            self._log(t, sess.OBSTACLE, x=cmd.x, y=cmd.y, lifetime=cmd.lifetime)

    def _drain_commands(self, t: float) -> None:
        while self._queue:
            cmd = self._queue.popleft()
            if isinstance(cmd, ButtonCommand):
                self._handle_button(cmd.event, t)
            elif isinstance(cmd, UtteranceCommand):
                self._handle_utterance(cmd.text, t)
            elif isinstance(cmd, HoldCommand):
                self.interaction = replace(self.interaction, hold=cmd.on)
                self.motion = replace(self.motion, hold=cmd.on)
                self._log(t, sess.NOTICE, note="hold", on=cmd.on)
            elif isinstance(cmd, ObstacleCommand):
                self._handle_obstacle(cmd, t)
            elif isinstance(cmd, ShutdownCommand):
                self._shutdown = True

    # -- per-tick pipeline --------------------------------------------------

    def _expire_obstacles(self, t: float) -> None:
        keep = []
        for r, c, expiry in self._obstacles:
            if t >= expiry:
                self.world.grid[r, c] = WORLD_FREE
            else:
                keep.append((r, c, expiry))
        self._obstacles = keep

    def _sense(self) -> None:
        rev = self.costmap.revision
        reveal(self.world, self.motion.pose, self.config.sensor, self.costmap)
        if self.costmap.revision != rev:
            inflate(self.costmap, self.config.inflation_radius)

    def _goal_invalidated(self) -> bool:
        if self.path is None:
            return False
        r, c = self.costmap.cell_at(*self.path.goal)
        from .kernels import OCCUPIED
        return bool(self.costmap.state[r, c] == OCCUPIED)

    def _auto_select_goal(self, t: float) -> None:
        try:
            cands = detect_waypoints(self.costmap, self.motion.pose,
                                     self.config.cluster,
                                     self.interaction.initial_heading)
        except NoCandidates:
            return
        pool = list(cands)
        while pool:
            chosen = select_waypoint(
                pool, self.motion.pose, self.interaction.initial_heading,
                self.visited, self.config.forward_cone_half_angle,
                self.config.visited_radius)
            try:
                path = plan_path(self.costmap,
                                 (self.motion.pose.x, self.motion.pose.y),
                                 chosen.position)
            except (Unreachable, ValueError):
                pool.remove(chosen)
                continue
            self._set_path(path, chosen.position, t, source="waypoint",
                           waypoint_source=chosen.source.value)
            return

    def _maintain_goal(self, t: float) -> None:
        conversing = self.interaction.mode.kind is ModeKind.CONVERSATION
        if self.motion.status is MotionStatus.ARRIVED and self.path is not None:
            self._log(t, sess.ARRIVED, x=self.path.goal[0], y=self.path.goal[1])
            self.visited.append(self.path.goal)
            self.path = None
            self.goal = None
            self.motion = replace(self.motion, status=MotionStatus.IDLE, progress=0.0)
        if self._goal_invalidated():
            self._log(t, sess.NOTICE, note="goal_blocked")
            self.path = None
            self.goal = None
        if (self.motion.status is MotionStatus.PAUSED
                and self.motion.pause_reason is PauseReason.OBSTACLE_AHEAD):
            if self._blocked_since is None:
                self._blocked_since = t
            elif t - self._blocked_since > self.config.blocked_replan_after:
                self._blocked_since = None
                goal = self.path.goal if self.path else None
                self.path = None
                if goal is not None and not self._try_goal(goal, t, source="replan"):
                    self.goal = None  # drop; auto mode picks a fresh waypoint
        else:
            self._blocked_since = None
        if (self.path is None and not conversing
                and self.interaction.mode.kind is ModeKind.AUTO):
            self._auto_select_goal(t)

    def _step_motion(self, t: float) -> None:
        prev = self.motion
        self.motion = step_motion(self.motion, self.path, self.dt, self.costmap,
                                  self.config.stop_dist, self.config.arrival_tol)
        if (self.motion.status is MotionStatus.PAUSED
                and prev.status is not MotionStatus.PAUSED):
            self._log(t, sess.PAUSED, reason=self.motion.pause_reason.value)
        elif (prev.status is MotionStatus.PAUSED
              and self.motion.status in (MotionStatus.NAVIGATING,
                                         MotionStatus.ARRIVED)):
            self._log(t, sess.RESUMED)

    def _narrate(self, t: float) -> None:
        if self.motion.status is not MotionStatus.NAVIGATING:
            return
        if self.interaction.mode.kind not in (ModeKind.AUTO, ModeKind.MANUAL):
            return
        self._moving_ticks += 1
        if self._moving_ticks - self._last_emit_tick < self._due_ticks:
            return
        sightings = visible_pois(self.world, self.motion.pose, self.config.sensor)
        seed = self.config.seed * 1000003 + self._emissions
        try:
            desc = self._provider.describe(sightings, self.interaction.level,
                                           seed, self.motion.pose, t)
        except ProviderUnavailable:
            desc = self._template.describe(sightings, self.interaction.level,
                                           seed, self.motion.pose, t)
        self._log(t, sess.DESCRIPTION, level=desc.level.value, text=desc.text,
                  x=self.motion.pose.x, y=self.motion.pose.y,
                  heading=self.motion.pose.heading)
        self.store.record(self.motion.pose, desc, sightings, timestamp=t)
        self._emissions += 1
        self._last_emit_tick = self._moving_ticks
        self._due_ticks = self._draw_gap_ticks()

    def tick(self) -> None:
        """Advance the simulation by one tick."""
        t = self.now
        self._drain_commands(t)
        self._expire_obstacles(t)
        self._sense()
        self._maintain_goal(t)
        self._step_motion(t)
        self._narrate(t)
        self.tick_index += 1

    def run(self, ticks: int) -> None:
        for _ in range(ticks):
            if self._shutdown:
                break
            self.tick()


@dataclass
class ScenarioResult:
    sim: Simulation
    log_text: str
    report_text: str
    state_hash: str
    duration: float


def run_scenario(world: World, config: SimConfig, script_text: str,
                 duration: float | None = None) -> ScenarioResult:
    """Run a scripted session to its end (or Shutdown) and analyze the log.

    Commands are delivered at the first tick at or after their script time.
    Default duration: last scripted time plus 10 seconds (minimum 30 s).
    """
    script = parse_script(script_text)
    if duration is None:
        last = script[-1][0] if script else 0.0
        duration = max(last + 10.0, 30.0)
    sim = Simulation(world, config)
    hz = config.tick_hz
    total_ticks = int(round(duration * hz))
    idx = 0
    for _ in range(total_ticks):
        if sim.shutdown_requested:
            break
        while idx < len(script) and script[idx][0] <= sim.now + 1e-9:
            sim.submit(script[idx][1])
            idx += 1
        sim.tick()
    elapsed = sim.now
    return ScenarioResult(
        sim=sim,
        log_text=sim.log.to_text(),
        report_text=sess.render_reports(sim.log, elapsed),
        state_hash=sim.state_hash(),
        duration=elapsed,
    )


def run_scenario_files(world_path: str, poi_path: str | None,
                       config: SimConfig, script_path: str | None,
                       duration: float | None = None) -> ScenarioResult:
    with open(world_path, encoding="utf-8") as f:
        map_text = f.read()
    poi_doc = ""
    if poi_path:
        with open(poi_path, encoding="utf-8") as f:
            poi_doc = f.read()
    script_text = ""
    if script_path:
        with open(script_path, encoding="utf-8") as f:
            script_text = f.read()
    world = load_world(map_text, poi_doc)
    return run_scenario(world, config, script_text, duration)
