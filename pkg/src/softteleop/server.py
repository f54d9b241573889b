"""Teleoperation service: session state machine, broadcasts, transport.

One authoritative core task owns the plant, observer and controller and
runs at the sampling period; connection handlers only exchange protocol
messages with it.  The session moves through four states:

    0  connected, robot not configured
    1  configured, virtual robot placed freely
    2  locked; targets may be staged
    3  moving under PID until the 3 mm criterion or a stop

``handle_message`` is a pure transition function so the state machine
can be tested and fuzzed without any sockets; the asyncio layer wires
it to newline-JSON over TCP (default port 9000) and to a browser
WebSocket bridge speaking the identical protocol (default port 9001).
Exactly one connection (the first to lock) holds control authority;
everyone else watches the state broadcasts.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import math
from dataclasses import dataclass, replace

from .config import AppConfig, specs_to_wire, wire_to_specs
from .control import (
    ControlState,
    PidGains,
    TargetCommand,
    control_tick,
    target_in_box,
)
from .geometry import ModuleSpec, actuator_lengths
from .observer import Observer, SensorLineError, parse_command_line
from .plant import Plant
from .protocol import (
    Ack,
    Config,
    Error,
    Hello,
    Lock,
    Message,
    Move,
    ModuleState,
    State,
    Stop,
    Target,
    Unlock,
    Welcome,
    decode,
    encode,
)

log = logging.getLogger("softteleop.server")

DEFAULT_TCP_PORT = 9000
DEFAULT_WS_PORT = 9001


@dataclass(frozen=True)
class SessionState:
    """Protocol-visible state: fsm stage, active geometry, staged target."""

    fsm: int = 0
    specs: tuple[ModuleSpec, ...] = ()
    configured: bool = False
    pending_target: TargetCommand | None = None


# actions the transport layer must carry out after a transition
CONFIGURE = "configure"
START_MOVE = "start_move"
STOP_MOVE = "stop_move"

Transition = tuple[SessionState, list[Message], list[tuple]]


def _reject(session: SessionState, code: str, detail: str) -> Transition:
    return session, [Error(code=code, detail=detail)], []


def handle_message(session: SessionState, msg: Message) -> Transition:
    """Apply one client message; returns (state', replies, actions).

    Only the legal transitions mutate the state; anything out of order
    earns an error reply and leaves the session untouched, so a hostile
    or confused client can never corrupt the stage machine.
    """
    fsm = session.fsm

    if isinstance(msg, Hello):
        if fsm != 0:
            return _reject(session, "bad_state", f"hello not valid in state {fsm}")
        return session, [Welcome(robot_spec=specs_to_wire(session.specs))], []

    if isinstance(msg, Config):
        if fsm != 0:
            return _reject(session, "bad_state", f"config not valid in state {fsm}")
        try:
            specs = wire_to_specs(msg.robot_spec)
        except ValueError as exc:
            return _reject(session, "bad_spec", str(exc))
        new = replace(session, fsm=1, specs=specs, configured=True, pending_target=None)
        return new, [Ack(ref="config")], [(CONFIGURE, specs)]

    if isinstance(msg, Lock):
        if fsm != 1:
            return _reject(session, "bad_state", f"lock not valid in state {fsm}")
        return replace(session, fsm=2), [Ack(ref="lock")], []

    if isinstance(msg, Unlock):
        if fsm != 2:
            return _reject(session, "bad_state", f"unlock not valid in state {fsm}")
        return replace(session, fsm=1, pending_target=None), [Ack(ref="unlock")], []

    if isinstance(msg, Target):
        if fsm != 2:
            return _reject(session, "bad_state", f"target not valid in state {fsm}")
        cmd = TargetCommand(module_index=msg.module, target_mm=msg.pos_mm)
        if not target_in_box(session.specs, cmd):
            return _reject(session, "bad_target", "module index or position out of range")
        return replace(session, pending_target=cmd), [Ack(ref="target")], []

    if isinstance(msg, Move):
        if fsm != 2:
            return _reject(session, "bad_state", f"move not valid in state {fsm}")
        if session.pending_target is None:
            return _reject(session, "bad_state", "no target staged")
        new = replace(session, fsm=3)
        return new, [Ack(ref="move")], [(START_MOVE, session.pending_target)]

    if isinstance(msg, Stop):
        if fsm != 3:
            return _reject(session, "bad_state", f"stop not valid in state {fsm}")
        return replace(session, fsm=2), [Ack(ref="stop")], [(STOP_MOVE,)]

    # server-originated types bounced back by a client
    return _reject(session, "bad_state", f"unexpected message type {type(msg).__name__.lower()}")


def handle_convergence(session: SessionState) -> Transition:
    """Internal event: the moving platform reached the tolerance."""
    if session.fsm != 3:
        return session, [], []
    return replace(session, fsm=2), [Ack(ref="converged")], [(STOP_MOVE,)]


def broadcast_state(
    observer: Observer, fsm: int, seq: int, t_ms: float, stale: bool
) -> State:
    """Snapshot the observer into one state broadcast message."""
    if observer.last_readings is None:
        modules = tuple(
            ModuleState(
                phi_deg=0.0, theta_deg=0.0, h_mm=0.0,
                lengths_mm=tuple(0.0 for _ in range(spec.actuator_count)),
            )
            for spec in observer.specs
        )
        return State(
            seq=seq, t_ms=t_ms, fsm=fsm, modules=modules,
            ee_mm=(0.0, 0.0, 0.0), stale=True,
        )
    pose = observer.estimate()
    modules = tuple(
        ModuleState(
            phi_deg=math.degrees(r.phi_rad),
            theta_deg=math.degrees(r.theta_rad),
            h_mm=r.h_mm,
            lengths_mm=tuple(float(v) for v in actuator_lengths(spec, r)),
        )
        for spec, r in zip(observer.specs, observer.last_readings)
    )
    return State(
        seq=seq, t_ms=t_ms, fsm=fsm, modules=modules,
        ee_mm=tuple(float(v) for v in pose.end_effector), stale=stale,
    )


class _Conn:
    """One client connection, transport-agnostic line sink."""

    _next_id = 0

    def __init__(self, send_line, peer: str):
        _Conn._next_id += 1
        self.id = _Conn._next_id
        self.peer = peer
        self.seq = 0
        self._send_line = send_line
        self.alive = True

    def send(self, msg: Message) -> None:
        if not self.alive:
            return
        try:
            self._send_line(encode(msg))
        except Exception:
            self.alive = False

    def next_seq(self) -> int:
        self.seq += 1
        return self.seq


class TeleopServer:
    """Asyncio teleoperation service around one plant and one observer."""

    def __init__(self, config: AppConfig, plant: Plant | None = None,
                 plant_addr: str | None = None):
        self.config = config
        self.period_ms = config.control.period_ms
        self.plant_addr = plant_addr
        self.plant = plant
        if self.plant is None and plant_addr is None:
            self.plant = Plant(
                config.modules, config.plant_mode, config.noise, config.initial_h_mm
            )
        self.observer = Observer(config.modules)
        self.session = SessionState(fsm=0, specs=tuple(config.modules))
        self.gains = PidGains(
            kp=config.control.kp, ki=config.control.ki,
            kd=config.control.kd, i_max_mm=config.control.i_max_mm,
        )
        self.ctrl = ControlState(
            tol_mm=config.control.tol_mm, timeout_ms=config.control.timeout_ms
        )
        self.conns: dict[int, _Conn] = {}
        self.authority: int | None = None
        self.move_target: TargetCommand | None = None
        self.move_deadline_ms: float | None = None
        self._pending_cmd: list[float] | None = None
        self._stop = asyncio.Event()
        self._tcp_server = None
        self._ws_server = None
        self._tasks: list[asyncio.Task] = []
        # remote plant stream state
        self._remote_writer: asyncio.StreamWriter | None = None
        self._remote_line: str | None = None
        self._last_frame_wall: float | None = None

    # ---- lifecycle -------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = DEFAULT_TCP_PORT,
                    ws_port: int | None = DEFAULT_WS_PORT) -> None:
        """Bind the listeners and launch the core loop."""
        try:
            self._tcp_server = await asyncio.start_server(
                self._handle_tcp, host, port, limit=70 * 1024
            )
        except OSError as exc:
            raise RuntimeError(f"cannot bind tcp {host}:{port}: {exc}") from exc
        if ws_port is not None:
            import websockets

            try:
                self._ws_server = await websockets.serve(
                    self._handle_ws, host, ws_port, max_size=70 * 1024
                )
            except OSError as exc:
                self._tcp_server.close()
                raise RuntimeError(f"cannot bind ws {host}:{ws_port}: {exc}") from exc
        self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        self.ws_port = (
            self._ws_server.sockets[0].getsockname()[1]
            if self._ws_server is not None else None
        )
        if self.plant_addr is not None:
            self._tasks.append(asyncio.create_task(self._remote_plant_reader()))
        self._tasks.append(asyncio.create_task(self._core_loop()))
        log.info("serving tcp on %s:%s ws on %s", host, self.tcp_port, self.ws_port)

    async def stop(self) -> None:
        """Flush one final broadcast, then close everything."""
        self._stop.set()
        for task in self._tasks:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
        self._broadcast(final=True)
        for conn in list(self.conns.values()):
            conn.alive = False
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        if self._remote_writer is not None:
            self._remote_writer.close()

    async def run_until_stopped(self) -> None:
        await self._stop.wait()

    # ---- core loop -------------------------------------------------

    def _now_ms(self) -> float:
        if self.plant is not None:
            return self.plant.time_ms
        return asyncio.get_event_loop().time() * 1000.0

    def _tick_plant(self) -> str | None:
        """Advance an in-process plant, or poll the remote stream."""
        if self.plant is not None:
            self.plant.step(self.period_ms, self._pending_cmd)
            self._pending_cmd = None
            return self.plant.read_sensors()
        line, self._remote_line = self._remote_line, None
        return line

    def _is_stale(self) -> bool:
        if self.plant is not None:
            return self.observer.last_readings is None
        if self._last_frame_wall is None:
            return True
        gap = asyncio.get_event_loop().time() - self._last_frame_wall
        return gap > 5 * self.period_ms / 1000.0

    async def _core_loop(self) -> None:
        loop = asyncio.get_event_loop()
        period_s = self.period_ms / 1000.0
        next_t = loop.time() + period_s
        while not self._stop.is_set():
            self._tick_once()
            delay = next_t - loop.time()
            next_t += period_s
            if delay > 0:
                await asyncio.sleep(delay)

    def _tick_once(self) -> None:
        line = self._tick_plant()
        if line is not None:
            try:
                self.observer.ingest_line(line)
                if self.plant is None:
                    self._last_frame_wall = asyncio.get_event_loop().time()
            except (SensorLineError, ValueError) as exc:
                log.warning("dropping sensor line: %s", exc)
        stale = self._is_stale()
        if self.session.fsm == 3 and self.move_target is not None and not stale:
            self._control_step()
        self._broadcast(stale=stale)

    def _control_step(self) -> None:
        target = self.move_target
        pose = self.observer.estimate()
        position = pose.modules[target.module_index].top_center
        self.ctrl, flat, err_norm, _ = control_tick(
            list(self.session.specs), self.ctrl, self.gains, target,
            position, self.observer.last_readings, self.period_ms,
        )
        if flat is None:
            self.session, replies, actions = handle_convergence(self.session)
            self._apply_actions(actions)
            auth = self.conns.get(self.authority) if self.authority else None
            for reply in replies:
                if auth is not None:
                    auth.send(reply)
        else:
            self._send_plant_command(flat)
            if (
                self.move_deadline_ms is not None
                and self._now_ms() >= self.move_deadline_ms
            ):
                log.warning("move timed out at error %.2f mm, aborting", err_norm)
                self.session = replace(self.session, fsm=2)
                self.move_target = None
                self.move_deadline_ms = None
                auth = self.conns.get(self.authority) if self.authority else None
                if auth is not None:
                    auth.send(Error(code="timeout", detail="move did not converge"))

    def _send_plant_command(self, flat: list[float]) -> None:
        if self.plant is not None:
            self._pending_cmd = flat
        elif self._remote_writer is not None:
            from .observer import format_command_line

            try:
                self._remote_writer.write(format_command_line(flat).encode())
            except Exception as exc:
                log.warning("plant command failed: %s", exc)

    def _broadcast(self, stale: bool | None = None, final: bool = False) -> None:
        if stale is None:
            stale = self._is_stale()
        t_ms = self._now_ms()
        base = broadcast_state(self.observer, self.session.fsm, 0, t_ms, stale)
        for conn in list(self.conns.values()):
            if not conn.alive:
                self.conns.pop(conn.id, None)
                continue
            conn.send(replace(base, seq=conn.next_seq()))

    # ---- message dispatch -------------------------------------------

    _CONTROL_TYPES = (Config, Lock, Unlock, Target, Move, Stop)

    def _dispatch_line(self, conn: _Conn, raw: str) -> None:
        raw = raw.strip()
        if not raw:
            return
        try:
            msg = decode(raw)
        except Exception as exc:
            code = getattr(exc, "code", "bad_message")
            detail = getattr(exc, "detail", str(exc))
            conn.send(Error(code=code, detail=detail))
            return
        if isinstance(msg, Hello):
            # connection-level greeting: late joiners still get the geometry
            conn.send(Welcome(robot_spec=specs_to_wire(self.session.specs)))
            return
        if isinstance(msg, self._CONTROL_TYPES):
            if self.authority is not None and self.authority != conn.id:
                conn.send(Error(code="not_authorized", detail="another client holds control"))
                return
        new_session, replies, actions = handle_message(self.session, msg)
        accepted = not any(isinstance(r, Error) for r in replies)
        if accepted:
            self.session = new_session
            self._apply_actions(actions)
            if isinstance(msg, Lock):
                self.authority = conn.id
            elif isinstance(msg, Unlock):
                self.authority = None
            elif (
                isinstance(msg, self._CONTROL_TYPES)
                and self.authority is None
                and self.session.fsm >= 2
            ):
                self.authority = conn.id
        for reply in replies:
            conn.send(reply)

    def _apply_actions(self, actions: list[tuple]) -> None:
        for action in actions:
            kind = action[0]
            if kind == CONFIGURE:
                self._reconfigure(list(action[1]))
            elif kind == START_MOVE:
                self.move_target = action[1]
                self.ctrl = ControlState(
                    tol_mm=self.config.control.tol_mm,
                    timeout_ms=self.config.control.timeout_ms,
                )
                self.ctrl.active = True
                self.move_deadline_ms = self._now_ms() + self.ctrl.timeout_ms
            elif kind == STOP_MOVE:
                self.move_target = None
                self.move_deadline_ms = None
                self.ctrl.active = False

    def _reconfigure(self, specs: list[ModuleSpec]) -> None:
        """Adopt new geometry; an in-process sim plant is rebuilt to match."""
        self.config.modules = specs
        self.observer = Observer(specs)
        if self.plant is not None:
            self.plant = Plant(
                specs, self.config.plant_mode, self.config.noise,
                self.config.initial_h_mm,
            )
        self.move_target = None
        self.move_deadline_ms = None

    # ---- transports --------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter) -> None:
        peer = str(writer.get_extra_info("peername"))

        def send_line(text: str) -> None:
            writer.write(text.encode() + b"\n")

        conn = _Conn(send_line, peer)
        self.conns[conn.id] = conn
        log.info("tcp client %s connected as #%d", peer, conn.id)
        try:
            while not self._stop.is_set():
                try:
                    line = await reader.readline()
                except (ValueError, asyncio.LimitOverrunError):
                    conn.send(Error(code="bad_message", detail="line exceeds 64 KiB"))
                    break
                if not line:
                    break
                self._dispatch_line(conn, line.decode("utf-8", errors="replace"))
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            self._drop_conn(conn)
            with contextlib.suppress(Exception):
                writer.close()

    async def _handle_ws(self, websocket) -> None:
        queue: asyncio.Queue[str] = asyncio.Queue()

        def send_line(text: str) -> None:
            queue.put_nowait(text)

        conn = _Conn(send_line, str(websocket.remote_address))
        self.conns[conn.id] = conn

        async def sender():
            while True:
                await websocket.send(await queue.get())

        task = asyncio.create_task(sender())
        try:
            async for raw in websocket:
                if isinstance(raw, bytes):
                    raw = raw.decode("utf-8", errors="replace")
                for piece in raw.splitlines():
                    self._dispatch_line(conn, piece)
        except Exception:
            pass
        finally:
            task.cancel()
            self._drop_conn(conn)

    def _drop_conn(self, conn: _Conn) -> None:
        conn.alive = False
        self.conns.pop(conn.id, None)
        if conn.id == self.authority:
            self.authority = None
            # safety: a vanished operator must not leave the robot moving,
            # and the next authority must stage its own target
            new_fsm = 2 if self.session.fsm == 3 else self.session.fsm
            self.session = replace(self.session, fsm=new_fsm, pending_target=None)
            self.move_target = None
            self.move_deadline_ms = None
        log.info("client #%d disconnected", conn.id)

    # ---- remote plant -----------------------------------------------

    async def _remote_plant_reader(self) -> None:
        host, _, port = self.plant_addr.rpartition(":")
        try:
            reader, writer = await asyncio.open_connection(host or "127.0.0.1", int(port))
            self._remote_writer = writer
            while not self._stop.is_set():
                line = await reader.readline()
                if not line:
                    break
                self._remote_line = line.decode("utf-8", errors="replace")
        except (OSError, asyncio.CancelledError) as exc:
            if not isinstance(exc, asyncio.CancelledError):
                log.error("plant link lost: %s", exc)


async def serve(config: AppConfig, host: str = "127.0.0.1",
                port: int = DEFAULT_TCP_PORT, ws_port: int | None = DEFAULT_WS_PORT,
                plant: str = "sim") -> TeleopServer:
    """Construct and start a server; ``plant`` is "sim" or "tcp:<host:port>"."""
    if plant == "sim":
        server = TeleopServer(config)
    elif plant.startswith("tcp:"):
        server = TeleopServer(config, plant_addr=plant[4:])
    else:
        raise ValueError(f"plant must be 'sim' or 'tcp:<addr>', got {plant!r}")
    await server.start(host, port, ws_port)
    return server


async def run_sim(config: AppConfig, host: str = "127.0.0.1", port: int = 9100,
                  stop_event: asyncio.Event | None = None) -> None:
    """Standalone plant simulator speaking sensor/command lines over TCP."""
    plant = Plant(config.modules, config.plant_mode, config.noise, config.initial_h_mm)
    stop = stop_event or asyncio.Event()
    clients: set[asyncio.StreamWriter] = set()
    pending: list[list[float] | None] = [None]

    async def handle(reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        clients.add(writer)
        try:
            while not stop.is_set():
                line = await reader.readline()
                if not line:
                    break
                try:
                    pending[0] = parse_command_line(line.decode("utf-8", errors="replace"))
                except SensorLineError as exc:
                    log.warning("bad command line: %s", exc)
        finally:
            clients.discard(writer)
            with contextlib.suppress(Exception):
                writer.close()

    server = await asyncio.start_server(handle, host, port, limit=70 * 1024)
    log.info("plant sim listening on %s:%s", host, port)
    period_s = config.control.period_ms / 1000.0
    loop = asyncio.get_event_loop()
    next_t = loop.time() + period_s
    try:
        while not stop.is_set():
            plant.step(config.control.period_ms, pending[0])
            pending[0] = None
            line = plant.read_sensors().encode()
            for writer in list(clients):
                try:
                    writer.write(line)
                except Exception:
                    clients.discard(writer)
            delay = next_t - loop.time()
            next_t += period_s
            if delay > 0:
                await asyncio.sleep(delay)
    finally:
        server.close()
        await server.wait_closed()
