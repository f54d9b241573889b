"""Newline-delimited JSON protocol between cockpit and motion service.

Every message is one JSON object on one line with a ``type`` tag.
Numbers on the wire are degrees and millimetres, quantized to at most 4
fractional digits at encode time; ``decode(encode(m)) == m`` holds for
any message whose numeric payloads are already quantized.  Decoding is
total: anything malformed raises ProtocolError with code
``bad_message`` instead of leaking a parser exception.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Union

MAX_LINE_BYTES = 64 * 1024
PROTOCOL_VERSION = 1


class ProtocolError(ValueError):
    """Decoding or validation failure; carries the wire error code."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class ModuleSpecWire:
    """One module's geometry as carried in config/welcome payloads."""

    actuators: int = 3
    radius_mm: float = 15.0
    plate_offset_mm: float = 5.0
    min_len_mm: float = 30.0
    max_len_mm: float = 60.0
    tilt_limit_deg: float = 10.0


@dataclass(frozen=True)
class Hello:
    version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Welcome:
    robot_spec: tuple[ModuleSpecWire, ...]


@dataclass(frozen=True)
class Config:
    robot_spec: tuple[ModuleSpecWire, ...]


@dataclass(frozen=True)
class Lock:
    pass


@dataclass(frozen=True)
class Unlock:
    pass


@dataclass(frozen=True)
class Target:
    module: int
    pos_mm: tuple[float, float, float]


@dataclass(frozen=True)
class Move:
    pass


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class ModuleState:
    """Broadcast state of one module: filtered readings plus lengths."""

    phi_deg: float
    theta_deg: float
    h_mm: float
    lengths_mm: tuple[float, ...]


@dataclass(frozen=True)
class State:
    seq: int
    t_ms: float
    fsm: int
    modules: tuple[ModuleState, ...]
    ee_mm: tuple[float, float, float]
    stale: bool


@dataclass(frozen=True)
class Ack:
    ref: str


@dataclass(frozen=True)
class Error:
    code: str
    detail: str = ""


Message = Union[
    Hello, Welcome, Config, Lock, Unlock, Target, Move, Stop, State, Ack, Error
]

_TAGS = {
    Hello: "hello", Welcome: "welcome", Config: "config", Lock: "lock",
    Unlock: "unlock", Target: "target", Move: "move", Stop: "stop",
    State: "state", Ack: "ack", Error: "error",
}


def _q(value: float) -> float:
    """Quantize a wire number to 4 fractional digits."""
    return round(float(value), 4)


def _spec_to_dict(s: ModuleSpecWire) -> dict:
    return {
        "actuators": int(s.actuators),
        "radius_mm": _q(s.radius_mm),
        "plate_offset_mm": _q(s.plate_offset_mm),
        "min_len_mm": _q(s.min_len_mm),
        "max_len_mm": _q(s.max_len_mm),
        "tilt_limit_deg": _q(s.tilt_limit_deg),
    }


def encode(msg: Message) -> str:
    """Serialize a message to its single-line JSON form (no newline)."""
    tag = _TAGS.get(type(msg))
    if tag is None:
        raise TypeError(f"not a protocol message: {type(msg).__name__}")
    body: dict[str, Any] = {"type": tag}
    if isinstance(msg, Hello):
        body["version"] = int(msg.version)
    elif isinstance(msg, (Welcome, Config)):
        body["robot_spec"] = {"modules": [_spec_to_dict(s) for s in msg.robot_spec]}
    elif isinstance(msg, Target):
        body["module"] = int(msg.module)
        body["pos_mm"] = [_q(v) for v in msg.pos_mm]
    elif isinstance(msg, State):
        body["seq"] = int(msg.seq)
        body["t_ms"] = _q(msg.t_ms)
        body["fsm"] = int(msg.fsm)
        body["modules"] = [
            {
                "phi_deg": _q(m.phi_deg),
                "theta_deg": _q(m.theta_deg),
                "h_mm": _q(m.h_mm),
                "lengths_mm": [_q(v) for v in m.lengths_mm],
            }
            for m in msg.modules
        ]
        body["ee_mm"] = [_q(v) for v in msg.ee_mm]
        body["stale"] = bool(msg.stale)
    elif isinstance(msg, Ack):
        body["ref"] = str(msg.ref)
    elif isinstance(msg, Error):
        body["code"] = str(msg.code)
        body["detail"] = str(msg.detail)
    return json.dumps(body, separators=(",", ":"))


def _want(obj: dict, key: str, kinds: tuple[type, ...]) -> Any:
    if key not in obj:
        raise ProtocolError("bad_message", f"missing field {key!r}")
    val = obj[key]
    if not isinstance(val, kinds) or isinstance(val, bool) and bool not in kinds:
        raise ProtocolError("bad_message", f"field {key!r} has wrong type")
    if isinstance(val, float) and not math.isfinite(val):
        raise ProtocolError("bad_message", f"field {key!r} is not finite")
    return val


def _want_number(obj: dict, key: str) -> float:
    return float(_want(obj, key, (int, float)))


def _want_vec3(obj: dict, key: str) -> tuple[float, float, float]:
    val = _want(obj, key, (list,))
    if len(val) != 3:
        raise ProtocolError("bad_message", f"field {key!r} must have 3 entries")
    out = []
    for v in val:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ProtocolError("bad_message", f"field {key!r} entries must be finite numbers")
        out.append(float(v))
    return (out[0], out[1], out[2])


def _decode_spec(obj: Any) -> ModuleSpecWire:
    if not isinstance(obj, dict):
        raise ProtocolError("bad_message", "module spec must be an object")
    actuators = _want(obj, "actuators", (int,))
    return ModuleSpecWire(
        actuators=actuators,
        radius_mm=_want_number(obj, "radius_mm"),
        plate_offset_mm=_want_number(obj, "plate_offset_mm"),
        min_len_mm=_want_number(obj, "min_len_mm"),
        max_len_mm=_want_number(obj, "max_len_mm"),
        tilt_limit_deg=_want_number(obj, "tilt_limit_deg"),
    )


def _decode_robot_spec(obj: dict) -> tuple[ModuleSpecWire, ...]:
    spec = _want(obj, "robot_spec", (dict,))
    modules = _want(spec, "modules", (list,))
    if not modules:
        raise ProtocolError("bad_message", "robot_spec.modules is empty")
    return tuple(_decode_spec(m) for m in modules)


def decode(line: str) -> Message:
    """Parse one line into a message; ProtocolError on anything invalid."""
    if len(line.encode("utf-8", errors="replace")) > MAX_LINE_BYTES:
        raise ProtocolError("bad_message", "line exceeds 64 KiB")
    try:
        obj = json.loads(
            line,
            parse_constant=lambda c: (_ for _ in ()).throw(
                ProtocolError("bad_message", f"non-finite constant {c}")
            ),
        )
    except ProtocolError:
        raise
    except (json.JSONDecodeError, RecursionError, ValueError) as exc:
        raise ProtocolError("bad_message", f"invalid JSON: {exc}")
    if not isinstance(obj, dict):
        raise ProtocolError("bad_message", "message must be a JSON object")
    tag = obj.get("type")
    if not isinstance(tag, str):
        raise ProtocolError("bad_message", "missing or non-string type tag")

    if tag == "hello":
        return Hello(version=_want(obj, "version", (int,)))
    if tag == "welcome":
        return Welcome(robot_spec=_decode_robot_spec(obj))
    if tag == "config":
        return Config(robot_spec=_decode_robot_spec(obj))
    if tag == "lock":
        return Lock()
    if tag == "unlock":
        return Unlock()
    if tag == "target":
        return Target(module=_want(obj, "module", (int,)), pos_mm=_want_vec3(obj, "pos_mm"))
    if tag == "move":
        return Move()
    if tag == "stop":
        return Stop()
    if tag == "state":
        modules = _want(obj, "modules", (list,))
        decoded = []
        for m in modules:
            if not isinstance(m, dict):
                raise ProtocolError("bad_message", "state.modules entries must be objects")
            lengths = _want(m, "lengths_mm", (list,))
            for v in lengths:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ProtocolError("bad_message", "lengths_mm entries must be finite numbers")
            decoded.append(ModuleState(
                phi_deg=_want_number(m, "phi_deg"),
                theta_deg=_want_number(m, "theta_deg"),
                h_mm=_want_number(m, "h_mm"),
                lengths_mm=tuple(float(v) for v in lengths),
            ))
        return State(
            seq=_want(obj, "seq", (int,)),
            t_ms=_want_number(obj, "t_ms"),
            fsm=_want(obj, "fsm", (int,)),
            modules=tuple(decoded),
            ee_mm=_want_vec3(obj, "ee_mm"),
            stale=_want(obj, "stale", (bool,)),
        )
    if tag == "ack":
        return Ack(ref=_want(obj, "ref", (str,)))
    if tag == "error":
        return Error(code=_want(obj, "code", (str,)), detail=str(obj.get("detail", "")))
    raise ProtocolError("bad_message", f"unknown type tag {tag!r}")
