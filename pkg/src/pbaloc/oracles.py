"""Noisy oracles answering "does the target lie in this region / block?".

Three interchangeable sources:

* :class:`BscOracle` — an analytic binary symmetric channel over region-level
  ground truth, for theory experiments.  One call answers a whole query
  region.
* :class:`BlockTruthOracle` — pixel-level ground truth per block with a
  synthetic confidence model, simulating a trained classifier without
  training one.
* :class:`ExternalOracle` — a client for an out-of-process classifier
  speaking a newline-delimited JSON protocol over a stdio pipe or TCP.

Wire protocol (one JSON object per line):

    -> {"op": "hello", "protocol": 1}
    <- {"op": "hello", "protocol": 1, "input_side": 100,
        "classes": ["object", "background"]}
    -> {"op": "classify", "id": 7, "side": 100, "pixels": "<base64>"}
    <- {"op": "result", "id": 7, "confidence": [0.93, 0.07]}
    <- {"op": "error", "id": 7, "message": "..."}      (on failure)

``pixels`` is the base64 encoding of side*side row-major 8-bit grayscale
bytes.  Replies are validated, never trusted: a malformed reply raises
:class:`ProtocolError` rather than corrupting the posterior.
"""

from __future__ import annotations

import base64
import json
import shlex
import socket
import subprocess
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import scene as scene_mod

if TYPE_CHECKING:
    from .engine import Block, QueryRegion
    from .scene import Scene

PROTOCOL_VERSION = 1

_CONF_SUM_TOL = 1e-6
_WIRE_CONF_SUM_TOL = 1e-3


class OracleUnavailableError(RuntimeError):
    """The external classifier process or connection is gone."""


class ProtocolError(RuntimeError):
    """The external classifier sent a malformed or mismatched reply."""


@dataclass(frozen=True)
class OracleResponse:
    """One classifier answer: a binary label and its confidence pair.

    ``confidence`` is (p_object, p_background); the label must agree with
    the argmax of the pair.
    """

    label: int
    confidence: tuple[float, float]

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        conf = tuple(float(v) for v in self.confidence)
        if len(conf) != 2:
            raise ValueError(f"confidence must be a pair, got {self.confidence!r}")
        if not all(np.isfinite(v) for v in conf):
            raise ValueError(f"confidence not finite: {conf!r}")
        if any(v < 0.0 for v in conf):
            raise ValueError(f"confidence has negative entries: {conf!r}")
        if abs(conf[0] + conf[1] - 1.0) > _CONF_SUM_TOL:
            raise ValueError(f"confidence sums to {conf[0] + conf[1]!r}, not 1")
        winning = conf[0] if self.label == 1 else conf[1]
        if winning < max(conf):
            raise ValueError(f"label {self.label} disagrees with argmax of {conf!r}")
        object.__setattr__(self, "confidence", conf)

    @property
    def error_estimate(self) -> float:
        """1 - max confidence: the answer's implied error probability."""
        return 1.0 - max(self.confidence)


class OracleStats:
    """Monotone counter of classifier invocations."""

    __slots__ = ("calls",)

    def __init__(self) -> None:
        self.calls = 0

    def record(self) -> None:
        self.calls += 1


class BscOracle:
    """Region-level oracle: truthful answer flipped with probability eps_true.

    Ground truth for a query region is whether the target coordinate along
    the region's queried axis lies inside the region's interval.  The
    reported confidence is (1 - eps_true) for the emitted label, so the
    downstream error estimate equals the channel's flip probability.
    """

    def __init__(
        self,
        target: tuple[int, int],
        eps_true: float,
        rng: np.random.Generator,
    ) -> None:
        if not (0.0 <= eps_true < 0.5):
            raise ValueError(f"eps_true must be in [0, 0.5), got {eps_true}")
        self.target = (int(target[0]), int(target[1]))
        self.eps_true = float(eps_true)
        self.rng = rng
        self.stats = OracleStats()

    @property
    def calls(self) -> int:
        return self.stats.calls

    def query_region(self, region: QueryRegion) -> OracleResponse:
        row, col = self.target
        coord = row if region.axis == "rows" else col
        lo, hi = region.interval()
        truth = 1 if lo <= coord <= hi else 0
        flipped = bool(self.rng.random() < self.eps_true)
        label = truth ^ flipped
        e = self.eps_true
        confidence = (1.0 - e, e) if label == 1 else (e, 1.0 - e)
        self.stats.record()
        return OracleResponse(label, confidence)

    def respond(
        self, region: QueryRegion, blocks: Sequence[Block]
    ) -> list[OracleResponse]:
        """One region-level answer; the block partition is not consulted."""
        return [self.query_region(region)]


class BlockTruthOracle:
    """Per-block oracle with pixel ground truth and synthetic confidences.

    A block is positive iff the scene's target center lies inside its rect.
    The emitted label flips with probability ``eps_true``; the winning
    confidence is drawn uniformly from [conf_floor, 1], so implied error
    estimates spread over (0, 1 - conf_floor].
    """

    def __init__(
        self,
        scene: Scene,
        eps_true: float,
        conf_floor: float = 0.75,
        rng: np.random.Generator | None = None,
    ) -> None:
        if not (0.0 <= eps_true < 0.5):
            raise ValueError(f"eps_true must be in [0, 0.5), got {eps_true}")
        if not (0.5 < conf_floor < 1.0):
            raise ValueError(f"conf_floor must be in (0.5, 1), got {conf_floor}")
        self.scene = scene
        self.eps_true = float(eps_true)
        self.conf_floor = float(conf_floor)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.stats = OracleStats()

    @property
    def calls(self) -> int:
        return self.stats.calls

    def query_block(self, block: Block) -> OracleResponse:
        if block.rect.row_hi > self.scene.height or block.rect.col_hi > self.scene.width:
            raise ValueError(f"block {block.rect} outside scene {self.scene.dims}")
        truth = 1 if block.rect.contains(*self.scene.target_center) else 0
        flipped = bool(self.rng.random() < self.eps_true)
        label = truth ^ flipped
        winning = float(self.rng.uniform(self.conf_floor, 1.0))
        confidence = (winning, 1.0 - winning) if label == 1 else (1.0 - winning, winning)
        self.stats.record()
        return OracleResponse(label, confidence)

    def classify_block(self, block: Block) -> OracleResponse:
        return self.query_block(block)

    def respond(
        self, region: QueryRegion, blocks: Sequence[Block]
    ) -> list[OracleResponse]:
        return [self.query_block(block) for block in blocks]


class _StdioTransport:
    """Line transport over a child process's stdin/stdout."""

    def __init__(self, command: str) -> None:
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise OracleUnavailableError(f"cannot spawn {command!r}: {exc}") from exc

    def send_line(self, line: str) -> None:
        try:
            assert self.proc.stdin is not None
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise OracleUnavailableError(f"server pipe closed: {exc}") from exc

    def recv_line(self) -> str:
        assert self.proc.stdout is not None
        line = self.proc.stdout.readline()
        if line == "":
            raise OracleUnavailableError("server closed the connection")
        return line

    def close(self) -> None:
        if self.proc.stdin is not None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class _TcpTransport:
    """Line transport over a TCP connection."""

    def __init__(self, host: str, port: int) -> None:
        try:
            self.sock = socket.create_connection((host, port), timeout=30)
        except OSError as exc:
            raise OracleUnavailableError(f"cannot connect to {host}:{port}: {exc}") from exc
        self.fh = self.sock.makefile("rw", encoding="utf-8", newline="\n")

    def send_line(self, line: str) -> None:
        try:
            self.fh.write(line + "\n")
            self.fh.flush()
        except OSError as exc:
            raise OracleUnavailableError(f"connection lost: {exc}") from exc

    def recv_line(self) -> str:
        try:
            line = self.fh.readline()
        except OSError as exc:
            raise OracleUnavailableError(f"connection lost: {exc}") from exc
        if line == "":
            raise OracleUnavailableError("server closed the connection")
        return line

    def close(self) -> None:
        try:
            self.fh.close()
        finally:
            self.sock.close()


def _parse_endpoint(endpoint: str) -> _StdioTransport | _TcpTransport:
    if endpoint.startswith("stdio:"):
        command = endpoint[len("stdio:") :]
        if not command.strip():
            raise ValueError("empty stdio command in endpoint")
        return _StdioTransport(command)
    if endpoint.startswith("tcp://"):
        hostport = endpoint[len("tcp://") :]
        host, sep, port = hostport.rpartition(":")
        if not sep or not host:
            raise ValueError(f"endpoint {endpoint!r} must be tcp://HOST:PORT")
        return _TcpTransport(host, int(port))
    raise ValueError(f"endpoint {endpoint!r} must start with 'stdio:' or 'tcp://'")


class ExternalOracle:
    """Client for an out-of-process classifier speaking the line protocol.

    A handshake at connect time fixes the classifier's square input side;
    every classify request must carry a raster of exactly that side.  When a
    scene is attached, :meth:`classify_block` extracts and resizes block
    pixels before querying.
    """

    def __init__(
        self,
        transport: _StdioTransport | _TcpTransport,
        scene: Scene | None = None,
    ) -> None:
        self._transport = transport
        self.scene = scene
        self.stats = OracleStats()
        self._next_id = 1
        self.input_side: int = 0
        self.classes: tuple[str, ...] = ()
        self._handshake()

    @classmethod
    def connect(cls, endpoint: str, scene: Scene | None = None) -> ExternalOracle:
        """Open ``stdio:<command>`` or ``tcp://HOST:PORT`` and handshake."""
        return cls(_parse_endpoint(endpoint), scene=scene)

    @property
    def calls(self) -> int:
        return self.stats.calls

    def _roundtrip(self, request: dict) -> dict:
        self._transport.send_line(json.dumps(request, separators=(",", ":")))
        line = self._transport.recv_line()
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"reply is not JSON: {line!r}") from exc
        if not isinstance(reply, dict):
            raise ProtocolError(f"reply is not an object: {line!r}")
        return reply

    def _handshake(self) -> None:
        reply = self._roundtrip({"op": "hello", "protocol": PROTOCOL_VERSION})
        if reply.get("op") != "hello":
            raise ProtocolError(f"expected hello reply, got {reply!r}")
        if reply.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol {reply.get('protocol')!r}")
        side = reply.get("input_side")
        if not isinstance(side, int) or side < 1:
            raise ProtocolError(f"bad input_side in hello: {side!r}")
        self.input_side = side
        classes = reply.get("classes")
        if not isinstance(classes, list) or len(classes) != 2:
            raise ProtocolError(f"bad classes in hello: {classes!r}")
        self.classes = tuple(str(c) for c in classes)

    def query_block(self, pixels: np.ndarray) -> OracleResponse:
        """Classify one square grayscale raster of the handshake side."""
        arr = np.ascontiguousarray(pixels, dtype=np.uint8)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"raster must be square, got shape {arr.shape}")
        if arr.shape[0] != self.input_side:
            raise ValueError(
                f"raster side {arr.shape[0]} != handshake input_side {self.input_side}"
            )
        rid = self._next_id
        self._next_id += 1
        reply = self._roundtrip(
            {
                "op": "classify",
                "id": rid,
                "side": int(arr.shape[0]),
                "pixels": base64.b64encode(arr.tobytes()).decode("ascii"),
            }
        )
        if reply.get("op") == "error":
            raise ProtocolError(f"server error: {reply.get('message')!r}")
        if reply.get("op") != "result":
            raise ProtocolError(f"expected result, got {reply!r}")
        if reply.get("id") != rid:
            raise ProtocolError(f"id mismatch: sent {rid}, got {reply.get('id')!r}")
        conf = reply.get("confidence")
        if (
            not isinstance(conf, list)
            or len(conf) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in conf)
        ):
            raise ProtocolError(f"bad confidence: {conf!r}")
        p_obj, p_bg = float(conf[0]), float(conf[1])
        if not (np.isfinite(p_obj) and np.isfinite(p_bg)) or p_obj < 0 or p_bg < 0:
            raise ProtocolError(f"bad confidence values: {conf!r}")
        total = p_obj + p_bg
        if abs(total - 1.0) > _WIRE_CONF_SUM_TOL:
            raise ProtocolError(f"confidence sums to {total!r}, not 1")
        p_obj, p_bg = p_obj / total, p_bg / total
        self.stats.record()
        return OracleResponse(1 if p_obj >= p_bg else 0, (p_obj, p_bg))

    def classify_block(self, block: Block) -> OracleResponse:
        if self.scene is None:
            raise ValueError("no scene attached; cannot extract block pixels")
        raster = scene_mod.extract_block(self.scene, block.rect)
        if raster.shape[0] != self.input_side:
            raster = scene_mod.resize_to_square(raster, self.input_side)
        return self.query_block(raster)

    def respond(
        self, region: QueryRegion, blocks: Sequence[Block]
    ) -> list[OracleResponse]:
        return [self.classify_block(block) for block in blocks]

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> ExternalOracle:
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
