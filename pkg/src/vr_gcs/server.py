"""Ground-station service: simulation loop plus multi-client streaming.

One asyncio task owns the Simulation and advances it on a fixed-timestep
schedule (wall-clock paced, or flat out with fast=True). Session tasks
exchange immutable values with it through per-session queues: envelopes
in, pose lines and encoded chunk frames out. Probe pongs are answered and
timestamped on the session task so the round trip measures transport,
not simulation scheduling.

Transport is a single WebSocket port; JSON envelopes ride text frames
and length-prefixed MSH1 chunks ride binary frames. A joining client
sends a `hello` carrying its protocol version, then receives the server
`hello` (world name, chunk list, viewer offset) followed by a binary
replay of every existing chunk at its latest revision. Live updates are
announced with `chunk_notice` before each binary frame. The first
session to connect holds control authority; when it leaves, the oldest
surviving session inherits.
"""

import asyncio
import logging
import mimetypes
import os
import signal
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from websockets.asyncio.server import ServerConnection, serve
from websockets.datastructures import Headers
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Request, Response

from . import protocol
from .config import ServerConfig
from .controller import CommandRejected, FlightMode, VelocityCommand
from .mapping import MeshChunk
from .protocol import (CmdVel, Hello, Land, LatencyProbe, Ping, Pong,
                       Takeoff, decode_message, encode_mesh_chunk,
                       encode_message, frame)
from .sim import ScriptEvent, Simulation
from .telemetry import export_csv

log = logging.getLogger("vr_gcs.server")

QUEUE_POSE_LIMIT = 64       # drop fresh poses when a session lags this far
MAX_STEP_BURST = 200        # physics steps per loop pass before yielding
CLOSE_BAD_VERSION = 4000


@dataclass
class IngestResult:
    accepted: bool
    reason: Optional[str] = None

    @classmethod
    def ok(cls):
        return cls(True)

    @classmethod
    def rejected(cls, reason: str):
        return cls(False, reason)


@dataclass
class Session:
    session_id: int
    connection: Optional[ServerConnection]
    subscribed: bool = True
    control_authority: bool = False
    sent_revisions: Dict[Tuple[int, int, int], int] = field(default_factory=dict)
    queue: "asyncio.Queue" = field(default_factory=asyncio.Queue)
    pending_chunks: Dict[Tuple[int, int, int], Tuple[str, bytes]] = \
        field(default_factory=dict)
    outstanding_probes: Dict[int, int] = field(default_factory=dict)

    def enqueue_text(self, line: str):
        self.queue.put_nowait(("text", line))

    def enqueue_pose(self, line: str):
        if self.queue.qsize() >= QUEUE_POSE_LIMIT:
            return  # lagging session: newest pose is expendable
        self.queue.put_nowait(("text", line))

    def enqueue_binary(self, payload: bytes):
        self.queue.put_nowait(("binary", payload))

    def enqueue_chunk(self, notice: str, payload: bytes,
                      coords: Tuple[int, int, int]):
        # Latest revision wins: replacing a pending entry skips the stale
        # frame without growing the queue.
        fresh = coords not in self.pending_chunks
        self.pending_chunks[coords] = (notice, payload)
        if fresh:
            self.queue.put_nowait(("chunk", coords))


class GroundStation:
    """Owns the simulation, the listening socket, and all sessions."""

    def __init__(self, config: ServerConfig, fast: bool = False,
                 script: Optional[List[ScriptEvent]] = None,
                 duration_s: Optional[float] = None,
                 settle_s: float = 5.0,
                 latency_csv: Optional[str] = None,
                 state_log: Optional[str] = None,
                 static_dir: Optional[str] = None):
        self.config = config
        self.sim = Simulation(config, record_trajectory=state_log is not None)
        self.fast = fast
        self.duration_s = duration_s
        self.settle_s = settle_s
        self.latency_csv = latency_csv
        self.state_log = state_log
        self.static_dir = static_dir
        self._script_end = None
        if script:
            self.sim.load_script(script)
            self._script_end = max(e.time_s for e in script)

        self.sessions: Dict[int, Session] = {}
        self._next_session_id = 1
        self._next_probe_id = 1
        self._epoch_ns = time.monotonic_ns()
        self._stop: Optional[asyncio.Event] = None  # created inside run()
        self.bound_port: Optional[int] = None

    # -- clock ----------------------------------------------------------

    def now_ns(self) -> int:
        """Session-epoch wall nanoseconds (server clock, monotonic)."""
        return time.monotonic_ns() - self._epoch_ns

    # -- command ingestion ------------------------------------------------

    def ingest_command(self, session: Session, env) -> IngestResult:
        """Apply a pilot envelope if the session holds authority."""
        if not session.control_authority:
            return IngestResult.rejected("no-authority")
        try:
            if isinstance(env, CmdVel):
                self.sim.command_velocity(VelocityCommand(
                    vx=env.vx, vy=env.vy, vz=env.vz, yaw_rate=env.yaw_rate))
            elif isinstance(env, Takeoff):
                self.sim.command_takeoff()
            elif isinstance(env, Land):
                self.sim.command_land()
            else:
                return IngestResult.rejected("not-a-command")
        except CommandRejected as exc:
            return IngestResult.rejected(exc.reason)
        return IngestResult.ok()

    # -- session lifecycle -------------------------------------------------

    def register_session(self, connection) -> Session:
        """Create a session, grant authority if free, queue the catch-up.

        Runs without awaiting so the chunk snapshot, hello, and replay are
        atomic with respect to new simulation output.
        """
        session = Session(self._next_session_id, connection)
        self._next_session_id += 1
        if not any(s.control_authority for s in self.sessions.values()):
            session.control_authority = True
        self.sessions[session.session_id] = session

        chunk_list = self.sim.voxel_map.chunk_list()
        hello = Hello(protocol_version=protocol.PROTOCOL_VERSION,
                      world_name=self.sim.world.name,
                      chunk_list=chunk_list,
                      viewer_offset_m=tuple(self.config.viewer_offset_m))
        session.enqueue_text(encode_message(hello))
        for coords, revision in chunk_list:
            mesh = self.sim.voxel_map.extract_chunk_mesh(coords)
            session.enqueue_binary(frame(encode_mesh_chunk(mesh)))
            session.sent_revisions[coords] = revision
        log.info("session %d joined (authority=%s, %d chunks replayed)",
                 session.session_id, session.control_authority,
                 len(chunk_list))
        return session

    def unregister_session(self, session: Session):
        self.sessions.pop(session.session_id, None)
        if session.control_authority and self.sessions:
            heir = self.sessions[min(self.sessions)]
            heir.control_authority = True
            log.info("session %d inherits control authority",
                     heir.session_id)
        log.info("session %d left", session.session_id)

    # -- broadcasting ------------------------------------------------------

    def broadcast_pose(self, pose_msg):
        line = encode_message(pose_msg)
        for session in self.sessions.values():
            if session.subscribed:
                session.enqueue_pose(line)

    def broadcast_chunk(self, mesh: MeshChunk):
        notice = encode_message(protocol.ChunkNotice(
            coords=mesh.chunk_coords, revision=mesh.revision))
        payload = frame(encode_mesh_chunk(mesh))
        for session in self.sessions.values():
            if session.subscribed:
                session.enqueue_chunk(notice, payload, mesh.chunk_coords)
                session.sent_revisions[mesh.chunk_coords] = mesh.revision

    # -- network handlers ---------------------------------------------------

    async def _session_sender(self, session: Session):
        try:
            while True:
                kind, payload = await session.queue.get()
                if kind == "chunk":
                    entry = session.pending_chunks.pop(payload, None)
                    if entry is None:
                        continue
                    notice, chunk_frame = entry
                    await session.connection.send(notice)
                    await session.connection.send(chunk_frame)
                else:
                    await session.connection.send(payload)
        except ConnectionClosed:
            pass  # receive loop notices and tears the session down

    async def _session_prober(self, session: Session):
        period = 1.0 / self.config.probe_rate_hz
        while True:
            probe_id = self._next_probe_id
            self._next_probe_id += 1
            t_tx = self.now_ns()
            session.outstanding_probes[probe_id] = t_tx
            session.enqueue_text(encode_message(Ping(probe_id, t_tx)))
            await asyncio.sleep(period)

    def _record_pong(self, session: Session, pong: Pong):
        if pong.id not in session.outstanding_probes:
            log.debug("session %d: stray pong id %d", session.session_id,
                      pong.id)
            return
        session.outstanding_probes.pop(pong.id)
        try:
            self.sim.latency_log.add(
                LatencyProbe(pong.id, pong.t_tx_ns, self.now_ns()))
        except (protocol.NegativeIntervalError, ValueError) as exc:
            log.warning("session %d: bad pong: %s", session.session_id, exc)

    async def _handle_connection(self, connection: ServerConnection):
        try:
            raw = await asyncio.wait_for(connection.recv(), timeout=10.0)
            env = decode_message(raw)
        except (asyncio.TimeoutError, ConnectionClosed):
            return
        except protocol.MessageError as exc:
            await connection.close(CLOSE_BAD_VERSION, f"bad handshake: {exc}")
            return
        if not isinstance(env, Hello) \
                or env.protocol_version != protocol.PROTOCOL_VERSION:
            await connection.close(
                CLOSE_BAD_VERSION,
                f"unsupported protocol version; server speaks "
                f"{protocol.PROTOCOL_VERSION}")
            return

        session = self.register_session(connection)
        sender = asyncio.create_task(self._session_sender(session))
        prober = asyncio.create_task(self._session_prober(session))
        try:
            async for message in connection:
                if isinstance(message, bytes):
                    log.debug("session %d sent unexpected binary frame",
                              session.session_id)
                    continue
                try:
                    env = decode_message(message)
                except protocol.MessageError as exc:
                    log.warning("session %d: undecodable message: %s",
                                session.session_id, exc)
                    continue
                if isinstance(env, Pong):
                    self._record_pong(session, env)
                elif isinstance(env, Ping):
                    # Client-initiated probe: echo verbatim, immediately.
                    session.enqueue_text(encode_message(
                        Pong(env.id, env.t_tx_ns)))
                elif isinstance(env, (CmdVel, Takeoff, Land)):
                    result = self.ingest_command(session, env)
                    if not result.accepted:
                        log.info("session %d: %s rejected (%s)",
                                 session.session_id, env.type, result.reason)
                else:
                    log.debug("session %d: ignoring %s", session.session_id,
                              env.type)
        except ConnectionClosed:
            pass
        finally:
            sender.cancel()
            prober.cancel()
            self.unregister_session(session)

    # -- static frontend ----------------------------------------------------

    def _process_request(self, connection: ServerConnection,
                         request: Request):
        if "upgrade" in request.headers.get("Connection", "").lower():
            return None  # continue the websocket handshake
        if self.static_dir is None:
            return connection.respond(200, "vr-gcs websocket endpoint\n")
        path = request.path.split("?", 1)[0]
        if path.endswith("/"):
            path += "index.html"
        full = os.path.realpath(os.path.join(self.static_dir, path.lstrip("/")))
        root = os.path.realpath(self.static_dir)
        if not full.startswith(root + os.sep) and full != root:
            return connection.respond(404, "not found\n")
        if not os.path.isfile(full):
            return connection.respond(404, "not found\n")
        ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
        with open(full, "rb") as fh:
            body = fh.read()
        headers = Headers([("Content-Type", ctype),
                           ("Content-Length", str(len(body)))])
        return Response(200, "OK", headers, body)

    # -- main loop -----------------------------------------------------------

    def _handle_tick_output(self, out):
        if out.pose is not None:
            self.broadcast_pose(out.pose)
        for mesh in out.dirty_chunks:
            self.broadcast_chunk(mesh)

    def _should_stop(self) -> bool:
        if self.duration_s is not None \
                and self.sim.state.time >= self.duration_s:
            return True
        if self._script_end is not None and self.duration_s is None:
            return (self.sim.script_done
                    and self.sim.state.time >= self._script_end + self.settle_s
                    and self.sim.mode is FlightMode.GROUNDED)
        return False

    async def _sim_loop(self):
        loop = asyncio.get_running_loop()
        rate = self.config.physics_rate_hz
        start = loop.time()
        steps_done = 0
        try:
            while not self._stop.is_set():
                if self.fast:
                    due = steps_done + MAX_STEP_BURST
                else:
                    target = int((loop.time() - start) * rate)
                    due = min(target, steps_done + MAX_STEP_BURST)
                while steps_done < due:
                    out = self.sim.tick()
                    steps_done += 1
                    self._handle_tick_output(out)
                if self._should_stop():
                    self._stop.set()
                    return
                await asyncio.sleep(0.0 if self.fast else 0.002)
        except asyncio.CancelledError:
            raise
        except Exception:
            log.exception("simulation loop failed; shutting down")
            self._stop.set()

    def _finalize(self):
        if self.latency_csv:
            if self.sim.latency_log.probes and \
                    not self.sim.latency_log.mapping_intervals:
                # Mapping runs for the whole session in this server.
                self.sim.latency_log.add_mapping_interval(0, self.now_ns() + 1)
            export_csv(self.sim.latency_log, self.latency_csv)
            log.info("wrote %d probes to %s",
                     len(self.sim.latency_log.probes), self.latency_csv)
        if self.state_log:
            with open(self.state_log, "w", encoding="utf-8") as fh:
                fh.write("t,x,y,z,vx,vy,vz\n")
                for s in self.sim.trajectory:
                    row = [s.time, *s.position.tolist(), *s.velocity.tolist()]
                    fh.write(",".join(repr(float(x)) for x in row) + "\n")
            log.info("wrote %d trajectory samples to %s",
                     len(self.sim.trajectory), self.state_log)

    async def run(self):
        """Serve until the script/duration completes or stop() is called."""
        self._stop = asyncio.Event()
        async with serve(self._handle_connection, self.config.listen_host,
                         self.config.listen_port,
                         process_request=self._process_request,
                         max_size=2 ** 20) as server:
            self.bound_port = server.sockets[0].getsockname()[1] \
                if server.sockets else self.config.listen_port
            log.info("listening on ws://%s:%d (world %r)",
                     self.config.listen_host, self.bound_port,
                     self.sim.world.name)
            sim_task = asyncio.create_task(self._sim_loop())
            try:
                await self._stop.wait()
            finally:
                sim_task.cancel()
                try:
                    await sim_task
                except asyncio.CancelledError:
                    pass
                self._finalize()

    def stop(self):
        if self._stop is not None:
            self._stop.set()


def run_server(config: ServerConfig, **kwargs) -> None:
    """Blocking entry point; returns after shutdown."""
    station = GroundStation(config, **kwargs)

    async def main():
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, station.stop)
            except NotImplementedError:
                pass
        await station.run()

    asyncio.run(main())


__all__ = ["GroundStation", "Session", "IngestResult", "run_server"]
