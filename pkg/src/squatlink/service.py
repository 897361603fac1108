"""Receiver-plus-host service: ingestion, live feed, control API.

The datagram receiver, frame parser, session registry, and analytics
all live in one synchronous core (:class:`TelemetryIngest`).  A single
loop thread (:class:`IngestServer`) owns that core; HTTP handlers never
touch it directly but enqueue closures the loop executes between
datagrams, so there is no shared mutable session state across threads.
Live consumers get per-subscriber bounded queues fed in arrival order.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .emg import counts_to_volts
from .errors import InputError, SquatLinkError, StateError
from .fusion import NOMINAL_DT_S
from .protocol import DecodedPacket, FrameParser, LinkStats
from .session import (
    LIFECYCLE_TRANSITIONS,
    SessionMetadata,
    SessionRecord,
    SessionState,
    SessionStore,
    summarize,
)

#: Cap on each live subscriber's backlog; oldest events go first.
DEFAULT_SUBSCRIBER_DEPTH = 1024


@dataclass(frozen=True)
class LiveFeedEvent:
    """One parsed frame, enriched for display."""

    session_id: str
    seq: int
    t_s: float
    knee_angle_deg: float
    knee_vel_dps: float
    knee_acc_dps2: float
    emg1_v: float
    emg2_v: float

    def as_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "t_s": self.t_s,
            "knee_angle_deg": self.knee_angle_deg,
            "knee_vel_dps": self.knee_vel_dps,
            "knee_acc_dps2": self.knee_acc_dps2,
            "emg1_v": self.emg1_v,
            "emg2_v": self.emg2_v,
        }


class LiveSubscriber:
    """Bounded fan-out queue; overflow drops the oldest event and counts it."""

    def __init__(self, depth: int = DEFAULT_SUBSCRIBER_DEPTH) -> None:
        self._events: deque[LiveFeedEvent] = deque()
        self._depth = depth
        self._cond = threading.Condition()
        self.dropped = 0
        self.closed = False

    def push(self, event: LiveFeedEvent) -> None:
        with self._cond:
            if self.closed:
                return
            if len(self._events) >= self._depth:
                self._events.popleft()
                self.dropped += 1
            self._events.append(event)
            self._cond.notify()

    def pop(self, timeout: float | None = None) -> LiveFeedEvent | None:
        """Next event in arrival order, or None on timeout/close."""
        with self._cond:
            self._cond.wait_for(lambda: self._events or self.closed, timeout)
            if self._events:
                return self._events.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self.closed = True
            self._cond.notify_all()


class _SessionRuntime:
    """Per-session live-analytics state (causal derivative memory)."""

    def __init__(self, record: SessionRecord) -> None:
        self.record = record
        self.sample_index = 0
        self.prev_angle: float | None = None
        self.prev_vel = 0.0
        self.auto_record = False


class TelemetryIngest:
    """Synchronous ingestion core: bytes in, events and records out.

    Not thread-safe by itself; in the live service exactly one
    :class:`IngestServer` loop drives it.
    """

    def __init__(
        self,
        store: SessionStore | None = None,
        dt_s: float = NOMINAL_DT_S,
    ) -> None:
        self.store = store
        self.dt_s = dt_s
        self.parser = FrameParser()
        self.sessions: dict[str, _SessionRuntime] = {}
        self.active_id: str | None = None
        self.orphaned = 0
        self.suspect = 0
        self.started_at = time.monotonic()
        self._subscribers: list[LiveSubscriber] = []
        self._ids = itertools.count(1)

    # -- session control -----------------------------------------------------

    def create_session(self, metadata: SessionMetadata, **record_kwargs) -> str:
        session_id = f"s{next(self._ids):04d}"
        record = SessionRecord(metadata, dt_s=self.dt_s, **record_kwargs)
        self.sessions[session_id] = _SessionRuntime(record)
        return session_id

    def _runtime(self, session_id: str) -> _SessionRuntime:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise InputError(f"unknown session: {session_id}") from None

    def record(self, session_id: str) -> SessionRecord:
        return self._runtime(session_id).record

    def start_calibration(self, session_id: str) -> None:
        """Attach the session to the incoming stream and begin zeroing."""
        runtime = self._runtime(session_id)
        if self.active_id is not None and self.active_id != session_id:
            raise StateError(
                f"session {self.active_id} already owns the stream"
            )
        runtime.record.start_calibration()
        self.active_id = session_id

    def start_recording(self, session_id: str) -> None:
        self._runtime(session_id).record.start_recording()

    def stop(self, session_id: str) -> None:
        """Stop the trial and release the stream."""
        self._runtime(session_id).record.stop()
        if self.active_id == session_id:
            self.active_id = None

    def summary(self, session_id: str):
        record = self._runtime(session_id).record
        return record.summary or summarize(record)

    def export(self, session_id: str) -> tuple[Path, Path]:
        if self.store is None:
            raise StateError("service has no data directory configured")
        return self.store.save(self._runtime(session_id).record)

    # -- live feed -----------------------------------------------------------

    def subscribe(self, depth: int = DEFAULT_SUBSCRIBER_DEPTH) -> LiveSubscriber:
        subscriber = LiveSubscriber(depth)
        self._subscribers.append(subscriber)
        return subscriber

    def unsubscribe(self, subscriber: LiveSubscriber) -> None:
        subscriber.close()
        if subscriber in self._subscribers:
            self._subscribers.remove(subscriber)

    def _broadcast(self, event: LiveFeedEvent) -> None:
        for subscriber in self._subscribers:
            subscriber.push(event)

    # -- ingestion -----------------------------------------------------------

    def feed_bytes(self, data: bytes) -> list[LiveFeedEvent]:
        """Parse a received chunk and route every decoded packet."""
        events = []
        for seq, decoded in self.parser.feed(data):
            event = self._route(seq, decoded)
            if event is not None:
                events.append(event)
        return events

    def _route(self, seq: int, decoded: DecodedPacket) -> LiveFeedEvent | None:
        if self.active_id is None:
            self.orphaned += 1
            return None
        if "non_finite_angle" in decoded.suspect:
            # A non-finite angle cannot enter the analytics chain; count
            # it and move on so the stream keeps flowing.
            self.suspect += 1
            return None
        runtime = self.sessions[self.active_id]
        record = runtime.record
        if record.state is SessionState.CALIBRATING and runtime.auto_record:
            needed = max(1, round(record.calibration_window_s / record.dt_s))
            if record.calibration_sample_count >= needed:
                record.start_recording()
        angle = record.ingest(seq, decoded.packet)
        # Causal derivatives for display only; the stored record is
        # recomputed with the central stencil at stop.
        if runtime.prev_angle is None:
            vel = acc = 0.0
        else:
            vel = (angle - runtime.prev_angle) / record.dt_s
            acc = (vel - runtime.prev_vel) / record.dt_s
        event = LiveFeedEvent(
            session_id=self.active_id,
            seq=seq,
            t_s=runtime.sample_index * record.dt_s,
            knee_angle_deg=angle,
            knee_vel_dps=vel,
            knee_acc_dps2=acc,
            emg1_v=counts_to_volts(min(decoded.packet.emg1_counts, 4095)),
            emg2_v=counts_to_volts(min(decoded.packet.emg2_counts, 4095)),
        )
        runtime.sample_index += 1
        runtime.prev_angle = angle
        runtime.prev_vel = vel
        self._broadcast(event)
        return event

    def replay(
        self,
        data: bytes,
        metadata: SessionMetadata,
        **record_kwargs,
    ) -> str:
        """Run a captured frame dump through the full session lifecycle.

        Calibration flips to recording automatically once the zeroing
        window is full, and the session is stopped at end of stream.
        """
        session_id = self.create_session(metadata, **record_kwargs)
        self._runtime(session_id).auto_record = True
        self.start_calibration(session_id)
        self.feed_bytes(data)
        record = self.record(session_id)
        if record.state is SessionState.CALIBRATING:
            # Stream ended at the zeroing boundary; raises if the dump
            # was too short to fill the window.
            record.start_recording()
        self.stop(session_id)
        return session_id

    # -- introspection -------------------------------------------------------

    def stats(self) -> dict:
        link: LinkStats = self.parser.stats
        link.note_elapsed(time.monotonic() - self.started_at)
        return {
            "received": link.received,
            "dropped": link.dropped,
            "crc_failures": link.crc_failures,
            "observed_rate_hz": link.observed_rate_hz,
            "orphaned": self.orphaned,
            "suspect": self.suspect,
            "sessions": len(self.sessions),
            "active_session": self.active_id,
            "subscribers": len(self._subscribers),
        }

    def session_view(self, session_id: str) -> dict:
        record = self._runtime(session_id).record
        return {
            "session_id": session_id,
            "state": record.state.value,
            "metadata": record.metadata.as_dict(),
            "sample_count": len(record.packets),
            "offset_deg": record.offset_deg,
        }


class IngestServer:
    """Single loop thread that owns a :class:`TelemetryIngest`.

    The loop alternates between pulling datagrams off the transport and
    draining a command queue of closures submitted by other threads via
    :meth:`call`.  With no transport (or before :meth:`start`), calls
    execute inline under a lock, which keeps offline replay and tests
    free of threading.
    """

    def __init__(self, core: TelemetryIngest, transport=None, poll_s: float = 0.02):
        self.core = core
        self.transport = transport
        self.poll_s = poll_s
        self._commands: queue.Queue = queue.Queue()
        self._thread: threading.Thread | None = None
        self._running = False
        self._inline_lock = threading.Lock()

    def start(self) -> None:
        if self._thread is not None:
            raise StateError("ingest loop already started")
        self._running = True
        self._thread = threading.Thread(
            target=self._run, name="squatlink-ingest", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def call(self, fn):
        """Run ``fn()`` on the loop thread and return its result."""
        if self._thread is None or not self._thread.is_alive():
            with self._inline_lock:
                return fn()
        reply: queue.Queue = queue.Queue()
        self._commands.put((fn, reply))
        outcome, value = reply.get()
        if outcome == "raise":
            raise value
        return value

    def _run(self) -> None:
        from .errors import TransportClosedError

        while self._running:
            if self.transport is not None:
                try:
                    data = self.transport.recv(timeout=self.poll_s)
                except TransportClosedError:
                    data = None
                    self._running = False
                if data:
                    self.core.feed_bytes(data)
            else:
                time.sleep(self.poll_s)
            while True:
                try:
                    fn, reply = self._commands.get_nowait()
                except queue.Empty:
                    break
                try:
                    reply.put(("return", fn()))
                except BaseException as exc:  # handed back to the caller
                    reply.put(("raise", exc))


#: Exception class -> HTTP status for the control plane.
_HTTP_STATUS = {
    "input_error": 422,
    "configuration_error": 422,
    "state_error": 409,
    "insufficient_data": 409,
    "timing_error": 422,
    "export_error": 500,
    "conformance_error": 422,
}


def build_app(server: IngestServer, ui_dir: str | Path | None = None):
    """FastAPI control plane over an :class:`IngestServer`.

    JSON bodies use the domain field names verbatim; errors carry a
    machine-readable ``code``.  The live feed is server-sent events,
    one JSON object per line, with comment pings on idle.  When
    ``ui_dir`` is given, its files are served at ``/`` so a browser
    dashboard shares the API's origin.
    """
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse, StreamingResponse

    from .session import Leg

    app = FastAPI(title="squatlink", docs_url=None, redoc_url=None)
    core = server.core

    @app.exception_handler(SquatLinkError)
    async def _domain_error(request: Request, exc: SquatLinkError):
        status = _HTTP_STATUS.get(exc.code, 400)
        if exc.code == "input_error" and "unknown session" in str(exc):
            status = 404
        return JSONResponse(
            status_code=status, content={"error": str(exc), "code": exc.code}
        )

    @app.post("/api/sessions", status_code=201)
    def create_session(body: dict):
        try:
            metadata = SessionMetadata(
                subject_id=str(body.get("subject_id", "")),
                age_range=str(body.get("age_range", "")),
                sex=str(body.get("sex", "")),
                dominant_leg=Leg(str(body.get("dominant_leg", "")).lower()),
            )
        except ValueError:
            raise InputError(
                "dominant_leg must be one of: "
                + ", ".join(leg.value for leg in Leg)
            ) from None
        session_id = server.call(lambda: core.create_session(metadata))
        return {"session_id": session_id, "state": SessionState.CREATED.value}

    def _transition(session_id: str, action) -> dict:
        server.call(lambda: action(session_id))
        return server.call(lambda: core.session_view(session_id))

    @app.post("/api/sessions/{session_id}/calibrate")
    def calibrate(session_id: str):
        return _transition(session_id, core.start_calibration)

    @app.post("/api/sessions/{session_id}/record")
    def record(session_id: str):
        return _transition(session_id, core.start_recording)

    @app.post("/api/sessions/{session_id}/stop")
    def stop(session_id: str):
        return _transition(session_id, core.stop)

    @app.get("/api/sessions/{session_id}")
    def session_view(session_id: str):
        return server.call(lambda: core.session_view(session_id))

    @app.get("/api/sessions/{session_id}/summary")
    def summary(session_id: str):
        result = server.call(lambda: core.summary(session_id))
        return result.as_dict()

    @app.post("/api/sessions/{session_id}/export")
    def export(session_id: str):
        csv_path, meta_path = server.call(lambda: core.export(session_id))
        return {"csv_path": str(csv_path), "meta_path": str(meta_path)}

    @app.get("/api/stats")
    def stats():
        return server.call(core.stats)

    @app.get("/api/lifecycle")
    def lifecycle():
        return LIFECYCLE_TRANSITIONS

    @app.get("/api/live")
    def live():
        subscriber = server.call(lambda: core.subscribe())

        def gen():
            try:
                yield "retry: 2000\n\n"
                while True:
                    event = subscriber.pop(timeout=1.0)
                    if event is None:
                        if subscriber.closed:
                            return
                        yield ": ping\n\n"
                        continue
                    yield f"data: {json.dumps(event.as_dict())}\n\n"
            finally:
                server.call(lambda: core.unsubscribe(subscriber))

        return StreamingResponse(gen(), media_type="text/event-stream")

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        # Mounted last so /api/* routes win; html=True maps / to index.html.
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
