"""Networked learner bridge: JSON-over-TCP client and reference server.

The wire protocol is language neutral: UTF-8 JSON objects, one per line,
terminated by LF. Every request receives exactly one response, in order.

Requests::

    {"kind": "hello", "version": 1, "max_frame": <bytes, optional>}
    {"kind": "fit", "inputs": {col: [...]}, "outputs": {col: [...]}}
    {"kind": "predict", "model": "<id>", "inputs": {col: [...]}}
    {"kind": "save", "model": "<id>"}
    {"kind": "shutdown"}

Responses::

    {"kind": "hello_ack", "version": 1, "max_frame": <negotiated>}
    {"kind": "fit_ack", "model": "<id>"}
    {"kind": "prediction", "outputs": {col: [...]}}
    {"kind": "saved", "model": "<id>", "data": {...serialized model...}}
    {"kind": "shutdown_ack"}
    {"kind": "error", "message": "..."}

Floats are serialized with their shortest round-trippable decimal form;
NaN and infinities are rejected on both ends. The frame limit (default
64 MiB per line) is negotiated down to the smaller of the two peers' limits
during hello. Model identifiers are scoped to one session; sessions never
see each other's models.
"""

from __future__ import annotations

import itertools
import json
import socket
import socketserver
import threading
from typing import Callable, Sequence

from .dataset import ColumnKind, Dataset
from .errors import PipelineError
from .learners import LinearRegressionLearner, Model, SchemaMismatch, model_from_dict

PROTOCOL_VERSION = 1
DEFAULT_MAX_FRAME = 64 * 1024 * 1024
DEFAULT_TIMEOUT = 30.0


class ConnectFailed(PipelineError):
    """The server could not be reached or refused the session."""


class VersionMismatch(PipelineError):
    """Client and server speak incompatible protocol versions."""


class RemoteError(PipelineError):
    """The server reported an error for a request."""


class ConnectionClosed(RemoteError):
    """The connection ended before a response arrived."""


class FrameTooLarge(PipelineError):
    """A message exceeds the negotiated frame limit."""


class BindFailed(PipelineError):
    """The server could not bind its listening address."""


def parse_address(address) -> tuple[str, int]:
    """Accept 'host:port' strings or (host, port) tuples."""
    if isinstance(address, str):
        host, sep, port = address.rpartition(":")
        if not sep or not host:
            raise ValueError(f"address must be 'host:port', got {address!r}")
        return host, int(port)
    host, port = address
    return host, int(port)


def _reject_nonfinite(token: str):
    raise ValueError(f"non-finite number {token!r} is forbidden on the wire")


def _encode(payload: dict, max_frame: int) -> bytes:
    try:
        text = json.dumps(payload, allow_nan=False, separators=(",", ":"))
    except ValueError as exc:
        raise RemoteError(f"cannot serialize message: {exc}") from None
    line = text.encode("utf-8") + b"\n"
    if len(line) > max_frame:
        raise FrameTooLarge(f"message of {len(line)} bytes exceeds frame limit {max_frame}")
    return line


def _dataset_to_wire(dataset: Dataset) -> dict:
    for name, kind in dataset.schema:
        if kind is not ColumnKind.FLOAT64:
            raise ValueError(f"only float columns travel on the wire; {name!r} is {kind.value}")
    return {name: dataset.column(name).tolist() for name in dataset.column_names}


def _wire_to_dataset(obj) -> Dataset:
    if not isinstance(obj, dict) or not obj:
        raise ValueError("expected a non-empty object of column arrays")
    columns = []
    for name, values in obj.items():
        if not isinstance(values, list):
            raise ValueError(f"column {name!r} must be an array")
        columns.append((name, [float(v) for v in values]))
    return Dataset(columns)


class RemoteModel:
    """Client-side handle to a model trained on a remote server."""

    def __init__(self, session: "RemoteSession", model_id: str,
                 input_columns: Sequence[str], output_column: str):
        self._session = session
        self.remote_id = model_id
        self.input_columns = tuple(input_columns)
        self.output_column = output_column

    @property
    def model_id(self) -> str:
        return f"remote-{self.remote_id}"

    def predict(self, inputs: Dataset) -> Dataset:
        """Predict through the remote session; row-aligned with the inputs.

        Raises:
            SchemaMismatch: if input columns differ from the trained schema.
            RemoteError / TimeoutError: on transport or server failures.
        """
        if set(inputs.column_names) != set(self.input_columns):
            raise SchemaMismatch(
                f"model expects columns {list(self.input_columns)}, got {list(inputs.column_names)}"
            )
        ordered = inputs.select(self.input_columns)
        response = self._session._request(
            {"kind": "predict", "model": self.remote_id, "inputs": _dataset_to_wire(ordered)}
        )
        if response.get("kind") != "prediction":
            raise RemoteError(f"unexpected response kind {response.get('kind')!r}")
        return _wire_to_dataset(response["outputs"])

    def fetch(self) -> Model:
        """Download the serialized model and rebuild it locally."""
        response = self._session._request({"kind": "save", "model": self.remote_id})
        if response.get("kind") != "saved":
            raise RemoteError(f"unexpected response kind {response.get('kind')!r}")
        return model_from_dict(response["data"])


class RemoteSession:
    """One client connection; requests are answered strictly in order."""

    def __init__(self, sock: socket.socket, max_frame: int):
        self._sock = sock
        self._rfile = sock.makefile("rb")
        self._max_frame = max_frame
        self._closed = False

    def _request(self, payload: dict) -> dict:
        if self._closed:
            raise ConnectionClosed("session is closed")
        line = _encode(payload, self._max_frame)
        try:
            self._sock.sendall(line)
            raw = self._rfile.readline(self._max_frame + 1)
        except TimeoutError:
            raise
        except OSError as exc:
            raise ConnectionClosed(f"connection lost: {exc}") from None
        if not raw:
            raise ConnectionClosed("server closed the connection")
        if not raw.endswith(b"\n"):
            if len(raw) > self._max_frame:
                raise FrameTooLarge(f"response exceeds frame limit {self._max_frame}")
            raise ConnectionClosed("server closed the connection mid-message")
        try:
            message = json.loads(raw.decode("utf-8"), parse_constant=_reject_nonfinite)
        except (ValueError, UnicodeDecodeError) as exc:
            raise RemoteError(f"malformed response: {exc}") from None
        if not isinstance(message, dict):
            raise RemoteError("malformed response: not an object")
        if message.get("kind") == "error":
            raise RemoteError(message.get("message", "unspecified server error"))
        return message

    def fit(self, inputs: Dataset, outputs: Dataset) -> RemoteModel:
        """Train on the server; returns a handle to the remote model."""
        response = self._request(
            {"kind": "fit", "inputs": _dataset_to_wire(inputs), "outputs": _dataset_to_wire(outputs)}
        )
        if response.get("kind") != "fit_ack":
            raise RemoteError(f"unexpected response kind {response.get('kind')!r}")
        return RemoteModel(
            self, response["model"], inputs.column_names, outputs.column_names[0]
        )

    def shutdown_server(self) -> None:
        """Ask the server process to stop accepting sessions and exit."""
        response = self._request({"kind": "shutdown"})
        if response.get("kind") != "shutdown_ack":
            raise RemoteError(f"unexpected response kind {response.get('kind')!r}")

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._rfile.close()
                self._sock.close()
            except OSError:
                pass

    def __enter__(self) -> "RemoteSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(address, timeout: float = DEFAULT_TIMEOUT, max_frame: int = DEFAULT_MAX_FRAME) -> RemoteSession:
    """Open a session: TCP connect plus hello/hello_ack negotiation.

    Raises:
        ConnectFailed: if the server is unreachable or refuses the session.
        VersionMismatch: if the protocol versions are incompatible.
        TimeoutError: if the server does not answer within ``timeout``.
    """
    host, port = parse_address(address)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ConnectFailed(f"cannot connect to {host}:{port}: {exc}") from None
    session = RemoteSession(sock, max_frame)
    try:
        response = session._request(
            {"kind": "hello", "version": PROTOCOL_VERSION, "max_frame": max_frame}
        )
    except RemoteError as exc:
        session.close()
        if "version" in str(exc):
            raise VersionMismatch(str(exc)) from None
        raise ConnectFailed(str(exc)) from None
    if response.get("kind") != "hello_ack":
        session.close()
        raise ConnectFailed(f"unexpected response kind {response.get('kind')!r}")
    if response.get("version") != PROTOCOL_VERSION:
        session.close()
        raise VersionMismatch(
            f"server speaks version {response.get('version')}, client {PROTOCOL_VERSION}"
        )
    session._max_frame = int(response.get("max_frame", max_frame))
    return session


class RemoteLearnerClient:
    """Offline-learner adapter that trains through a remote session."""

    def __init__(self, session: RemoteSession):
        self._session = session

    def fit(self, inputs: Dataset, outputs: Dataset) -> RemoteModel:
        return self._session.fit(inputs, outputs)


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        owner: LearnerServer = self.server.owner
        if not owner._session_slots.acquire(blocking=False):
            self._send({"kind": "error", "message": "server at capacity"}, owner.max_frame)
            return
        try:
            self._serve_session(owner)
        finally:
            owner._session_slots.release()

    def _serve_session(self, owner: "LearnerServer") -> None:
        models: dict[str, Model] = {}
        ids = itertools.count(1)
        max_frame = owner.max_frame
        while True:
            line = self.rfile.readline(max_frame + 1)
            if not line:
                return
            if not line.endswith(b"\n"):
                if len(line) > max_frame:
                    self._send(
                        {"kind": "error", "message": f"frame exceeds limit of {max_frame} bytes"},
                        max_frame,
                    )
                return  # framing lost or peer vanished; end the session
            try:
                message = json.loads(line.decode("utf-8"), parse_constant=_reject_nonfinite)
                if not isinstance(message, dict):
                    raise ValueError("message is not an object")
            except (ValueError, UnicodeDecodeError) as exc:
                self._send({"kind": "error", "message": f"malformed message: {exc}"}, max_frame)
                continue

            try:
                response, max_frame, stop = self._dispatch(owner, message, models, ids, max_frame)
            except (PipelineError, ValueError, KeyError, TypeError) as exc:
                response, stop = {"kind": "error", "message": str(exc)}, False
            self._send(response, max_frame)
            if stop:
                return

    def _dispatch(self, owner, message, models, ids, max_frame):
        kind = message.get("kind")
        if kind == "hello":
            version = message.get("version")
            if version != PROTOCOL_VERSION:
                raise ValueError(f"unsupported protocol version: {version}")
            negotiated = min(max_frame, int(message.get("max_frame", max_frame)))
            ack = {"kind": "hello_ack", "version": PROTOCOL_VERSION, "max_frame": negotiated}
            return ack, negotiated, False
        if kind == "fit":
            inputs = _wire_to_dataset(message.get("inputs"))
            outputs = _wire_to_dataset(message.get("outputs"))
            model = owner.learner_factory().fit(inputs, outputs)
            model_id = f"m{next(ids)}"
            models[model_id] = model
            return {"kind": "fit_ack", "model": model_id}, max_frame, False
        if kind == "predict":
            model = self._lookup(models, message)
            inputs = _wire_to_dataset(message.get("inputs"))
            predictions = model.predict(inputs)
            wire = {"kind": "prediction", "outputs": _dataset_to_wire(predictions)}
            return wire, max_frame, False
        if kind == "save":
            model = self._lookup(models, message)
            return {"kind": "saved", "model": message["model"], "data": model.to_dict()}, max_frame, False
        if kind == "shutdown":
            threading.Thread(target=self.server.shutdown, daemon=True).start()
            return {"kind": "shutdown_ack"}, max_frame, True
        raise ValueError(f"unknown request kind: {kind!r}")

    @staticmethod
    def _lookup(models: dict, message: dict) -> Model:
        model_id = message.get("model")
        if model_id not in models:
            raise ValueError(f"unknown model id: {model_id!r}")
        return models[model_id]

    def _send(self, payload: dict, max_frame: int) -> None:
        try:
            line = _encode(payload, max_frame)
        except (FrameTooLarge, RemoteError) as exc:
            line = _encode({"kind": "error", "message": str(exc)}, max_frame)
        try:
            self.wfile.write(line)
            self.wfile.flush()
        except OSError:
            pass  # peer already gone; session loop will observe EOF


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class LearnerServer:
    """Reference server exposing an offline learner over the wire protocol.

    Each accepted session is handled on its own thread, strictly in request
    order, with a private model registry. At most ``max_sessions`` sessions
    run concurrently; further connects are refused with an error response.
    """

    def __init__(
        self,
        learner_factory: Callable[[], object] | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        max_sessions: int = 8,
        max_frame: int = DEFAULT_MAX_FRAME,
    ):
        if max_sessions < 1:
            raise ValueError(f"max_sessions must be positive, got {max_sessions}")
        self.learner_factory = learner_factory or LinearRegressionLearner
        self.max_frame = max_frame
        self._session_slots = threading.Semaphore(max_sessions)
        try:
            self._tcp = _TcpServer((host, port), _SessionHandler)
        except OSError as exc:
            raise BindFailed(f"cannot bind {host}:{port}: {exc}") from None
        self._tcp.owner = self
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def start(self) -> "LearnerServer":
        """Serve on a background thread; returns self."""
        self._thread = threading.Thread(
            target=self._tcp.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
        )
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        """Serve on the calling thread until shut down."""
        try:
            self._tcp.serve_forever(poll_interval=0.05)
        finally:
            self._tcp.server_close()

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def __enter__(self) -> "LearnerServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def serve(learner_factory=None, address="127.0.0.1:0", max_sessions: int = 8) -> LearnerServer:
    """Bind and start a learner server in the background; returns the server."""
    host, port = parse_address(address)
    server = LearnerServer(learner_factory, host=host, port=port, max_sessions=max_sessions)
    return server.start()
