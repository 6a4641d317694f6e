"""In-process RESP server implementing the command subset the store uses.

Keeps the Redis-backend conformance tests honest: the client talks the
real wire protocol over a real socket, just to a dict instead of redis.
"""

from __future__ import annotations

import socketserver
import threading
from fnmatch import fnmatchcase


def _encode(value) -> bytes:
    if value is None:
        return b"$-1\r\n"
    if isinstance(value, int):
        return f":{value}\r\n".encode()
    if isinstance(value, str):
        data = value.encode("utf-8")
        return b"$" + str(len(data)).encode() + b"\r\n" + data + b"\r\n"
    if isinstance(value, (list, tuple)):
        out = f"*{len(value)}\r\n".encode()
        return out + b"".join(_encode(item) for item in value)
    raise TypeError(type(value))


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        while True:
            line = self.rfile.readline()
            if not line:
                return
            if not line.startswith(b"*"):
                self.wfile.write(b"-ERR expected array\r\n")
                return
            count = int(line[1:].strip())
            args = []
            for _ in range(count):
                header = self.rfile.readline()
                length = int(header[1:].strip())
                args.append(self.rfile.read(length).decode("utf-8"))
                self.rfile.read(2)
            self.wfile.write(self._dispatch(args))
            self.wfile.flush()

    def _dispatch(self, args: list[str]) -> bytes:
        server: MiniRespServer = self.server  # type: ignore[assignment]
        command = args[0].upper()
        with server.lock:
            if command == "PING":
                return b"+PONG\r\n"
            if command == "SELECT":
                return b"+OK\r\n"
            if command == "FLUSHDB":
                server.data.clear()
                return b"+OK\r\n"
            if command == "SET":
                server.data[args[1]] = args[2]
                return b"+OK\r\n"
            if command == "GET":
                return _encode(server.data.get(args[1]))
            if command == "DEL":
                removed = sum(1 for key in args[1:] if server.data.pop(key, None) is not None)
                return _encode(removed)
            if command == "SCAN":
                pattern = "*"
                if "MATCH" in [a.upper() for a in args]:
                    pattern = args[[a.upper() for a in args].index("MATCH") + 1]
                keys = [key for key in server.data if fnmatchcase(key, pattern)]
                return _encode(["0", keys])
            if command == "KEYS":
                return _encode([key for key in server.data if fnmatchcase(key, args[1])])
        return b"-ERR unknown command\r\n"


class MiniRespServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self) -> None:
        super().__init__(("127.0.0.1", 0), _Handler)
        self.data: dict[str, str] = {}
        self.lock = threading.Lock()
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self.server_address[1]

    @property
    def url(self) -> str:
        return f"redis://127.0.0.1:{self.port}/0"

    def start(self) -> "MiniRespServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
